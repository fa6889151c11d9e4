"""Reflection schemes and their end-to-end gains.

All functions accept batched realizations: a leading batch shape on the
channel arrays propagates to every returned gain, index and phase vector.
Gains are linear power gains; the SNR-scaled rate is ``log2(1 + gain * snr)``
with ``snr = P_u / noise``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelRealization, unit_phasors

TWO_PI = 2 * np.pi


class Scheme(str, enum.Enum):
    IR = "IR"
    JR = "JR"
    OR = "OR"
    OMUR = "OMUR"
    OMUR_RP = "OMUR_RP"
    OPPBF = "OppBF"
    SU = "SU"

    @classmethod
    def parse(cls, name: str) -> "Scheme":
        key = str(name).strip().upper().replace("-", "_")
        for s in cls:
            if s.value.upper() == key:
                return s
        raise ValueError(f"unknown scheme {name!r}; expected one of {[s.value for s in cls]}")


def wrap_phase(theta) -> np.ndarray:
    out = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    # mod can round tiny negatives up to exactly 2pi
    out[out >= TWO_PI] = 0.0
    return out


@dataclass
class PhaseConfig:
    """Phase shifts of all M elements, the diagonal of Theta."""

    theta: np.ndarray

    def __post_init__(self):
        self.theta = wrap_phase(np.atleast_1d(self.theta))

    @property
    def coefficients(self) -> np.ndarray:
        return unit_phasors(self.theta)

    @classmethod
    def random(cls, num_elements: int, rng: np.random.Generator, batch=()) -> "PhaseConfig":
        return cls(rng.uniform(0.0, TWO_PI, tuple(batch) + (num_elements,)))

    @classmethod
    def zeros(cls, num_elements: int, batch=()) -> "PhaseConfig":
        return cls(np.zeros(tuple(batch) + (num_elements,)))


@dataclass
class SchemeOutcome:
    scheme: Scheme
    gamma: np.ndarray | float
    rate: np.ndarray | float
    selected_user: Optional[np.ndarray | int] = None
    phases: Optional[PhaseConfig] = None


def rate(gamma, snr):
    return np.log2(1.0 + np.asarray(gamma) * snr)


def effective_channels(real: ChannelRealization, phases: PhaseConfig) -> np.ndarray:
    """``f^T Theta g_k + d_k`` for every user, shape ``(..., K)``."""
    q = phases.coefficients
    return np.einsum("...m,...mk->...k", real.f * q, real.G) + real.d


def effective_channel(real: ChannelRealization, phases: PhaseConfig, user: int):
    if not 0 <= user < real.num_users:
        raise IndexError(f"user {user} out of range for K={real.num_users}")
    return effective_channels(real, phases)[..., user]


def coherent_magnitudes(real: ChannelRealization) -> np.ndarray:
    """Per-user aligned E2E magnitude ``sum |f||g| + |d|``, shape ``(..., K)``."""
    return np.einsum("...m,...mk->...k", np.abs(real.f), np.abs(real.G)) + np.abs(real.d)


def coherent_gains(real: ChannelRealization) -> np.ndarray:
    """Best single-user power gain for each user, shape ``(..., K)``."""
    return coherent_magnitudes(real) ** 2


def gain_ideal(real: ChannelRealization):
    """Sum of all users' coherent gains; an upper bound no phase vector attains for K > 1."""
    return coherent_gains(real).sum(axis=-1)


def anchor_phases(real: ChannelRealization, user) -> PhaseConfig:
    """Phases that coherently combine every reflected path of ``user`` with its direct path.

    ``user`` may be an integer or an integer array matching the batch shape.
    Zero-valued cascade terms get phase contribution 0.
    """
    user = np.asarray(user)
    casc = real.cascade
    if user.ndim == 0:
        c_k = casc[..., :, int(user)]
        d_k = real.d[..., int(user)]
    else:
        c_k = np.take_along_axis(casc, user[..., None, None], axis=-1)[..., 0]
        d_k = np.take_along_axis(real.d, user[..., None], axis=-1)[..., 0]
    return PhaseConfig(np.angle(d_k)[..., None] - np.angle(c_k))


def _best_user(real: ChannelRealization):
    gains = coherent_gains(real)
    # argmax returns the first maximum: ties go to the lowest index
    k = np.argmax(gains, axis=-1)
    return k, np.take_along_axis(gains, k[..., None], axis=-1)[..., 0], gains


def run_ir(real: ChannelRealization, snr: float = 1.0) -> SchemeOutcome:
    g = gain_ideal(real)
    return SchemeOutcome(Scheme.IR, g, rate(g, snr))


def run_su(real: ChannelRealization, snr: float = 1.0, user: int = 0) -> SchemeOutcome:
    """The chosen user alone in the system with its coherent phases."""
    g = coherent_gains(real)[..., user]
    return SchemeOutcome(Scheme.SU, g, rate(g, snr), user, anchor_phases(real, user))


def run_or(real: ChannelRealization, snr: float = 1.0) -> SchemeOutcome:
    """Serve only the user with the largest coherent gain."""
    k, g, _ = _best_user(real)
    return SchemeOutcome(Scheme.OR, g, rate(g, snr), k, anchor_phases(real, k))


def omur_parts(real: ChannelRealization):
    """Anchor user, its phases, its aligned gain and the residual multi-user gain."""
    k, g_anchor, _ = _best_user(real)
    phases = anchor_phases(real, k)
    h2 = np.abs(effective_channels(real, phases)) ** 2
    others = np.ones(h2.shape, dtype=bool)
    np.put_along_axis(others, k[..., None], False, axis=-1)
    g_extra = np.where(others, h2, 0.0).sum(axis=-1)
    return k, phases, g_anchor, g_extra


def run_omur(real: ChannelRealization, snr: float = 1.0) -> SchemeOutcome:
    """Align the RISs to the best user and let every user transmit (SIC sum rate)."""
    k, phases, g_anchor, g_extra = omur_parts(real)
    g = g_anchor + g_extra
    return SchemeOutcome(Scheme.OMUR, g, rate(g, snr), k, phases)


def run_omur_rp(real: ChannelRealization, rng: np.random.Generator, snr: float = 1.0) -> SchemeOutcome:
    """Random phases, all users transmit, no CSI needed at the RISs."""
    phases = PhaseConfig.random(real.num_elements, rng, real.batch_shape)
    g = (np.abs(effective_channels(real, phases)) ** 2).sum(axis=-1)
    return SchemeOutcome(Scheme.OMUR_RP, g, rate(g, snr), None, phases)


def run_oppbf(real: ChannelRealization, rng: np.random.Generator, snr: float = 1.0) -> SchemeOutcome:
    """Opportunistic beamforming baseline.

    The RISs apply random phases and only the user with the strongest
    resulting channel transmits.  This reading of the baseline is inferred:
    it needs no RIS channel estimates, only per-user received power.
    """
    phases = PhaseConfig.random(real.num_elements, rng, real.batch_shape)
    h2 = np.abs(effective_channels(real, phases)) ** 2
    k = np.argmax(h2, axis=-1)
    g = np.take_along_axis(h2, k[..., None], axis=-1)[..., 0]
    return SchemeOutcome(Scheme.OPPBF, g, rate(g, snr), k, phases)


def sum_gain(real: ChannelRealization, phases: PhaseConfig):
    """``||f^T Theta G + d^T||^2``."""
    return (np.abs(effective_channels(real, phases)) ** 2).sum(axis=-1)


def sum_capacity(real: ChannelRealization, phases: PhaseConfig, pu: float, noise: float):
    """SIC uplink sum capacity in bit/s/Hz."""
    return np.log2(1.0 + sum_gain(real, phases) * pu / noise)

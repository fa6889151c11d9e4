"""Nakagami-m channel generation for the multi-RIS uplink.

Three link classes are drawn per realization:

* ``d``  user -> BS direct link, shape ``(..., K)``
* ``G``  user -> RIS element, shape ``(..., M, K)``
* ``f``  RIS element -> BS, shape ``(..., M)``

where ``M = sum(N_s)`` stacks the elements of all surfaces in surface order.
Every array may carry leading batch dimensions so that a block of trials is
generated with a single call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, ParameterError

INDEPENDENT = "independent"
PER_SURFACE_FULL = "per-surface-full"
CORRELATIONS = (INDEPENDENT, PER_SURFACE_FULL)

# Link distances are clamped to the 1 m reference distance of the path-loss laws.
MIN_LINK_DISTANCE = 1.0


@dataclass(frozen=True)
class NakagamiParams:
    """Shape ``m`` and spread ``omega = E[X^2]`` of a Nakagami-m magnitude."""

    m: float
    omega: float

    def __post_init__(self):
        if not (self.m >= 0.5):
            raise ParameterError(f"Nakagami shape m must be >= 0.5, got {self.m}")
        if not (self.omega > 0):
            raise ParameterError(f"Nakagami spread omega must be > 0, got {self.omega}")

    def cdf(self, x):
        """Analytical CDF ``gamma(m, m x^2 / omega) / Gamma(m)``."""
        from .specfun import gammainc_lower

        x = np.asarray(x, dtype=float)
        return gammainc_lower(self.m, self.m / self.omega * x * x)

    def mean(self) -> float:
        return math.exp(math.lgamma(self.m + 0.5) - math.lgamma(self.m)) * math.sqrt(
            self.omega / self.m
        )


def sample_nakagami(params: NakagamiParams, rng: np.random.Generator, size=None):
    """Draw Nakagami-m magnitudes.

    ``X^2 ~ Gamma(shape=m, scale=omega/m)``; numpy's gamma sampler is a
    rejection method valid for any real shape, so non-integer ``m`` is fine.
    """
    return np.sqrt(rng.gamma(params.m, params.omega / params.m, size))


def _nakagami_array(m, omega, rng, size):
    m = np.asarray(m, dtype=float)
    omega = np.asarray(omega, dtype=float)
    return np.sqrt(rng.gamma(np.broadcast_to(m, size), np.broadcast_to(omega / m, size)))


def umi_pathloss_db(fc: float, dist) -> np.ndarray | float:
    """3GPP UMi NLOS large-scale gain in dB (``fc`` in GHz, ``dist`` in m)."""
    if fc <= 0:
        raise ParameterError(f"carrier frequency must be positive, got {fc}")
    d = np.asarray(dist, dtype=float)
    if np.any(d < 1.0):
        raise ParameterError("UMi path loss is undefined below the 1 m reference distance")
    out = -22.7 - 26.0 * math.log10(fc) - 36.7 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def los_pathloss_db(dist, l0_db: float, alpha: float) -> np.ndarray | float:
    """LOS gain ``l0_db - 10 alpha log10(dist)`` with ``l0_db`` referenced at 1 m."""
    d = np.asarray(dist, dtype=float)
    if np.any(d < 1.0):
        raise ParameterError("LOS path loss is undefined below the 1 m reference distance")
    out = l0_db - 10.0 * alpha * np.log10(d)
    return float(out) if out.ndim == 0 else out


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(x)


@dataclass
class Topology:
    """Cell geometry. The BS sits at the origin."""

    cell_radius: float = 300.0
    num_users: int = 4
    num_surfaces: int = 2
    elements_per_surface: Sequence[int] = (16, 16)
    ris_distance_to_bs: float = 60.0
    carrier_freq: float = 2.0
    # None means users are drawn uniformly in the disc.
    user_positions: Optional[np.ndarray] = None

    def __post_init__(self):
        if isinstance(self.elements_per_surface, (int, np.integer)):
            self.elements_per_surface = (int(self.elements_per_surface),) * self.num_surfaces
        self.elements_per_surface = tuple(int(n) for n in self.elements_per_surface)
        if self.user_positions is not None:
            self.user_positions = np.asarray(self.user_positions, dtype=float).reshape(-1, 2)
        errors = self.problems()
        if errors:
            raise ConfigError(errors)

    def problems(self) -> list[str]:
        errs = []
        if self.num_users < 1:
            errs.append("topology.num_users: must be >= 1")
        if self.num_surfaces < 0:
            errs.append("topology.num_surfaces: must be >= 0")
        if len(self.elements_per_surface) != self.num_surfaces:
            errs.append(
                "topology.elements_per_surface: expected one count per surface "
                f"({self.num_surfaces}), got {len(self.elements_per_surface)}"
            )
        if any(n < 1 for n in self.elements_per_surface):
            errs.append("topology.elements_per_surface: every surface needs >= 1 element")
        if self.cell_radius <= 0:
            errs.append("topology.cell_radius: must be > 0")
        if self.carrier_freq <= 0:
            errs.append("topology.carrier_freq: must be > 0")
        if self.user_positions is not None and len(self.user_positions) != self.num_users:
            errs.append(
                f"topology.user_positions: expected {self.num_users} points, "
                f"got {len(self.user_positions)}"
            )
        return errs

    @property
    def num_elements(self) -> int:
        return int(sum(self.elements_per_surface))

    @property
    def surface_of_element(self) -> np.ndarray:
        """Surface index of every stacked element, length M."""
        return np.repeat(np.arange(self.num_surfaces), self.elements_per_surface)

    def surface_positions(self) -> np.ndarray:
        """Surfaces equally spaced on the concentric circle, first one at angle 0."""
        ang = 2 * np.pi * np.arange(self.num_surfaces) / max(self.num_surfaces, 1)
        return self.ris_distance_to_bs * np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    def draw_user_positions(self, rng: np.random.Generator, size=()) -> np.ndarray:
        """Uniform points in the cell disc, shape ``size + (K, 2)``."""
        shape = tuple(np.atleast_1d(size)) if size != () else ()
        r = self.cell_radius * np.sqrt(rng.random(shape + (self.num_users,)))
        phi = 2 * np.pi * rng.random(shape + (self.num_users,))
        return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)


@dataclass
class FadingTables:
    """Per-link Nakagami parameters; spreads are linear and include path loss.

    ``m_d, omega_d``: ``(..., K)``; ``m_g, omega_g``: ``(..., S, K)``;
    ``m_f, omega_f``: ``(..., S)``.  Leading dims, when present, index trials.
    """

    m_d: np.ndarray
    omega_d: np.ndarray
    m_g: np.ndarray
    omega_g: np.ndarray
    m_f: np.ndarray
    omega_f: np.ndarray

    def __post_init__(self):
        for name in ("m_d", "omega_d", "m_g", "omega_g", "m_f", "omega_f"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if any(np.any(a < 0.5) for a in (self.m_d, self.m_g, self.m_f)):
            raise ParameterError("fading tables: every shape factor must be >= 0.5")
        if any(np.any(~(a > 0)) for a in (self.omega_d, self.omega_g, self.omega_f)):
            raise ParameterError("fading tables: every spread must be > 0")

    def check_covers(self, topology: Topology):
        K, S = topology.num_users, topology.num_surfaces
        problems = []
        if self.m_d.shape[-1:] != (K,) or self.omega_d.shape[-1:] != (K,):
            problems.append(f"fading.direct: need {K} user entries")
        if self.m_g.shape[-2:] != (S, K) or self.omega_g.shape[-2:] != (S, K):
            problems.append(f"fading.ris_user: need a {S}x{K} table")
        if self.m_f.shape[-1:] != (S,) or self.omega_f.shape[-1:] != (S,):
            problems.append(f"fading.ris_bs: need {S} surface entries")
        if problems:
            raise ConfigError(problems)

    def direct(self, k: int) -> NakagamiParams:
        return NakagamiParams(float(self.m_d[..., k]), float(self.omega_d[..., k]))

    def ris_user(self, s: int, k: int) -> NakagamiParams:
        return NakagamiParams(float(self.m_g[..., s, k]), float(self.omega_g[..., s, k]))

    def ris_bs(self, s: int) -> NakagamiParams:
        return NakagamiParams(float(self.m_f[..., s]), float(self.omega_f[..., s]))

    @classmethod
    def uniform(cls, K: int, S: int, m: float = 1.0, omega_d=1.0, omega_g=1.0, omega_f=1.0):
        """Homogeneous tables, handy for normalized experiments."""
        return cls(
            m_d=np.full(K, m),
            omega_d=np.broadcast_to(np.asarray(omega_d, float), (K,)).copy(),
            m_g=np.full((S, K), m),
            omega_g=np.broadcast_to(np.asarray(omega_g, float), (S, K)).copy(),
            m_f=np.full(S, m),
            omega_f=np.broadcast_to(np.asarray(omega_f, float), (S,)).copy(),
        )


def geometric_fading(
    topology: Topology,
    user_positions: np.ndarray,
    m: float = 2.5,
    l0_db: float = -30.0,
    alpha: float = 2.0,
) -> FadingTables:
    """Fading tables from path loss: UMi for user links, LOS for RIS -> BS.

    ``user_positions`` has shape ``(..., K, 2)``; the result carries the same
    leading dims on its user-dependent tables.
    """
    pos = np.asarray(user_positions, dtype=float)
    ris = topology.surface_positions()
    fc = topology.carrier_freq
    d_bs = np.maximum(np.linalg.norm(pos, axis=-1), MIN_LINK_DISTANCE)
    # (..., S, K)
    d_ris = np.linalg.norm(pos[..., None, :, :] - ris[:, None, :], axis=-1)
    d_ris = np.maximum(d_ris, MIN_LINK_DISTANCE)
    d_f = np.maximum(np.full(topology.num_surfaces, topology.ris_distance_to_bs), MIN_LINK_DISTANCE)
    omega_d = db2lin(umi_pathloss_db(fc, d_bs))
    omega_g = db2lin(umi_pathloss_db(fc, d_ris))
    omega_f = db2lin(los_pathloss_db(d_f, l0_db, alpha))
    return FadingTables(
        m_d=np.full(omega_d.shape, m),
        omega_d=omega_d,
        m_g=np.full(np.shape(omega_g), m),
        omega_g=omega_g,
        m_f=np.full(topology.num_surfaces, m),
        omega_f=np.asarray(omega_f, dtype=float).reshape(topology.num_surfaces),
    )


@dataclass
class ChannelRealization:
    """One (or a batch of) draws of ``f``, ``G`` and ``d``."""

    f: np.ndarray
    G: np.ndarray
    d: np.ndarray
    surface_of_element: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=complex)
        self.G = np.asarray(self.G, dtype=complex)
        self.d = np.asarray(self.d, dtype=complex)
        if self.G.shape[-2:] != self.f.shape[-1:] + self.d.shape[-1:]:
            raise ParameterError(
                f"inconsistent shapes: f {self.f.shape}, G {self.G.shape}, d {self.d.shape}"
            )
        if self.surface_of_element is None:
            self.surface_of_element = np.zeros(self.num_elements, dtype=int)

    @property
    def num_elements(self) -> int:
        return self.f.shape[-1]

    @property
    def num_users(self) -> int:
        return self.d.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return self.d.shape[:-1]

    @property
    def cascade(self) -> np.ndarray:
        """``diag(f) G`` per element and user, shape ``(..., M, K)``."""
        return self.f[..., :, None] * self.G

    def __getitem__(self, idx) -> "ChannelRealization":
        """Select trials from a batched realization."""
        return ChannelRealization(self.f[idx], self.G[idx], self.d[idx], self.surface_of_element)


def unit_phasors(theta) -> np.ndarray:
    """``exp(j theta)``; cheaper than the complex exponential."""
    theta = np.asarray(theta, dtype=float)
    out = np.empty(theta.shape, dtype=complex)
    out.real = np.cos(theta)
    out.imag = np.sin(theta)
    return out


def _unit_phasors(rng, size):
    return unit_phasors(rng.uniform(0.0, 2 * np.pi, size))


def realize(
    topology: Topology,
    fading: FadingTables,
    correlation: str = INDEPENDENT,
    rng: Optional[np.random.Generator] = None,
    size=None,
) -> ChannelRealization:
    """Draw a channel realization (or ``size`` of them).

    Magnitudes follow the per-link Nakagami tables, phases are i.i.d. uniform
    on [0, 2pi).  Under ``per-surface-full`` correlation all elements of a
    surface share one draw for ``f`` and, per user, one draw for ``g``.
    """
    if correlation not in CORRELATIONS:
        raise ConfigError([f"correlation: unknown mode {correlation!r}"])
    fading.check_covers(topology)
    rng = np.random.default_rng() if rng is None else rng
    batch = () if size is None else tuple(np.atleast_1d(size))
    K, S = topology.num_users, topology.num_surfaces
    surf = topology.surface_of_element
    M = topology.num_elements

    d = _nakagami_array(fading.m_d, fading.omega_d, rng, batch + (K,))
    d = d * _unit_phasors(rng, batch + (K,))

    if correlation == INDEPENDENT:
        m_g = np.take(fading.m_g, surf, axis=-2)
        om_g = np.take(fading.omega_g, surf, axis=-2)
        g = _nakagami_array(m_g, om_g, rng, batch + (M, K)) * _unit_phasors(rng, batch + (M, K))
        f = _nakagami_array(fading.m_f[..., surf], fading.omega_f[..., surf], rng, batch + (M,))
        f = f * _unit_phasors(rng, batch + (M,))
    else:
        g_s = _nakagami_array(fading.m_g, fading.omega_g, rng, batch + (S, K))
        g_s = g_s * _unit_phasors(rng, batch + (S, K))
        f_s = _nakagami_array(fading.m_f, fading.omega_f, rng, batch + (S,))
        f_s = f_s * _unit_phasors(rng, batch + (S,))
        g = np.take(g_s, surf, axis=-2)
        f = np.take(f_s, surf, axis=-1)
    return ChannelRealization(f=f, G=g, d=d, surface_of_element=surf)

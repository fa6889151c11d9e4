"""Joint-reflection benchmark: maximize ``||f^T Theta G + d^T||^2`` over unit-modulus phases.

Element-wise coordinate ascent.  With every phase but ``theta_m`` fixed the
objective is ``A + 2 Re(exp(j theta_m) B_m)`` where
``B_m = sum_k chi_mk conj(r_mk)``, ``chi = diag(f) G`` and ``r_mk`` is user
k's effective channel without element m.  The exact maximizer is
``theta_m = -arg(B_m)``, so every update is non-decreasing.  Each sweep ends
with the analogous exact update of a phase rotation shared by all elements.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelRealization
from .errors import ConfigError
from .schemes import PhaseConfig, anchor_phases, coherent_gains, effective_channels

INITS = ("omur_anchor", "zero", "random")


@dataclass
class JrSolverConfig:
    max_sweeps: int = 200
    rel_tolerance: float = 1e-8
    init: str = "omur_anchor"

    def __post_init__(self):
        problems = []
        if self.max_sweeps < 1:
            problems.append("jr.max_sweeps: must be >= 1")
        if not self.rel_tolerance > 0:
            problems.append("jr.rel_tolerance: must be > 0")
        if self.init not in INITS:
            problems.append(f"jr.init: must be one of {INITS}")
        if problems:
            raise ConfigError(problems)


@dataclass
class JrResult:
    phases: PhaseConfig
    objective: np.ndarray | float
    sweeps: np.ndarray | int
    history: list


def jr_objective(real: ChannelRealization, phases: PhaseConfig):
    return (np.abs(effective_channels(real, phases)) ** 2).sum(axis=-1)


def qcqp_objective(real: ChannelRealization, phases: PhaseConfig):
    """The same objective written as the quadratic form in ``q = conj(exp(j theta))``."""
    q = np.conj(phases.coefficients)
    chi = real.cascade
    d = real.d
    qh_chi = np.einsum("...m,...mk->...k", np.conj(q), chi)
    quad = np.einsum("...k,...k->...", qh_chi, np.conj(qh_chi))
    lin = np.einsum("...k,...k->...", qh_chi, np.conj(d))
    lin_t = np.einsum("...k,...k->...", d, np.conj(qh_chi))
    return (quad + lin + lin_t + (np.abs(d) ** 2).sum(axis=-1)).real


def _initial_phases(real, init, rng):
    batch = real.batch_shape
    if init == "omur_anchor":
        return anchor_phases(real, np.argmax(coherent_gains(real), axis=-1))
    if init == "zero":
        return PhaseConfig.zeros(real.num_elements, batch)
    rng = np.random.default_rng() if rng is None else rng
    return PhaseConfig.random(real.num_elements, rng, batch)


def jr_optimize(
    real: ChannelRealization,
    cfg: Optional[JrSolverConfig] = None,
    rng: Optional[np.random.Generator] = None,
    init_phases: Optional[PhaseConfig] = None,
) -> JrResult:
    """Coordinate ascent from ``cfg.init`` (or explicit ``init_phases``).

    Batched realizations are optimized in lockstep; each trial stops updating
    once its own relative improvement drops below tolerance, so a trial's
    result does not depend on which other trials share its batch.
    ``history`` holds the objective after the init and after every sweep.
    """
    cfg = cfg or JrSolverConfig()
    phases = init_phases if init_phases is not None else _initial_phases(real, cfg.init, rng)
    q = phases.coefficients.copy()
    chi = real.cascade
    batch = real.batch_shape
    c = np.einsum("...m,...mk->...k", q, chi) + real.d
    obj = (np.abs(c) ** 2).sum(axis=-1)
    history = [obj.copy()]
    active = np.ones(batch, dtype=bool)
    sweeps = np.zeros(batch, dtype=int)

    for _ in range(cfg.max_sweeps):
        if not np.any(active):
            break
        sweeps = sweeps + active
        for m in range(real.num_elements):
            chi_m = chi[..., m, :]
            resid = c - chi_m * q[..., m, None]
            b = np.einsum("...k,...k->...", chi_m, np.conj(resid))
            # B_m == 0: every phase is optimal, keep the current one
            new_q = np.where(np.abs(b) > 0, np.exp(-1j * np.angle(b)), q[..., m])
            new_q = np.where(active, new_q, q[..., m])
            q[..., m] = new_q
            c = resid + chi_m * new_q[..., None]
        # Common rotation of all elements against the direct paths, also exact.
        # Without it the ascent can stall with every reflected path in phase
        # but the whole reflected sum opposed to the direct link.
        reflected = c - real.d
        b = np.einsum("...k,...k->...", reflected, np.conj(real.d))
        rot = np.where(np.abs(b) > 0, np.exp(-1j * np.angle(b)), 1.0)
        rot = np.where(active, rot, 1.0)
        q = q * rot[..., None]
        # drop accumulated rounding from the incremental residual updates
        c = np.einsum("...m,...mk->...k", q, chi) + real.d
        new_obj = (np.abs(c) ** 2).sum(axis=-1)
        gain = new_obj - obj
        scale = np.where(obj > 0, obj, 1.0)
        converged = gain <= cfg.rel_tolerance * scale
        obj = np.where(active, new_obj, obj)
        active = active & ~converged
        history.append(obj.copy())

    out = PhaseConfig(np.angle(q))
    if not batch:
        return JrResult(out, float(obj), int(sweeps), [float(h) for h in history])
    return JrResult(out, obj, sweeps, history)

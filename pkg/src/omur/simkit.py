"""Monte-Carlo outage harness.

Trials are grouped in fixed-size blocks.  Every block draws from its own
stream keyed by ``(seed, power point, block)``, with one child stream per
scheme for the scheme's private randomness, so results do not depend on the
thread count, the execution order or on which other schemes are requested.
"""
from __future__ import annotations

import logging
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import analysis, schemes as sch
from .channel import realize
from .config import SystemConfig, noise_power_watts  # noqa: F401  (re-exported)
from .errors import ConfigError
from .optimize import jr_optimize
from .schemes import Scheme

log = logging.getLogger(__name__)

BLOCK_SIZE = 2048
THREADS_ENV = "OMUR_THREADS"
_Z95 = statistics.NormalDist().inv_cdf(0.975)

_SCHEME_KEYS = {s: i + 1 for i, s in enumerate(Scheme)}
_CHANNEL_KEY = 0


@dataclass
class OutagePoint:
    power_gain_db: float
    op_estimate: float
    ci_halfwidth: float
    trials_used: int
    outages: int

    @property
    def censored(self) -> bool:
        """No outage observed: the estimate is only an upper-bounded zero."""
        return self.outages == 0

    @property
    def std_error(self) -> float:
        p = self.op_estimate
        return float(np.sqrt(p * (1 - p) / self.trials_used))


@dataclass
class OutageCurve:
    scheme: str
    points: list = field(default_factory=list)
    analytical: Optional[list] = None
    analytical_se: Optional[list] = None

    def estimates(self) -> np.ndarray:
        return np.array([p.op_estimate for p in self.points])

    def std_errors(self) -> np.ndarray:
        return np.array([p.std_error for p in self.points])

    def analytical_values(self) -> Optional[np.ndarray]:
        return None if self.analytical is None else np.array([v for _, v in self.analytical])

    def reliable_points(self) -> list:
        """Points up to the first one whose CI halfwidth exceeds its estimate."""
        out = []
        for p in self.points:
            if p.ci_halfwidth > p.op_estimate:
                break
            out.append(p)
        return out


def wilson_interval(outages: int, n: int, z: float = _Z95) -> tuple[float, float]:
    """Point estimate and Wilson score halfwidth (the interval is centred off the estimate)."""
    p = outages / n
    denom = 1 + z * z / n
    half = z / denom * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return p, float(half)


def wilson_bounds(outages: int, n: int, z: float = _Z95) -> tuple[float, float]:
    p = outages / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    _, half = wilson_interval(outages, n, z)
    return max(centre - half, 0.0), min(centre + half, 1.0)


def block_stream(seed: int, point: int, block: int, key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(1, point, block, key))
    return np.random.Generator(np.random.PCG64(ss))


def _block_ranges(trials: int):
    return [(b, min(BLOCK_SIZE, trials - b * BLOCK_SIZE)) for b in range((trials + BLOCK_SIZE - 1) // BLOCK_SIZE)]


def block_realization(config: SystemConfig, point: int, block: int, n: int):
    rng = block_stream(config.seed, point, block, _CHANNEL_KEY)
    fading = config.fixed_fading()
    if fading is None:
        positions = config.topology.draw_user_positions(rng, size=n)
        fading = config.fading_for(positions)
    return realize(config.topology, fading, config.correlation, rng, size=n)


def scheme_gains(config: SystemConfig, real, scheme: Scheme, point: int, block: int) -> np.ndarray:
    """Linear E2E gain of ``scheme`` for every trial of a block realization."""
    rng = block_stream(config.seed, point, block, _SCHEME_KEYS[scheme])
    if scheme is Scheme.IR:
        return sch.gain_ideal(real)
    if scheme is Scheme.SU:
        return sch.coherent_gains(real)[..., 0]
    if scheme is Scheme.OR:
        return sch.run_or(real).gamma
    if scheme is Scheme.OMUR:
        return sch.run_omur(real).gamma
    if scheme is Scheme.OMUR_RP:
        return sch.run_omur_rp(real, rng).gamma
    if scheme is Scheme.OPPBF:
        return sch.run_oppbf(real, rng).gamma
    if scheme is Scheme.JR:
        return jr_optimize(real, config.jr, rng).objective
    raise ConfigError([f"schemes: unsupported scheme {scheme!r}"])


def block_gains(config: SystemConfig, point: int, block: int, n: int, schemes: Sequence[Scheme]):
    real = block_realization(config, point, block, n)
    return real, {s: scheme_gains(config, real, s, point, block) for s in schemes}


def _parse_schemes(names) -> list[Scheme]:
    problems, out = [], []
    for i, name in enumerate(names):
        try:
            out.append(Scheme.parse(name))
        except ValueError as exc:
            problems.append(f"schemes[{i}]: {exc}")
    if problems:
        raise ConfigError(problems)
    return out


def _thread_count(threads: Optional[int]) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    return max(1, threads)


def _count_outages(config, point, block, n, schemes, snr):
    _, gains = block_gains(config, point, block, n, schemes)
    counts = {}
    for s, g in gains.items():
        rates = np.log2(1.0 + g * snr)
        counts[s] = int(np.count_nonzero(rates < config.r0))
    return counts


def _outage_counts(config: SystemConfig, schemes, threads, points=None):
    points = range(len(config.gain_sweep)) if points is None else points
    tasks = [(p, b, n) for p in points for b, n in _block_ranges(config.trials)]
    results = {}

    def work(task):
        p, b, n = task
        return task, _count_outages(config, p, b, n, schemes, config.snr(config.gain_sweep[p]))

    workers = _thread_count(threads)
    if workers == 1:
        done = map(work, tasks)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        done = pool.map(work, tasks)
    for i, (task, counts) in enumerate(done):
        results[task] = counts
        if (i + 1) % 50 == 0:
            log.info("%d/%d blocks done", i + 1, len(tasks))
    if workers > 1:
        pool.shutdown()

    totals = {(p, s): 0 for p in points for s in schemes}
    for (p, _, _), counts in results.items():
        for s, c in counts.items():
            totals[p, s] += c
    return totals


def estimate_op(config: SystemConfig, scheme, point: int, threads: Optional[int] = None):
    """Outage estimate and Wilson 95% halfwidth for one scheme at one sweep point."""
    s = _parse_schemes([scheme])[0]
    totals = _outage_counts(config, [s], threads, points=[point])
    return wilson_interval(totals[point, s], config.trials)


def analytical_overlays(config: SystemConfig) -> dict:
    """Closed-form SU and OR outage plus the sampled IR bound, keyed by scheme.

    Only defined for a fixed geometry with independent element fading.
    """
    if config.correlation != "independent":
        return {}
    fading = config.fixed_fading()
    if fading is None:
        log.info("users are redrawn per trial; analytical overlays skipped")
        return {}
    inputs = analysis.LinkMomentInputs(fading, config.topology.elements_per_surface)
    fits = analysis.fit_users(inputs)
    snr = np.array([config.snr(g) for g in config.gain_sweep])
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed, spawn_key=(2,))))
    ir, ir_se = analysis.outage_ir_upper_bound(fits, config.r0, snr, config.oracle_samples, rng, return_se=True)
    return {
        Scheme.SU: (np.atleast_1d(analysis.outage_su(fits[0], config.r0, snr)), None),
        Scheme.OR: (np.atleast_1d(analysis.outage_or(fits, config.r0, snr)), None),
        Scheme.IR: (np.atleast_1d(ir), np.atleast_1d(ir_se)),
    }


def run_sweep(config: SystemConfig, threads: Optional[int] = None) -> list[OutageCurve]:
    """Outage curves of every configured scheme over the power sweep."""
    schemes = _parse_schemes(config.schemes)
    totals = _outage_counts(config, schemes, threads)
    overlays = analytical_overlays(config) if config.analytical else {}
    curves = []
    for s in schemes:
        curve = OutageCurve(scheme=s.value)
        for p, g in enumerate(config.gain_sweep):
            est, half = wilson_interval(totals[p, s], config.trials)
            curve.points.append(OutagePoint(g, est, half, config.trials, totals[p, s]))
        if s in overlays:
            vals, se = overlays[s]
            curve.analytical = [(g, float(v)) for g, v in zip(config.gain_sweep, vals)]
            if se is not None:
                curve.analytical_se = [float(x) for x in se]
        curves.append(curve)
    return curves


def timing_bench(config: SystemConfig, schemes, realizations: int = 100) -> list[tuple[str, float]]:
    """Mean wall-clock milliseconds per single realization, per scheme.

    Absolute numbers are machine dependent; only the ordering is meaningful.
    """
    parsed = _parse_schemes(schemes)
    if not parsed:
        return []
    realizations = max(realizations, 100)
    reals = []
    for i in range(realizations):
        rng = block_stream(config.seed, 0, i, _CHANNEL_KEY)
        fading = config.fixed_fading() or config.fading_for(config.topology.draw_user_positions(rng))
        reals.append(realize(config.topology, fading, config.correlation, rng))
    table = []
    for s in parsed:
        rng = block_stream(config.seed, 0, 0, _SCHEME_KEYS[s])
        start = time.perf_counter()
        for real in reals:
            _single_run(config, s, real, rng)
        elapsed = time.perf_counter() - start
        table.append((s.value, 1000.0 * elapsed / len(reals)))
    return table


def _single_run(config, scheme, real, rng):
    if scheme is Scheme.IR:
        return sch.run_ir(real)
    if scheme is Scheme.SU:
        return sch.run_su(real)
    if scheme is Scheme.OR:
        return sch.run_or(real)
    if scheme is Scheme.OMUR:
        return sch.run_omur(real)
    if scheme is Scheme.OMUR_RP:
        return sch.run_omur_rp(real, rng)
    if scheme is Scheme.OPPBF:
        return sch.run_oppbf(real, rng)
    return jr_optimize(real, config.jr, rng)

"""Outage analysis via a moment-matched Gamma model of the per-user E2E magnitude.

The aligned magnitude ``A_k = sum_m |f_m||g_km| + |d_k|`` is approximated by
``Gamma(alpha_k, rate beta_k)`` whose first two moments equal those of A_k.
Outage of the single-user and opportunistic schemes then follows in closed
form; the ideal-reflection bound needs the CDF of a product of squared Gamma
variates, which is estimated by sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import FadingTables, NakagamiParams
from .errors import ConfigError, ParameterError
from .specfun import gamma_ratio, gammainc_lower


@dataclass(frozen=True)
class GammaFit:
    alpha: float
    beta: float
    mu1: float
    mu2: float

    @classmethod
    def from_moments(cls, mu1: float, mu2: float) -> "GammaFit":
        var = mu2 - mu1 * mu1
        if not var > 0:
            raise ParameterError(f"moment matching needs positive variance (mu1={mu1}, mu2={mu2})")
        return cls(alpha=mu1 * mu1 / var, beta=mu1 / var, mu1=mu1, mu2=mu2)

    @property
    def mean(self) -> float:
        return self.alpha / self.beta

    @property
    def variance(self) -> float:
        return self.alpha / self.beta**2


@dataclass
class LinkMomentInputs:
    """Per-link Nakagami tables plus element counts, for a fixed geometry."""

    fading: FadingTables
    elements_per_surface: Sequence[int]

    def __post_init__(self):
        self.elements_per_surface = tuple(int(n) for n in self.elements_per_surface)
        S = len(self.elements_per_surface)
        K = self.fading.m_d.shape[-1]
        if self.fading.m_d.ndim != 1:
            raise ConfigError(["moment inputs need a single fixed geometry, not per-trial tables"])
        if self.fading.m_g.shape != (S, K) or self.fading.m_f.shape != (S,):
            raise ConfigError([f"moment inputs do not cover {S} surfaces and {K} users"])

    @property
    def num_users(self) -> int:
        return self.fading.m_d.shape[-1]


def u_term(g: NakagamiParams, f: NakagamiParams, a: int) -> float:
    """``E[(|g||f|)^a]`` of one reflected path, for ``a`` in {1, 2}."""
    if a not in (1, 2):
        raise ParameterError(f"a must be 1 or 2, got {a}")
    scale = math.sqrt(g.m / g.omega * f.m / f.omega) ** (-a)
    return scale * gamma_ratio(g.m, a / 2) * gamma_ratio(f.m, a / 2)


def moments_ak(inputs: LinkMomentInputs, user: int) -> tuple[float, float]:
    """First and second moment of user ``user``'s aligned magnitude A_k.

    The second moment keeps the direct/reflected cross term, the
    within-surface element pairs and the cross-surface element pairs apart,
    as in the displayed expansion.
    """
    fad = inputs.fading
    d = fad.direct(user)
    ed = gamma_ratio(d.m, 0.5) * (d.m / d.omega) ** -0.5
    u1 = []
    u2 = []
    for s, n in enumerate(inputs.elements_per_surface):
        g, f = fad.ris_user(s, user), fad.ris_bs(s)
        u1.append([u_term(g, f, 1)] * n)
        u2.append([u_term(g, f, 2)] * n)

    ris1 = sum(sum(row) for row in u1)
    mu1 = ed + ris1

    within = 0.0
    for row1, row2 in zip(u1, u2):
        pair = 0.0
        for i, ui in enumerate(row1):
            pair += ui * sum(row1[i + 1:])
        within += sum(row2) + 2.0 * pair
    cross = 0.0
    for s, row in enumerate(u1):
        later = sum(sum(r) for r in u1[s + 1:])
        cross += sum(row) * later
    mu2 = d.omega + 2.0 * ed * ris1 + within + 2.0 * cross
    return mu1, mu2


def fit_users(inputs: LinkMomentInputs) -> list[GammaFit]:
    return [GammaFit.from_moments(*moments_ak(inputs, k)) for k in range(inputs.num_users)]


def cdf_ak(fit: GammaFit, x):
    """Gamma-approximated CDF of A_k."""
    if np.any(np.asarray(x) < 0):
        raise ParameterError("CDF argument must be non-negative")
    return gammainc_lower(fit.alpha, fit.beta * np.asarray(x, dtype=float))


def _threshold(r0: float, snr_bar):
    gamma0 = 2.0**r0 - 1.0
    return gamma0, np.sqrt(gamma0 / np.asarray(snr_bar, dtype=float))


def outage_su(fit: GammaFit, r0: float, snr_bar):
    """``P{log2(1 + A^2 snr_bar) < r0}`` under the Gamma model."""
    _, x = _threshold(r0, snr_bar)
    return cdf_ak(fit, x)


def outage_or(fits: Sequence[GammaFit], r0: float, snr_bar):
    """Opportunistic reflection outage: product of the per-user CDFs."""
    if len(fits) == 0:
        raise ConfigError(["outage_or needs at least one user fit"])
    out = outage_su(fits[0], r0, snr_bar)
    for fit in fits[1:]:
        out = out * outage_su(fit, r0, snr_bar)
    return out


def gen_gamma_pdf(fit: GammaFit, x):
    """Density of ``A_k^2`` when ``A_k ~ Gamma(alpha, rate beta)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ParameterError("generalized Gamma density is defined for x > 0")
    a, b = fit.alpha, fit.beta
    r = np.sqrt(x)
    log_pdf = a * math.log(b) - math.lgamma(a) + (a - 1) * np.log(r) - b * r - np.log(2 * r)
    return np.exp(log_pdf)


def _product_cdf_log(fits, log_x, samples, rng):
    log_x = np.asarray(log_x, dtype=float)
    log_y = np.zeros(samples)
    for fit in fits:
        # log(gamma_k) = 2 log(A_k); stays finite where Y itself would underflow
        log_y += 2.0 * np.log(rng.gamma(fit.alpha, 1.0 / fit.beta, samples))
    log_y.sort()
    p = np.searchsorted(log_y, log_x, side="right") / samples
    se = np.sqrt(p * (1 - p) / samples)
    if p.ndim == 0:
        return float(p), float(se)
    return p, se


def cdf_product_oracle(fits: Sequence[GammaFit], x, samples: int, rng: np.random.Generator):
    """Sampled ``P(prod_k A_k^2 <= x)`` and its binomial standard error.

    ``x`` may be an array; all points share the same samples.
    """
    if samples < 10_000:
        raise ParameterError("the product-CDF oracle needs at least 1e4 samples")
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        log_x = np.log(x)
    return _product_cdf_log(fits, log_x, samples, rng)


def outage_ir_upper_bound(
    fits: Sequence[GammaFit],
    r0: float,
    snr_bar,
    samples: int,
    rng: np.random.Generator,
    return_se: bool = False,
):
    """Ideal-reflection outage bound ``F_Y((gamma0 / (K snr_bar))^K)``.

    Follows from ``sum_k gamma_k >= K (prod_k gamma_k)^(1/K)``; evaluated in
    the log domain since ``Y`` underflows for many users.
    """
    if len(fits) == 0:
        raise ConfigError(["outage_ir_upper_bound needs at least one user fit"])
    if samples < 10_000:
        raise ParameterError("the product-CDF oracle needs at least 1e4 samples")
    K = len(fits)
    gamma0 = 2.0**r0 - 1.0
    with np.errstate(divide="ignore"):
        log_x = K * np.log(gamma0 / (K * np.asarray(snr_bar, dtype=float)))
    p, se = _product_cdf_log(fits, log_x, samples, rng)
    return (p, se) if return_se else p

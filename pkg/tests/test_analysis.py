import math

import numpy as np
import pytest
from scipy import integrate, stats

from omur.analysis import (
    GammaFit,
    LinkMomentInputs,
    cdf_ak,
    cdf_product_oracle,
    fit_users,
    gen_gamma_pdf,
    moments_ak,
    outage_ir_upper_bound,
    outage_or,
    outage_su,
    u_term,
)
from omur.channel import FadingTables, NakagamiParams, Topology, geometric_fading, realize
from omur.errors import ConfigError, ParameterError
from omur.schemes import coherent_magnitudes


@pytest.fixture
def rng():
    return np.random.default_rng(4242)


def desk_inputs(seed=3):
    topo = Topology(num_users=4, num_surfaces=2, elements_per_surface=(8, 8))
    pos = topo.draw_user_positions(np.random.default_rng(seed))
    return topo, LinkMomentInputs(geometric_fading(topo, pos, m=2.5), topo.elements_per_surface)


def test_gamma_fit_round_trip():
    for mu1, mu2 in [(1.0, 1.5), (3e-6, 1e-11), (2.0, 4.0 + 1e-3)]:
        fit = GammaFit.from_moments(mu1, mu2)
        assert fit.mean == pytest.approx(mu1, rel=1e-12)
        assert fit.variance == pytest.approx(mu2 - mu1**2, rel=1e-12)
    with pytest.raises(ParameterError):
        GammaFit.from_moments(1.0, 1.0)


def test_u_term_identities(rng):
    g, f = NakagamiParams(2.5, 3.0), NakagamiParams(0.7, 0.2)
    assert u_term(g, f, 2) == pytest.approx(0.6, rel=1e-13)
    one = NakagamiParams(1.0, 1.0)
    assert u_term(one, one, 1) == pytest.approx(math.pi / 4, rel=1e-13)
    assert math.gamma(1.5) ** 2 == pytest.approx(math.pi / 4, rel=1e-15)
    with pytest.raises(ParameterError):
        u_term(g, f, 3)


def test_u_term_monte_carlo(rng):
    g, f = NakagamiParams(2.5, 3.0), NakagamiParams(1.3, 0.2)
    n = 1_000_000
    xg = np.sqrt(rng.gamma(g.m, g.omega / g.m, n))
    xf = np.sqrt(rng.gamma(f.m, f.omega / f.m, n))
    prod = xg * xf
    assert abs(prod.mean() - u_term(g, f, 1)) < 4 * prod.std() / math.sqrt(n)


def test_moments_no_ris():
    fad = FadingTables.uniform(2, 0, m=2.5, omega_d=np.array([2.0, 0.5]))
    inputs = LinkMomentInputs(fad, ())
    mu1, mu2 = moments_ak(inputs, 0)
    assert mu1 == pytest.approx(NakagamiParams(2.5, 2.0).mean(), rel=1e-13)
    assert mu2 == 2.0


def test_moments_single_element_expansion():
    d, g, f = NakagamiParams(1.7, 0.4), NakagamiParams(2.5, 3.0), NakagamiParams(0.9, 0.6)
    fad = FadingTables([d.m], [d.omega], [[g.m]], [[g.omega]], [f.m], [f.omega])
    mu1, mu2 = moments_ak(LinkMomentInputs(fad, (1,)), 0)
    ed, u1, u2 = d.mean(), u_term(g, f, 1), u_term(g, f, 2)
    # E[(|f||g| + |d|)^2] expanded by hand
    assert mu1 == pytest.approx(ed + u1, rel=1e-13)
    assert mu2 == pytest.approx(d.omega + 2 * ed * u1 + u2, rel=1e-13)


def brute_force_moments(inputs, k):
    """All element pairs enumerated explicitly, no per-surface grouping."""
    fad = inputs.fading
    ed = fad.direct(k).mean()
    per_elem = []
    for s, n in enumerate(inputs.elements_per_surface):
        per_elem += [(u_term(fad.ris_user(s, k), fad.ris_bs(s), 1), u_term(fad.ris_user(s, k), fad.ris_bs(s), 2))] * n
    mu1 = ed + sum(u1 for u1, _ in per_elem)
    mu2 = fad.direct(k).omega + 2 * ed * sum(u1 for u1, _ in per_elem)
    for i, (u1i, u2i) in enumerate(per_elem):
        mu2 += u2i
        for j, (u1j, _) in enumerate(per_elem):
            if j != i:
                mu2 += u1i * u1j
    return mu1, mu2


def test_moments_match_pairwise_enumeration():
    _, inputs = desk_inputs()
    for k in range(4):
        mu1, mu2 = moments_ak(inputs, k)
        b1, b2 = brute_force_moments(inputs, k)
        assert mu1 == pytest.approx(b1, rel=1e-12)
        assert mu2 == pytest.approx(b2, rel=1e-12)


def test_moments_match_monte_carlo():
    topo, inputs = desk_inputs()
    rng = np.random.default_rng(8)
    a = np.concatenate([coherent_magnitudes(realize(topo, inputs.fading, rng=rng, size=100_000)) for _ in range(10)])
    for k in range(4):
        mu1, mu2 = moments_ak(inputs, k)
        x = a[:, k]
        assert abs(x.mean() - mu1) < 4 * x.std() / math.sqrt(x.size)
        x2 = x**2
        assert abs(x2.mean() - mu2) < 4 * x2.std() / math.sqrt(x2.size)


def test_moment_inputs_validation():
    fad = FadingTables.uniform(2, 1)
    with pytest.raises(ConfigError):
        LinkMomentInputs(fad, (3, 3))


def test_cdf_ak_basics():
    fit = GammaFit(alpha=1.0, beta=2.0, mu1=0.5, mu2=0.5)
    assert cdf_ak(fit, 0.0) == 0.0
    assert cdf_ak(fit, 0.5) == pytest.approx(1 - math.exp(-1), abs=1e-14)
    with pytest.raises(ParameterError):
        cdf_ak(fit, -1.0)
    fit = GammaFit(2.5, 1.3, 0, 0)
    dens = lambda t: stats.gamma.pdf(t, 2.5, scale=1 / 1.3)
    assert cdf_ak(fit, 2.0) == pytest.approx(integrate.quad(dens, 0, 2.0, epsabs=1e-13)[0], abs=1e-8)
    grid = np.linspace(0, 20, 100)
    vals = cdf_ak(fit, grid)
    assert np.all(np.diff(vals) >= 0) and np.all((vals >= 0) & (vals <= 1))


def test_outage_su_limits():
    fit = GammaFit(3.0, 2.0, 1.5, 3.0)
    assert outage_su(fit, 2.0, 1e12) < 1e-12
    assert outage_su(fit, 1e-12, 1.0) < 1e-12
    # threshold sqrt(gamma0 / snr)
    assert outage_su(fit, 1.0, 4.0) == pytest.approx(cdf_ak(fit, 0.5))


def test_outage_or():
    fits = [GammaFit(3.0, 2.0, 0, 0), GammaFit(1.5, 0.7, 0, 0), GammaFit(9.0, 5.0, 0, 0)]
    snr = np.logspace(-1, 2, 9)
    assert np.array_equal(outage_or(fits[:1], 2.0, snr), outage_su(fits[0], 2.0, snr))
    assert np.allclose(outage_or([fits[1]] * 4, 2.0, snr), outage_su(fits[1], 2.0, snr) ** 4, rtol=1e-14)
    prod = outage_su(fits[0], 2.0, snr) * outage_su(fits[1], 2.0, snr) * outage_su(fits[2], 2.0, snr)
    assert np.allclose(outage_or(fits, 2.0, snr), prod, rtol=1e-14)
    with pytest.raises(ConfigError):
        outage_or([], 2.0, 1.0)


def test_gen_gamma_pdf_normalized_and_derivative():
    fit = GammaFit(2.7, 1.9, 0, 0)
    total = integrate.quad(lambda x: gen_gamma_pdf(fit, x), 0, np.inf, limit=200)[0]
    assert total == pytest.approx(1.0, abs=1e-6)
    h = 1e-6
    for x in np.linspace(0.05, 8, 20):
        fd = (cdf_ak(fit, math.sqrt(x + h)) - cdf_ak(fit, math.sqrt(x - h))) / (2 * h)
        assert gen_gamma_pdf(fit, x) == pytest.approx(fd, abs=1e-5)
    with pytest.raises(ParameterError):
        gen_gamma_pdf(fit, 0.0)


def test_gen_gamma_pdf_sampling(rng):
    fit = GammaFit(2.7, 1.9, 0, 0)
    y = rng.gamma(fit.alpha, 1 / fit.beta, 100_000) ** 2
    edges = np.quantile(y, np.linspace(0, 1, 31))
    edges[0], edges[-1] = 1e-12, y.max() * 10
    expected = np.array([integrate.quad(lambda x: gen_gamma_pdf(fit, x), a, b, limit=200)[0] for a, b in zip(edges[:-1], edges[1:])])
    observed = np.histogram(y, edges)[0]
    chi2 = ((observed - expected * y.size) ** 2 / (expected * y.size)).sum()
    assert chi2 < stats.chi2.ppf(0.99, len(observed) - 1)


def test_product_oracle_single_user(rng):
    fit = GammaFit(2.2, 1.4, 0, 0)
    for x in (0.3, 1.0, 4.0):
        p, se = cdf_product_oracle([fit], x, 200_000, rng)
        assert abs(p - cdf_ak(fit, math.sqrt(x))) < 4 * se
    p, _ = cdf_product_oracle([fit, fit], 1e300, 10_000, rng)
    assert p == 1.0
    with pytest.raises(ParameterError):
        cdf_product_oracle([fit], 1.0, 100, rng)


def test_product_oracle_two_exponentials(rng):
    f1, f2 = GammaFit(1.0, 1.0, 0, 0), GammaFit(1.0, 2.5, 0, 0)
    x = 0.8

    # P(A1^2 A2^2 <= x) = int P(A2 <= sqrt(x)/a) dF(a), nested quadrature
    def inner(a):
        return stats.expon.pdf(a) * (1 - math.exp(-2.5 * math.sqrt(x) / a))

    exact = integrate.quad(inner, 0, np.inf, limit=200)[0]
    p, se = cdf_product_oracle([f1, f2], x, 400_000, rng)
    assert abs(p - exact) < 4 * se


def test_ir_bound_properties(rng):
    fit = GammaFit(4.0, 3.0, 0, 0)
    snr = np.logspace(-1, 2, 12)
    single = outage_ir_upper_bound([fit], 1.5, snr, 400_000, np.random.default_rng(1))
    assert np.allclose(single, outage_su(fit, 1.5, snr), atol=4 * 0.5 / math.sqrt(400_000))
    fits = [fit, GammaFit(2.0, 1.0, 0, 0), GammaFit(6.0, 2.0, 0, 0)]
    vals = outage_ir_upper_bound(fits, 1.5, snr, 100_000, rng)
    assert np.all(np.diff(vals) <= 0)
    # many users: the product underflows but the log-domain bound is still defined
    many = outage_ir_upper_bound([GammaFit(10.0, 1e7, 0, 0)] * 40, 2.0, 1e12, 20_000, rng)
    assert 0.0 <= many <= 1.0


def test_desk_fits_have_positive_variance():
    _, inputs = desk_inputs()
    for fit in fit_users(inputs):
        assert fit.alpha > 0 and fit.beta > 0

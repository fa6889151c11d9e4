import math

import numpy as np
import pytest
from scipy import stats

from omur.channel import (
    PER_SURFACE_FULL,
    FadingTables,
    NakagamiParams,
    Topology,
    geometric_fading,
    los_pathloss_db,
    realize,
    sample_nakagami,
    umi_pathloss_db,
)
from omur.errors import ConfigError, ParameterError

# direct formula evaluations, frozen
UMI_2GHZ_300M = -22.7 - 26 * math.log10(2) - 36.7 * math.log10(300)
LOS_60M = -30 - 20 * math.log10(60)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.mark.parametrize("m,omega", [(0.4, 1.0), (1.0, 0.0), (2.0, -1.0)])
def test_nakagami_params_domain(m, omega):
    with pytest.raises(ParameterError):
        NakagamiParams(m, omega)


def test_rayleigh_special_case_ks(rng):
    x = sample_nakagami(NakagamiParams(1.0, 1.0), rng, 100_000)
    # Rayleigh with E[X^2] = 1 has scale 1/sqrt(2)
    res = stats.kstest(x, stats.rayleigh(scale=1 / math.sqrt(2)).cdf)
    assert res.pvalue > 0.01


@pytest.mark.parametrize("m,omega", [(0.5, 1.0), (1.0, 3.0), (2.5, 2.0), (7.3, 1e-12)])
def test_second_moment_is_omega(rng, m, omega):
    x2 = sample_nakagami(NakagamiParams(m, omega), rng, 1_000_000) ** 2
    se = x2.std() / math.sqrt(x2.size)
    assert abs(x2.mean() - omega) < 4 * se


def test_first_moment_noninteger_shape(rng):
    target = math.gamma(3) / math.gamma(2.5) * (2.5 / 2) ** -0.5
    x = sample_nakagami(NakagamiParams(2.5, 2.0), rng, 1_000_000)
    se = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - target) < 4 * se
    assert NakagamiParams(2.5, 2.0).mean() == pytest.approx(target, rel=1e-13)


@pytest.mark.parametrize("m,omega", [(1.0, 1.0), (2.5, 0.7), (0.8, 4.0)])
def test_empirical_cdf_matches_analytical(rng, m, omega):
    p = NakagamiParams(m, omega)
    x = sample_nakagami(p, rng, 100_000)
    res = stats.kstest(x, p.cdf)
    assert res.pvalue > 0.01
    qs = np.quantile(x, np.linspace(0.025, 0.975, 20))
    # DKW bound at alpha = 0.01
    eps = math.sqrt(math.log(2 / 0.01) / (2 * x.size))
    assert np.max(np.abs(p.cdf(qs) - np.linspace(0.025, 0.975, 20))) < eps


def test_umi_pathloss():
    assert umi_pathloss_db(1.0, 1.0) == pytest.approx(-22.7, abs=1e-12)
    assert umi_pathloss_db(2.0, 300.0) == pytest.approx(UMI_2GHZ_300M, abs=1e-12)
    assert UMI_2GHZ_300M == pytest.approx(-121.437130, abs=1e-6)
    for fc in (0.9, 2.0, 28.0):
        step = umi_pathloss_db(fc, 200.0) - umi_pathloss_db(fc, 100.0)
        assert step == pytest.approx(-36.7 * math.log10(2), abs=1e-12)
    with pytest.raises(ParameterError):
        umi_pathloss_db(2.0, 0.5)


def test_los_pathloss():
    assert los_pathloss_db(1.0, -30.0, 2.0) == -30.0
    assert los_pathloss_db(60.0, -30.0, 2.0) == pytest.approx(LOS_60M, abs=1e-12)
    assert LOS_60M == pytest.approx(-65.563025, abs=1e-6)
    assert np.all(los_pathloss_db(np.array([1.0, 10.0, 500.0]), -12.0, 0.0) == -12.0)
    with pytest.raises(ParameterError):
        los_pathloss_db(0.99, -30.0, 2.0)


def test_topology_validation():
    with pytest.raises(ConfigError):
        Topology(num_users=0)
    with pytest.raises(ConfigError):
        Topology(num_surfaces=2, elements_per_surface=(4,))
    t = Topology(num_surfaces=3, elements_per_surface=5)
    assert t.num_elements == 15
    assert list(t.surface_of_element) == [0] * 5 + [1] * 5 + [2] * 5
    t0 = Topology(num_surfaces=0, elements_per_surface=())
    assert t0.num_elements == 0


def test_surfaces_on_circle():
    t = Topology(num_surfaces=4, elements_per_surface=1)
    pos = t.surface_positions()
    assert np.allclose(np.linalg.norm(pos, axis=1), 60.0)
    assert np.allclose(pos[0], [60.0, 0.0])
    assert np.allclose(pos[1], [0.0, 60.0], atol=1e-12)


def test_user_positions_inside_cell(rng):
    t = Topology()
    pos = t.draw_user_positions(rng, size=1000)
    assert pos.shape == (1000, 4, 2)
    assert np.all(np.linalg.norm(pos, axis=-1) <= t.cell_radius)


def test_no_ris_degenerate(rng):
    t = Topology(num_users=3, num_surfaces=0, elements_per_surface=())
    real = realize(t, FadingTables.uniform(3, 0), rng=rng)
    assert real.f.shape == (0,)
    assert real.G.shape == (0, 3)
    assert real.d.shape == (3,)
    assert np.all(np.abs(real.d) > 0)


def test_full_correlation_shares_draws(rng):
    t = Topology(num_users=3, num_surfaces=1, elements_per_surface=100)
    real = realize(t, FadingTables.uniform(3, 1), PER_SURFACE_FULL, rng)
    assert np.all(real.f == real.f[0])
    for k in range(3):
        assert np.all(real.G[:, k] == real.G[0, k])


def test_full_correlation_per_surface(rng):
    t = Topology(num_users=2, num_surfaces=2, elements_per_surface=(3, 4))
    real = realize(t, FadingTables.uniform(2, 2), PER_SURFACE_FULL, rng)
    assert np.all(real.f[:3] == real.f[0]) and np.all(real.f[3:] == real.f[3])
    assert real.f[0] != real.f[3]


def test_independent_elements_uncorrelated(rng):
    t = Topology(num_users=1, num_surfaces=1, elements_per_surface=2)
    real = realize(t, FadingTables.uniform(1, 1), rng=rng, size=10_000)
    r = np.corrcoef(np.abs(real.f[:, 0]), np.abs(real.f[:, 1]))[0, 1]
    assert abs(r) < 0.05


def test_realization_shapes_and_phases(rng):
    t = Topology(num_users=4, num_surfaces=2, elements_per_surface=(16, 16))
    fad = geometric_fading(t, t.draw_user_positions(rng))
    real = realize(t, fad, rng=rng, size=7)
    assert real.f.shape == (7, 32) and real.G.shape == (7, 32, 4) and real.d.shape == (7, 4)
    # phases look uniform: mean resultant length small
    ph = np.angle(real.G).ravel()
    assert abs(np.mean(np.exp(1j * ph))) < 0.05


def test_realize_is_pure_given_seed():
    t = Topology()
    fad = geometric_fading(t, np.array([[100.0, 0], [0, 50], [-20, -30], [250, 10]]))
    a = realize(t, fad, rng=np.random.default_rng(5), size=3)
    b = realize(t, fad, rng=np.random.default_rng(5), size=3)
    assert np.array_equal(a.f, b.f) and np.array_equal(a.G, b.G) and np.array_equal(a.d, b.d)


def test_missing_fading_entry(rng):
    t = Topology(num_users=4, num_surfaces=2, elements_per_surface=(2, 2))
    with pytest.raises(ConfigError):
        realize(t, FadingTables.uniform(3, 2), rng=rng)


def test_no_nans_over_many_draws(rng):
    t = Topology()
    fad = geometric_fading(t, t.draw_user_positions(rng, size=8000))
    real = realize(t, fad, rng=rng, size=8000)
    # 8000 trials x (32*4 + 32 + 4) magnitudes > 1e6 draws
    for arr in (real.f, real.G, real.d):
        assert np.all(np.isfinite(arr))


def test_geometric_fading_clamps_reference_distance():
    t = Topology(num_users=2)
    fad = geometric_fading(t, np.array([[0.0, 0.0], [60.0, 0.0]]))
    # a user on top of the BS or a surface sees the 1 m reference gain
    assert fad.omega_d[0] == pytest.approx(10 ** (umi_pathloss_db(2.0, 1.0) / 10))
    assert fad.omega_g[0, 1] == pytest.approx(10 ** (umi_pathloss_db(2.0, 1.0) / 10))

import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from levy_particles.core.exceptions import DimensionError, ValidationError
from levy_particles.schemas import SpectralMode, StableParams
from levy_particles.services.stable_noise import (
    INIT_LANE,
    NoiseStream,
    StableNoise,
    box_muller,
    cf_check_grid,
    characteristic_exponent,
    cms_symmetric,
    empirical_cf,
    increments_from_uniforms,
    kanter_positive,
    lattice_increments,
    sample_increment,
    sample_increments,
    uniforms_per_step,
)


def test_uniforms_per_step():
    assert uniforms_per_step(StableParams(dim=3, spectral_mode=SpectralMode.PER_AXIS)) == 6
    assert uniforms_per_step(StableParams(dim=1)) == 4
    assert uniforms_per_step(StableParams(dim=3)) == 6


def test_uniforms_lie_in_open_interval():
    u = NoiseStream(5, 0).uniforms(0, 1000, 7)
    assert u.shape == (1000, 7)
    assert np.all(u > 0.0) and np.all(u < 1.0)


def test_increment_is_pure_function_of_seed_particle_step():
    params = StableParams(dim=2)
    first = sample_increment(params, 0.1, NoiseStream(42, 3), step=17)
    second = sample_increment(params, 0.1, NoiseStream(42, 3), step=17)
    np.testing.assert_array_equal(first, second)

    other_particle = sample_increment(params, 0.1, NoiseStream(42, 4), step=17)
    other_seed = sample_increment(params, 0.1, NoiseStream(43, 3), step=17)
    assert not np.array_equal(first, other_particle)
    assert not np.array_equal(first, other_seed)


@pytest.mark.parametrize("mode", list(SpectralMode))
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_steps_are_counter_addressable(mode, dim):
    params = StableParams(dim=dim, spectral_mode=mode)
    stream = NoiseStream(9, 1)
    block = sample_increments(params, 0.25, stream, 0, 12)
    for k in (0, 5, 11):
        np.testing.assert_array_equal(block[k], sample_increment(params, 0.25, stream, step=k))
    np.testing.assert_array_equal(block[4:9], sample_increments(params, 0.25, stream, 4, 5))


def test_lattice_increments_match_per_particle_streams():
    params = StableParams(dim=2)
    ids = [3, 0, 7]
    lattice = lattice_increments(params, 0.5, 11, ids, 6)
    assert lattice.shape == (6, 3, 2)
    for i, pid in enumerate(ids):
        np.testing.assert_array_equal(lattice[:, i], sample_increments(params, 0.5, NoiseStream(11, pid), 0, 6))


def test_initial_lane_is_independent_of_noise_lane():
    stream = NoiseStream(1, 0)
    assert not np.array_equal(stream.uniforms(0, 1, 4), stream.uniforms(0, 1, 4, lane=INIT_LANE))


def test_nonpositive_dt_rejected():
    with pytest.raises(ValidationError):
        sample_increment(StableParams(), 0.0, NoiseStream(0, 0))


def test_characteristic_exponent():
    iso = StableParams(dim=2, alpha=1.5, scale=2.0)
    assert characteristic_exponent(iso, [3.0, 4.0]) == pytest.approx(2.0 * 5.0 ** 1.5)
    axis = StableParams(dim=2, alpha=1.5, spectral_mode=SpectralMode.PER_AXIS)
    assert characteristic_exponent(axis, [3.0, 4.0]) == pytest.approx(3.0 ** 1.5 + 4.0 ** 1.5)
    with pytest.raises(DimensionError):
        characteristic_exponent(iso, [1.0])


def test_cms_angle_flip_negates_sample():
    rng = np.random.default_rng(0)
    u = rng.uniform(size=1000)
    w = rng.uniform(size=1000)
    np.testing.assert_allclose(cms_symmetric(1.5, 1.0 - u, w), -cms_symmetric(1.5, u, w), rtol=1e-9, atol=1e-12)


def test_cms_at_alpha_near_two_is_gaussian_like():
    rng = np.random.default_rng(1)
    x = cms_symmetric(1.999, rng.uniform(size=200_000), rng.uniform(size=200_000))
    # exp(-|t|^2) is the law of N(0, 2)
    assert np.mean(np.cos(x)) == pytest.approx(math.exp(-1.0), abs=0.01)


def test_kanter_laplace_transform():
    rng = np.random.default_rng(2)
    a = 0.75
    s = kanter_positive(a, rng.uniform(size=200_000), rng.uniform(size=200_000))
    assert np.all(s > 0.0)
    for lam in (0.5, 1.0, 2.0):
        assert np.mean(np.exp(-lam * s)) == pytest.approx(math.exp(-lam ** a), abs=0.005)


def test_box_muller_moments():
    rng = np.random.default_rng(3)
    z = box_muller(rng.uniform(size=100_000), rng.uniform(size=100_000)).reshape(-1)
    assert np.mean(z) == pytest.approx(0.0, abs=0.01)
    assert np.var(z) == pytest.approx(1.0, abs=0.02)


def test_increments_shape_for_odd_dim():
    params = StableParams(dim=3)
    u = np.random.default_rng(4).uniform(size=(5, 2, uniforms_per_step(params)))
    assert increments_from_uniforms(params, 0.1, u).shape == (5, 2, 3)


def test_empirical_cf_errors():
    with pytest.raises(ValidationError, match="empty sample set"):
        empirical_cf(np.empty((0, 2)), [1.0, 0.0])
    with pytest.raises(DimensionError):
        empirical_cf(np.zeros((3, 2)), [1.0])


def test_cf_check_grid():
    grid = cf_check_grid(StableParams(dim=2))
    assert grid.shape == (8, 2)
    np.testing.assert_allclose(np.linalg.norm(grid, axis=1), [0.25, 0.5, 1.0, 2.0] * 2)


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
@pytest.mark.parametrize(
    "dim,mode",
    [(2, SpectralMode.ISOTROPIC), (2, SpectralMode.PER_AXIS), (1, SpectralMode.ISOTROPIC)],
)
def test_characteristic_function_matches_symbol(alpha, dim, mode):
    samples = 200_000
    params = StableParams(dim=dim, alpha=alpha, spectral_mode=mode)
    x = sample_increments(params, 1.0, NoiseStream(2024, 0), 0, samples)
    worst = max(
        abs(empirical_cf(x, u) - math.exp(-characteristic_exponent(params, u)))
        for u in cf_check_grid(params)
    )
    assert worst <= 3.0 / math.sqrt(samples) + 0.005


@pytest.mark.parametrize("dt", [0.25, 0.0625])
def test_self_similar_scaling(dt):
    params = StableParams(dim=1, alpha=1.5)
    samples = 100_000
    small = sample_increments(params, dt, NoiseStream(77, 0), 0, samples)[:, 0]
    unit = sample_increments(params, 1.0, NoiseStream(77, 1), 0, samples)[:, 0]
    result = stats.ks_2samp(small, dt ** (1.0 / params.alpha) * unit)
    assert result.statistic <= 0.015


@pytest.mark.parametrize("mode", [SpectralMode.ISOTROPIC, SpectralMode.PER_AXIS])
def test_increments_are_symmetric(mode):
    samples = 100_000
    params = StableParams(dim=2, alpha=1.3, spectral_mode=mode)
    x = sample_increments(params, 1.0, NoiseStream(31, 0), 0, samples)
    np.testing.assert_array_less(np.abs(np.mean(np.tanh(x), axis=0)), 4.0 / math.sqrt(samples))


def _abs_stable_cdf(m, alpha):
    # P(|X| <= m) from the characteristic function exp(-|u|^alpha)
    value, _ = integrate.quad(lambda u: math.sin(u * m) / u * math.exp(-u ** alpha), 0.0, 60.0, limit=400)
    return 2.0 / math.pi * value


def test_median_of_absolute_increment_matches_inverted_cf():
    alpha = 1.5
    median = optimize.brentq(lambda m: _abs_stable_cdf(m, alpha) - 0.5, 0.1, 10.0, xtol=1e-10)
    x = sample_increments(StableParams(dim=1, alpha=alpha), 1.0, NoiseStream(99, 0), 0, 200_000)
    assert np.median(np.abs(x[:, 0])) == pytest.approx(median, abs=0.015)


def test_stable_noise_service():
    params = StableParams(dim=2, alpha=1.6)
    noise = StableNoise(params)
    assert noise.width == uniforms_per_step(params)
    assert noise.symbol([3.0, 4.0]) == pytest.approx(5.0 ** 1.6)
    np.testing.assert_array_equal(
        noise.lattice(0.5, 8, [0, 3], 4),
        lattice_increments(params, 0.5, 8, [0, 3], 4),
    )
    samples = 100_000
    x = noise.increments(0.5, NoiseStream(8, 0), 0, samples)
    checks = noise.check_cf(x, 0.5)
    assert len(checks) == 8
    for u, empirical, theoretical in checks:
        assert theoretical == pytest.approx(math.exp(-0.5 * np.linalg.norm(u) ** 1.6))
        assert abs(empirical - theoretical) <= 3.0 / math.sqrt(samples) + 0.005

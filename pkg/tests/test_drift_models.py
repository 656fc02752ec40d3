import math

import numpy as np
import pydantic
import pytest
from scipy import integrate

from levy_particles.core.exceptions import ConfigError, DimensionError, ValidationError
from levy_particles.schemas import DriftKind, DriftSpec, check_drift_regularity
from levy_particles.services.drift_models import (
    DriftModel,
    eval_drift,
    eval_drift_batch,
    interaction_term,
    mollifier_marginal,
    mollify_drift,
    phi_beta,
    verify_admissible,
)
from levy_particles.services.empirical_measure import EmpiricalMeasure


def test_phi_beta_truncates():
    values = phi_beta(np.array([0.25, 4.0, -4.0, 0.0, -0.25]), 0.5)
    np.testing.assert_allclose(values, [0.5, 1.0, -1.0, 0.0, -0.5])


def test_interaction_only_drift():
    spec = DriftSpec(holder_amp=0.0, interaction_amp=1.0)
    mu = EmpiricalMeasure([0.0, 2.0])
    b = eval_drift_batch(spec, np.array([[0.0], [2.0]]), mu)
    np.testing.assert_allclose(b, [[math.tanh(2.0) / 2.0]] * 2)


def test_drift_combines_both_parts():
    spec = DriftSpec(dim=2, beta=0.5, holder_amp=2.0, interaction_amp=0.5)
    mu = EmpiricalMeasure([[1.0, -1.0], [3.0, 0.0]])
    b = eval_drift(spec, [0.25, -9.0], mu)
    expected = [
        2.0 * 0.5 + 0.5 * (math.tanh(1.0) + math.tanh(3.0)) / 2.0,
        2.0 * -1.0 + 0.5 * (math.tanh(-1.0) + math.tanh(0.0)) / 2.0,
    ]
    np.testing.assert_allclose(b, expected)


def test_zero_drift():
    spec = DriftSpec(kind=DriftKind.ZERO, holder_amp=1.0, interaction_amp=1.0)
    assert spec.is_zero and spec.sup_bound == 0.0
    b = eval_drift_batch(spec, np.ones((3, 1)), EmpiricalMeasure(np.ones(3)))
    np.testing.assert_array_equal(b, np.zeros((3, 1)))


def test_interaction_does_not_depend_on_atom_order():
    spec = DriftSpec(interaction_amp=1.0)
    points = np.random.default_rng(0).normal(size=(101, 1))
    shuffled = points[np.random.default_rng(1).permutation(101)]
    np.testing.assert_array_equal(
        interaction_term(spec, EmpiricalMeasure(points)),
        interaction_term(spec, EmpiricalMeasure(shuffled)),
    )


def test_dimension_mismatch():
    spec = DriftSpec(dim=2, holder_amp=1.0)
    with pytest.raises(DimensionError):
        eval_drift(spec, [1.0], EmpiricalMeasure([[0.0, 0.0]]))
    with pytest.raises(DimensionError):
        eval_drift_batch(spec, np.zeros((2, 2)), EmpiricalMeasure([0.0, 0.0]))


def test_mollifier_weights_are_symmetric_probabilities():
    offsets, weights = mollifier_marginal(4, 2, 129)
    assert weights.sum() == pytest.approx(1.0)
    np.testing.assert_array_equal(offsets, -offsets[::-1])
    np.testing.assert_allclose(weights, weights[::-1], rtol=1e-12)
    assert np.all(np.abs(offsets) <= 1.0 / 4)


def test_mollified_drift_matches_quadrature():
    base = DriftSpec(beta=0.75, holder_amp=1.0)
    spec = mollify_drift(base, 8)
    mu = EmpiricalMeasure([0.0])
    n = 8

    def rho(z):
        r2 = (n * z) ** 2
        return math.exp(-1.0 / (1.0 - r2)) if r2 < 1.0 else 0.0

    def integrand(z):
        s = 1.0 - z
        return math.copysign(min(abs(s) ** 0.75, 1.0), s) * rho(z)

    numerator, _ = integrate.quad(integrand, -1.0 / n, 1.0 / n, points=[0.0], limit=200)
    mass, _ = integrate.quad(rho, -1.0 / n, 1.0 / n, limit=200)
    assert eval_drift(spec, [1.0], mu)[0] == pytest.approx(numerator / mass, abs=1e-4)


def test_mollification_leaves_interaction_untouched():
    base = DriftSpec(holder_amp=0.0, interaction_amp=1.0)
    mu = EmpiricalMeasure([0.3, -1.2, 2.0])
    states = np.array([[0.1], [5.0], [-3.0]])
    np.testing.assert_array_equal(
        eval_drift_batch(mollify_drift(base, 4), states, mu),
        eval_drift_batch(base, states, mu),
    )


def test_mollified_drift_converges_to_base():
    base = DriftSpec(beta=0.5, holder_amp=1.0)
    x = np.linspace(-2.0, 2.0, 64).reshape(-1, 1)
    mu = EmpiricalMeasure([0.0])
    exact = eval_drift_batch(base, x, mu)
    levels = (2, 4, 8, 16, 32)
    gaps = [np.max(np.abs(eval_drift_batch(mollify_drift(base, n), x, mu) - exact)) for n in levels]
    for coarse, fine in zip(gaps, gaps[1:]):
        assert fine <= coarse + 1e-6
    for n, gap in zip(levels, gaps):
        assert gap <= 2.0 * base.a * n ** -base.beta + 1e-6
    assert gaps[-1] < 0.5 * gaps[0]


def test_drift_is_bounded_on_random_inputs():
    rng = np.random.default_rng(17)
    spec = DriftSpec(dim=2, beta=0.6, holder_amp=0.7, interaction_amp=0.4)
    worst = 0.0
    for _ in range(100):
        mu = EmpiricalMeasure(rng.standard_t(1.5, size=(int(rng.integers(1, 20)), 2)) * 10.0)
        states = rng.standard_t(1.5, size=(100, 2)) * 10.0
        worst = max(worst, float(np.max(np.abs(eval_drift_batch(spec, states, mu)))))
    assert worst <= spec.a + spec.c + 1e-12


def test_mollify_errors():
    base = DriftSpec(holder_amp=1.0)
    with pytest.raises(ValidationError, match="already mollified"):
        mollify_drift(mollify_drift(base, 2), 2)
    with pytest.raises(ValidationError):
        mollify_drift(base, 0)
    with pytest.raises(ValidationError):
        mollify_drift(DriftSpec(dim=3, holder_amp=1.0), 2)


def test_regularity_condition():
    check_drift_regularity(DriftSpec(beta=0.75), 1.5)
    with pytest.raises(ConfigError, match=r"\(H2\)"):
        check_drift_regularity(DriftSpec(beta=0.3), 1.2)
    with pytest.raises(ConfigError):
        check_drift_regularity(DriftSpec(beta=0.75, kappa=1.5), 1.5)


@pytest.mark.parametrize(
    "spec",
    [
        DriftSpec(dim=1, holder_amp=1.0, interaction_amp=1.0),
        DriftSpec(dim=2, beta=0.5, holder_amp=0.7, interaction_amp=0.3),
        DriftSpec(dim=1, beta=0.6, kappa=1.2, holder_amp=0.0, interaction_amp=2.0),
        mollify_drift(DriftSpec(dim=1, holder_amp=1.0, interaction_amp=0.5), 4),
    ],
)
def test_built_in_drifts_are_admissible(spec):
    report = verify_admissible(spec, 300, seed=5)
    assert report.passed
    assert report.sup_norm <= spec.sup_bound + 1e-9
    assert report.holder_ratio <= spec.holder_constant + 1e-9
    assert report.measure_ratio <= spec.measure_constant + 1e-9


def test_admissibility_needs_samples():
    with pytest.raises(ValidationError):
        verify_admissible(DriftSpec(), 10, seed=0)


def test_bound_cap_below_sup_norm_rejected():
    with pytest.raises(pydantic.ValidationError, match="bound_cap"):
        DriftSpec(holder_amp=1.0, interaction_amp=0.5, bound_cap=1.0)
    assert DriftSpec(holder_amp=1.0, interaction_amp=0.5, bound_cap=1.5).sup_bound == 1.5


def test_drift_model_service():
    base = DriftSpec(holder_amp=1.0, interaction_amp=0.5)
    model = DriftModel(base)
    mu = EmpiricalMeasure([0.3, -1.2])
    states = np.array([[0.1], [2.0]])
    np.testing.assert_array_equal(model.evaluate_batch(states, mu), eval_drift_batch(base, states, mu))
    np.testing.assert_array_equal(model.evaluate([0.1], mu), eval_drift(base, [0.1], mu))
    mollified = model.mollified(4)
    assert mollified.spec.kind == DriftKind.MOLLIFIED and mollified.spec.n == 4
    assert model.verify(300, seed=5).passed

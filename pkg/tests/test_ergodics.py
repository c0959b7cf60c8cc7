import numpy as np
import pytest

from jumpflow import Field, MonotoneFunction, NoiseModel, SemigroupOperator, SpatialGrid
from jumpflow.ergodics import (
    EmpiricalMeasure,
    backward_sample,
    coupling_decay,
    dissipativity_margin,
    energy_distance,
    fit_log_decay,
    krylov_bogoliubov,
    linear_coupling_rate,
    linear_stationary_second_moment,
    mixing_check,
    moment_ode_bound,
    superlinearity_constants,
)
from jumpflow.exceptions import ContractViolationError, InvalidParameterError, PreconditionError
from jumpflow.noise import sample_batch
from jumpflow.solver import Model

from conftest import linear_oracle_model, sine


def test_energy_distance_properties(rng):
    model = linear_oracle_model()
    a = EmpiricalMeasure(model, rng.standard_normal((400, 16)))
    b = EmpiricalMeasure(model, rng.standard_normal((400, 16)) + 1.0)
    assert energy_distance(a, a) == pytest.approx(0.0, abs=1e-12)
    assert energy_distance(a, b) > energy_distance(a, EmpiricalMeasure(model, a.coeffs[::-1]))


def test_energy_distance_1d_matches_pairwise(rng):
    from jumpflow.ergodics import _energy_distance_1d

    x, y = rng.standard_normal(30), rng.standard_normal(20) + 0.5
    brute = 2 * np.abs(x[:, None] - y).mean() - np.abs(x[:, None] - x).mean() - np.abs(y[:, None] - y).mean()
    assert _energy_distance_1d(x, y) == pytest.approx(brute)


def test_empirical_measure_statistics():
    model = linear_oracle_model(n=4)
    m = EmpiricalMeasure(model, np.array([[1.0, 0, 0, 0], [0, 2.0, 0, 0]]))
    assert m.weights.sum() == pytest.approx(1.0)
    assert m.mean_norm_sq() == pytest.approx(2.5)
    assert m.mean_energy() == pytest.approx(0.5 * (np.pi**2 + 4 * 4 * np.pi**2))
    assert m.to_csv() == m.to_csv()
    assert m.to_csv().splitlines()[0] == "sample,norm_sq,energy,coef_0,coef_1,coef_2"
    assert np.allclose(m.histogram([0, 1.5, 3]), [0.5, 0.5])
    with pytest.raises(InvalidParameterError):
        EmpiricalMeasure(model, np.zeros((0, 4)))


def test_fit_log_decay_exact_exponential():
    t = np.linspace(0, 1, 11)
    samples = np.exp(-3 * t)[None, :] * np.linspace(1, 2, 40)[:, None]
    slope, icept, s_se, _ = fit_log_decay(t, samples)
    assert slope == pytest.approx(-3)
    assert icept == pytest.approx(np.log(1.5))
    assert s_se == pytest.approx(0, abs=1e-10)


def test_linear_oracle_closed_forms():
    model = linear_oracle_model()
    assert linear_coupling_rate(model) == pytest.approx(2 * np.pi**2 + 2 - 16 - 0.16)
    omega1, margin = dissipativity_margin(model, 1e-3)
    assert margin == pytest.approx(omega1 - 0.16)
    assert 0 < margin < linear_coupling_rate(model)
    m2 = linear_stationary_second_moment(model)
    grid = model.grid
    b = grid.analyze(np.ones(grid.n_interior))
    a = model.S.eigenvalues + 1 - 8
    assert m2 == pytest.approx(np.sum(0.16 * b**2 / (2 * a - 0.16)))


def test_coupling_identical_data_is_zero():
    model = linear_oracle_model()
    x = sine(model.grid)
    rep = coupling_decay(model, x, x, horizon=0.5, samples=20)
    assert rep.passed
    assert all(r.lhs == 0 for r in rep.rows)


def test_coupling_requires_margin():
    g = SpatialGrid(8)
    model = Model(SemigroupOperator.laplacian(g), MonotoneFunction.polynomial(eta=20.0, a1=1.0))
    with pytest.raises(PreconditionError):
        coupling_decay(model, sine(g), sine(g, -1.0), samples=2)


def test_coupling_linear_oracle_rate():
    model = linear_oracle_model()
    x, y = sine(model.grid), sine(model.grid, -1.0)
    rep = coupling_decay(model, x, y, horizon=1.0, samples=2000, seed=3, oracle_rate=linear_coupling_rate(model))
    assert rep.passed, rep.summary()


def test_coupling_rate_stable_under_sample_doubling():
    model = linear_oracle_model()
    x, y = sine(model.grid), sine(model.grid, -1.0)
    a = coupling_decay(model, x, y, horizon=1.0, samples=1000, seed=5).values
    b = coupling_decay(model, x, y, horizon=1.0, samples=2000, seed=5).values
    assert abs(a["rate"] - b["rate"]) <= 3 * (a["rate_stderr"] + b["rate_stderr"])


def test_backward_deterministic_converges_to_zero():
    g = SpatialGrid(8)
    model = Model(SemigroupOperator.laplacian(g), MonotoneFunction.polynomial(a3=1.0))
    res = backward_sample(model, sine(g, 2.0), starts=(-0.5, -1.0, -2.0), samples=2)
    assert res.report.passed
    assert np.max(np.abs(res.zeta.coeffs)) < 1e-6
    assert np.all(np.diff(res.increments) < 0)


def test_backward_rejects_non_nested_noise():
    model = linear_oracle_model(n=8)
    ms = model.noise.marks
    outer = sample_batch(ms, (-2.0, 0.0), 4, 1, "backward")
    inner = sample_batch(ms, (-1.0, 0.0), 4, 2, "backward")
    with pytest.raises(ContractViolationError):
        backward_sample(model, sine(model.grid), starts=(-1.0, -2.0), samples=4,
                        realizations={-1.0: inner, -2.0: outer})
    nested = {-1.0: outer.restrict(-1.0, 0.0), -2.0: outer}
    res = backward_sample(model, sine(model.grid), starts=(-1.0, -2.0), samples=4, realizations=nested)
    assert res.zeta.coeffs.shape == (4, 8)


def test_backward_rejects_bad_starts():
    model = linear_oracle_model(n=8)
    with pytest.raises(InvalidParameterError):
        backward_sample(model, sine(model.grid), starts=(-1.0,), samples=2)
    with pytest.raises(InvalidParameterError):
        backward_sample(model, sine(model.grid), starts=(1.0, -1.0), samples=2)


def test_mixing_bound_at_time_zero_is_kantorovich():
    model = linear_oracle_model(n=8)
    g = model.grid
    nu = EmpiricalMeasure(model, np.random.default_rng(0).standard_normal((500, 8)) * 0.1)
    rep = mixing_check(model, sine(g), nu, linear_coupling_rate(model), horizon=0.3, samples=200)
    assert rep.passed, rep.summary()
    first = [r for r in rep.rows if r.sweep_param.endswith("t=0")]
    assert all(r.lhs <= r.rhs + 1e-12 for r in first)


def test_superlinearity_calibration():
    g = SpatialGrid(16)
    model = Model(SemigroupOperator.laplacian(g), MonotoneFunction.polynomial(a1=1.0, a5=2.0))
    b, alpha = superlinearity_constants(model)
    assert alpha == 2.0
    assert b == pytest.approx(4.0 * (16 * g.h) ** -2)
    with pytest.raises(PreconditionError):
        superlinearity_constants(Model(model.S, MonotoneFunction.polynomial(a1=1.0)))


def test_moment_ode_noise_free_hyperbolic_decay():
    g = SpatialGrid(16)
    model = Model(SemigroupOperator.laplacian(g), MonotoneFunction.polynomial(a3=1.0))
    x = Field(g, np.full(16, 2.0))
    rep = moment_ode_bound(model, x, horizon=0.5, samples=1)
    assert rep.passed, rep.summary()
    b, y0 = rep.values["b"], rep.values["y0"]
    t = np.array([float(r.sweep_param[2:]) for r in rep.rows])
    assert np.allclose([r.rhs for r in rep.rows], y0 / (1 + b * y0 * t), rtol=1e-6)


def test_moment_ode_with_noise_from_zero():
    g = SpatialGrid(16)
    noise = NoiseModel.additive(g, [1.0], np.sin(np.pi * g.points)[None, :])
    model = Model(SemigroupOperator.laplacian(g), MonotoneFunction.polynomial(eta=2.0, a3=1.0), None, noise)
    rep = moment_ode_bound(model, Field.zeros(g), horizon=1.0, samples=500)
    assert rep.passed, rep.summary()
    assert rep.values["equilibrium"] > 0


def test_kb_zero_noise_concentrates_at_zero():
    g = SpatialGrid(8)
    model = Model(SemigroupOperator.laplacian(g), MonotoneFunction.polynomial(a3=1.0))
    rep, measures = krylov_bogoliubov(model, T=1.0, samples=2, x=sine(g), push_samples=20)
    assert rep.values["distances"][-1] < rep.values["distances"][0]
    assert measures[-1].mean_norm_sq() < measures[0].mean_norm_sq()


def test_kb_linear_oracle_second_moment():
    model = linear_oracle_model()
    rep, measures = krylov_bogoliubov(model, T=2.0, samples=1000, seed=6)
    assert rep.passed, rep.summary()
    oracle = linear_stationary_second_moment(model)
    assert abs(measures[-1].mean_norm_sq() - oracle) <= 0.05 * oracle

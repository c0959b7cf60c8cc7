import numpy as np
import pytest

from jumpflow import Field, MarkSpace, NoiseModel, PathRealization, SemigroupOperator, SpatialGrid
from jumpflow import compensated_integral, sample_path, sample_poisson, stochastic_convolution
from jumpflow.exceptions import InvalidParameterError
from jumpflow.noise import JumpBatch, compensated_integrals, lp_class_functional, sample_batch
from jumpflow.spectral import lp_norms


def test_mark_space_validation():
    ms = MarkSpace((1.0, 3.0), truncation=(1, 2))
    assert ms.total_mass == 4.0
    assert np.allclose(ms.probabilities, [0.25, 0.75])
    assert ms.truncation_masses() == [1.0, 4.0]
    assert ms.scaled(2).total_mass == 8.0
    for bad in [dict(weights=(0.0,)), dict(weights=(1.0,), labels=("a", "b")), dict(weights=(1.0, 1.0), truncation=(2, 1))]:
        with pytest.raises(InvalidParameterError):
            MarkSpace(**bad)


def test_path_realization_validation():
    with pytest.raises(InvalidParameterError):
        PathRealization(0, 1, [0.5, 0.2], [0, 0])
    with pytest.raises(InvalidParameterError):
        PathRealization(0, 1, [1.5], [0])
    with pytest.raises(InvalidParameterError):
        PathRealization(0, 1, [0.5], [0, 1])


def test_empty_mark_space_gives_no_jumps():
    pr = sample_path(MarkSpace(), (0, 5), 1, 0)
    assert pr.count == 0


def test_sample_poisson_counts_match_intensity():
    ms = MarkSpace((2.0, 3.0))
    rng = np.random.default_rng(0)
    counts = [sample_poisson(ms, (0, 2), rng).count for _ in range(4000)]
    assert np.mean(counts) == pytest.approx(10.0, abs=3 * np.sqrt(10 / 4000))


def test_sample_path_mark_frequencies():
    ms = MarkSpace((1.0, 3.0))
    marks = np.concatenate([sample_path(ms, (0, 10), 5, s).marks for s in range(300)])
    assert np.mean(marks == 1) == pytest.approx(0.75, abs=0.02)


def test_sample_path_is_deterministic_and_tag_separated():
    ms = MarkSpace((4.0,))
    a = sample_path(ms, (0, 3), 9, 2)
    b = sample_path(ms, (0, 3), 9, 2)
    c = sample_path(ms, (0, 3), 9, 2, tag="other")
    assert np.array_equal(a.times, b.times)
    assert not np.array_equal(a.times, c.times)


@pytest.mark.parametrize("inner,outer", [((-1.0, 0.0), (-8.0, 0.0)), ((0.3, 2.7), (0.0, 5.0)), ((-2.5, -0.5), (-4.0, 1.0))])
def test_windows_are_nested(inner, outer):
    ms = MarkSpace((3.0, 1.0))
    big = sample_path(ms, outer, 4, 17)
    small = sample_path(ms, inner, 4, 17)
    r = big.restrict(*inner)
    assert np.array_equal(r.times, small.times) and np.array_equal(r.marks, small.marks)


def test_restrict_outside_window_rejected():
    pr = sample_path(MarkSpace((1.0,)), (0, 1), 0, 0)
    with pytest.raises(InvalidParameterError):
        pr.restrict(-1, 1)


def test_csv_roundtrip():
    pr = sample_path(MarkSpace((5.0, 2.0)), (0, 2), 3, 1)
    text = pr.to_csv()
    assert text.splitlines()[0] == "tau,mark_index"
    back = PathRealization.from_csv(text, 0, 2)
    assert np.array_equal(back.times, pr.times) and np.array_equal(back.marks, pr.marks)


def test_batch_roundtrip_and_restrict():
    ms = MarkSpace((3.0,))
    batch = sample_batch(ms, (-2.0, 0.0), 5, 1, "noise", 10)
    for p in range(5):
        ref = sample_path(ms, (-2.0, 0.0), 1, 10 + p)
        assert np.array_equal(batch.path(p).times, ref.times)
    inner = batch.restrict(-1.0, 0.0)
    assert np.all(inner.counts <= batch.counts)
    assert JumpBatch.empty(3, 0, 1).n_paths == 3


def test_compensated_integral_hand_computed():
    g = SpatialGrid(3)
    ms = MarkSpace((2.0,))
    pr = PathRealization(0.0, 1.0, [0.25, 0.5], [0, 0])
    field = Field(g, np.array([1.0, 2.0, 3.0]))
    out = compensated_integral(lambda t, i: field, pr, ms)
    assert np.allclose(out, 2 * field.values - 2.0 * field.values)


def test_compensated_integral_time_dependent():
    g = SpatialGrid(3)
    ms = MarkSpace((1.0,))
    pr = PathRealization(0.0, 2.0, [1.0], [0])
    out = compensated_integral(lambda t, i: Field(g, np.full(3, t)), pr, ms)
    # jump contributes 1, compensator int_0^2 t dt = 2
    assert np.allclose(out, -1.0)


def test_isometry_and_martingale(grid):
    fields = np.stack([np.sin(np.pi * grid.points), 0.5 * np.sin(3 * np.pi * grid.points)])
    ms = MarkSpace((1.0, 2.0))
    batch = sample_batch(ms, (0.0, 1.5), 10_000, 8)
    vals = compensated_integrals(fields, batch, ms)
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(vals.shape[0])
    assert np.all(np.abs(mean) <= 3 * se)
    sq = grid.h * np.sum(vals**2, axis=1)
    target = 1.5 * np.dot(ms.weight_array, lp_norms(fields, grid.h, 2) ** 2)
    assert abs(sq.mean() - target) <= 3 * sq.std(ddof=1) / np.sqrt(sq.size)


def test_vectorized_matches_scalar_integral(grid):
    fields = np.stack([np.cos(np.pi * grid.points), np.ones(grid.n_interior)])
    ms = MarkSpace((1.5, 0.5))
    batch = sample_batch(ms, (0.0, 2.0), 4, 3)
    vals = compensated_integrals(fields, batch, ms)
    for p in range(4):
        ref = compensated_integral(lambda t, i: Field(grid, fields[i]), batch.path(p), ms)
        assert np.allclose(vals[p], ref, atol=1e-12)


def test_stochastic_convolution_without_jumps_is_deterministic_drift(grid, laplacian):
    ms = MarkSpace((1.0,))
    pr = PathRealization(0.0, 1.0, [], [])
    field = Field.from_coeffs(grid, np.eye(grid.n_interior)[0])
    path = stochastic_convolution(laplacian, lambda t, i: field, pr, ms, np.linspace(0, 1, 11))
    mu = np.pi**2
    expected = -(1 - np.exp(-mu * path.times)) / mu
    assert np.allclose(grid.analyze(path.states)[:, 0], expected, atol=1e-13)


def test_stochastic_convolution_jump_then_decay(grid, laplacian):
    ms = MarkSpace((1.0,))
    pr = PathRealization(0.0, 1.0, [0.5], [0])
    field = Field.from_coeffs(grid, np.eye(grid.n_interior)[1])
    path = stochastic_convolution(laplacian, lambda t, i: field, pr, ms, np.array([0.0, 0.5, 1.0]))
    c = grid.analyze(path.states)[:, 1]
    mu = 4 * np.pi**2
    drift = lambda t: -(1 - np.exp(-mu * t)) / mu
    assert c[1] == pytest.approx(drift(0.5) + 1.0)
    assert c[2] == pytest.approx((drift(0.5) + 1.0) * np.exp(-mu * 0.5) + drift(0.5))
    assert path.is_jump.tolist() == [False, True, False]


def test_lp_class_functional_constant_integrand():
    g = SpatialGrid(7)
    ms = MarkSpace((2.0,))
    field = Field(g, np.ones(7))
    mass = 7 * g.h
    p = 4
    val = lp_class_functional(lambda t, i: field, ms, (0, 3), p)
    norm_p = mass ** (1 / p)
    assert val == pytest.approx(3 * (2 * norm_p**p + (2 * norm_p**2) ** (p / 2)))
    with pytest.raises(InvalidParameterError):
        lp_class_functional(lambda t, i: field, ms, (0, 1), 1.5)


def test_noise_model_constants(grid):
    add = NoiseModel.additive(grid, [1.0, 2.0], np.ones((2, grid.n_interior)))
    assert add.K == 0.0 and add.kind == "additive"
    mult = NoiseModel.multiplicative(grid, [2.0], [0.5], g="tanh")
    assert mult.K == pytest.approx(0.5)
    assert NoiseModel.zero().is_zero
    assert mult.restricted(0).is_zero
    with pytest.raises(InvalidParameterError):
        NoiseModel.additive(grid, [1.0], np.ones((2, grid.n_interior)))


def test_noise_jump_values_respect_inactive_marks(grid):
    nz = NoiseModel.additive(grid, [1.0, 1.0], np.stack([np.ones(grid.n_interior), 2 * np.ones(grid.n_interior)]))
    nz = nz.restricted(1)
    u = np.zeros((2, grid.n_interior))
    out = nz.jump_values(0.0, np.array([0, 1]), u)
    assert np.allclose(out[0], 1.0) and np.allclose(out[1], 0.0)

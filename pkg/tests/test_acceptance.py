"""Acceptance suite: one check per criterion, each printing a single PASS/FAIL line.

Run under pytest (the lines are repeated in the terminal summary) or
directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import sys
import time
from importlib.resources import files
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from jumpflow import Field, MarkSpace, MonotoneFunction, NoiseModel, SemigroupOperator, SpatialGrid
from jumpflow import choose_alpha, simulate, solve_multiplicative
from jumpflow.config import load_config, parse_config
from jumpflow.noise import compensated_integrals, sample_batch
from jumpflow.runner import run, run_experiment
from jumpflow.solver import Model
from jumpflow.spectral import lp_norm, lp_norms, semigroup_apply

sys.path.insert(0, str(Path(__file__).parent))
from conftest import sine  # noqa: E402

SAMPLES = 10_000
RESULTS: dict[int, str] = {}


def _verdict(number, title, passed, detail, started):
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}  ({detail}; {time.perf_counter() - started:.1f} s)"
    RESULTS[number] = line
    print(line)
    return passed


def criterion_1():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    funcs = [MonotoneFunction.polynomial(a1=1.0, a3=1.0), MonotoneFunction.polynomial(a3=1.0),
             MonotoneFunction.polynomial(a1=0.5, a3=2.0, a5=1.0)]
    violations = 0
    worst_res = 0.0
    for f in funcs:
        for lam in (1e-1, 1e-2, 1e-3):
            y = f.yosida(lam)
            a = rng.uniform(-100, 100, SAMPLES)
            b = rng.uniform(-100, 100, SAMPLES)
            fa, fb = y(a), y(b)
            violations += int(np.sum(np.abs(fa - fb) > (2 / lam) * np.abs(a - b) * (1 + 1e-12)))
            violations += int(np.sum(np.abs(fa) > np.abs(f(a)) * (1 + 1e-12)))
            violations += int(np.sum((fa - fb) * (a - b) < 0))
            res = float(np.max(np.abs(y.residual(a))))
            worst_res = max(worst_res, res)
            violations += int(res > 1e-12)
    return _verdict(1, "Yosida scalar suite", violations == 0, f"violations {violations}, max residual {worst_res:.2e}", t0)


def criterion_2():
    t0 = time.perf_counter()
    g = SpatialGrid(31)
    S = SemigroupOperator.laplacian(g)
    rng = np.random.default_rng(2)
    law = contraction = 0.0
    for _ in range(200):
        u = Field(g, rng.standard_normal(31))
        s, t = rng.uniform(0, 0.1, 2)
        a = semigroup_apply(S, s + t, u)
        b = semigroup_apply(S, s, semigroup_apply(S, t, u))
        law = max(law, float(np.max(np.abs(a.values - b.values))))
        contraction = max(contraction, lp_norm(semigroup_apply(S, t, u), 2) - lp_norm(u, 2))
    u = Field(g, rng.standard_normal(31))
    exact = semigroup_apply(S, 0.05, u)
    errs = [lp_norm(S.yosida_semigroup_apply(beta, 0.05, u) - exact, 2) for beta in (1e-1, 1e-2, 1e-3)]
    ok = law <= 1e-12 and contraction <= 0 and errs[0] > errs[1] > errs[2]
    return _verdict(2, "semigroup suite", ok, f"law {law:.1e}, norm growth {contraction:.1e}, yosida errors "
                    + " > ".join(f"{e:.2e}" for e in errs), t0)


def criterion_3():
    t0 = time.perf_counter()
    g = SpatialGrid(31)
    f = MonotoneFunction.polynomial(a3=1.0)
    lam = 1e-3
    model = Model(SemigroupOperator.laplacian(g), f, lam)
    u0 = Field(g, np.full(31, 2.0))
    y = f.yosida(lam)
    ref = solve_ivp(lambda t, v: -y(v), (0, 0.01), [2.0], method="Radau", rtol=1e-12, atol=1e-14, dense_output=True)
    path = simulate(model, u0, 0.01, 1e-4).path(0)
    window = np.abs(g.points - 0.5) <= 0.05
    err = float(np.max(np.abs(path.states[:, window] - ref.sol(path.times)[0][:, None])))
    fine_dt = 1e-4 / 32
    fine = simulate(model, u0, 0.01, fine_dt).uniform_coeffs()[0]
    dts = (4e-4, 2e-4, 1e-4, 5e-5)
    errs = []
    for dt in dts:
        c = simulate(model, u0, 0.01, dt).uniform_coeffs()[0]
        step = int(round(dt / fine_dt))
        errs.append(float(np.max(np.sqrt(np.sum((c - fine[::step]) ** 2, axis=1)))))
    order = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    ok = err <= 1e-2 and abs(order - 2) <= 0.3
    return _verdict(3, "deterministic mild solver", ok, f"sup error vs ODE {err:.2e}, order {order:.2f}", t0)


def criterion_4():
    t0 = time.perf_counter()
    g = SpatialGrid(31)
    fields = np.stack([np.sin(np.pi * g.points), 0.5 * np.sin(3 * np.pi * g.points), np.cos(np.pi * g.points)])
    ms = MarkSpace((1.0, 2.0, 0.5))
    T = 2.0
    batch = sample_batch(ms, (0.0, T), SAMPLES, 4)
    vals = compensated_integrals(fields, batch, ms)
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(SAMPLES)
    sq = lp_norms(vals, g.h, 2) ** 2
    target = T * float(np.dot(ms.weight_array, lp_norms(fields, g.h, 2) ** 2))
    sq_se = sq.std(ddof=1) / np.sqrt(SAMPLES)
    worst = float(np.max(np.abs(mean) / se))
    ok = worst <= 3 and abs(sq.mean() - target) <= 3 * sq_se
    return _verdict(4, "isometry and martingale", ok,
                    f"max |mean|/se {worst:.2f}, E|I|^2 {sq.mean():.4f} vs {target:.4f} (se {sq_se:.4f})", t0)


CONFIGS = files("jumpflow") / "configs"


def _run_config(name):
    cfg = load_config(CONFIGS / f"{name}.ini")
    report, _ = run_experiment(cfg)
    return report


def _describe(report, keys=()):
    fails = report.failures
    parts = [f"{k} {_fmt(report.values[k])}" for k in keys if k in report.values]
    parts.append(f"failed: {fails[0].name}" if fails else f"{len(report.checks)} checks")
    return "; ".join(parts)


def _fmt(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(f"{x:.4g}" for x in v) + "]"
    return f"{v:.5g}"


def criterion_5():
    t0 = time.perf_counter()
    bj = _run_config("bj")
    conv = _run_config("bjconv")
    p2 = [r.ratio for r in bj.rows if r.sweep_param.startswith("p=2")]
    ok = bj.passed and conv.passed
    detail = f"p=2 ratios {_fmt(p2)}; bj {_describe(bj)}; bjconv {_describe(conv)}"
    return _verdict(5, "BJ and BJconv", ok, detail, t0)


def criterion_6():
    t0 = time.perf_counter()
    rep = _run_config("linear_stability")
    return _verdict(6, "nodewise stability on the linear test model", rep.passed, _describe(rep), t0)


def criterion_7():
    t0 = time.perf_counter()
    rep = _run_config("cubic_yosida")
    return _verdict(7, "Yosida convergence rate", rep.passed, _describe(rep, ("spread",)), t0)


def criterion_8():
    t0 = time.perf_counter()
    g = SpatialGrid(15)
    S = SemigroupOperator.laplacian(g)
    f = MonotoneFunction.polynomial(a1=1.0, a3=1.0)
    noise = NoiseModel.multiplicative(g, [2.0], [0.3], g="tanh")
    model = Model(S, f, 1e-2, noise)
    jumps = sample_batch(noise.marks, (0.0, 1.0), 200, 8)
    tol = 1e-8
    a = solve_multiplicative(model, sine(g), jumps, 1e-2, tol=tol)
    b = solve_multiplicative(model, sine(g), jumps, 1e-2, tol=tol, init="deterministic")
    alpha = choose_alpha(model.eta, model.K, 1.0)
    diff = float(np.max(np.sqrt(np.sum((a.path.coeffs - b.path.coeffs) ** 2, axis=-1))))
    const = model.with_noise(NoiseModel.multiplicative(g, [2.0], [0.3], g="constant"))
    one = solve_multiplicative(const, sine(g), jumps, 1e-2, tol=tol)
    ratios = a.ratios + b.ratios
    ok = a.alpha == alpha and max(ratios) < 1 and diff <= 10 * tol and one.iterations == 1
    return _verdict(8, "multiplicative Picard", ok, f"alpha {alpha:.3f}, max ratio {max(ratios):.3f}, "
                    f"init gap {diff:.1e}, constant-G iterations {one.iterations}", t0)


def criterion_9():
    t0 = time.perf_counter()
    lin = _run_config("linear_mixing")
    cubic = _run_config("cubic_mixing")
    ok = lin.passed and cubic.passed and "oracle_rate" in lin.values
    detail = (f"linear {_describe(lin, ('rate', 'oracle_rate'))}; "
              f"cubic {_describe(cubic, ('rate', 'rate_stderr', 'margin'))}")
    return _verdict(9, "mixing rate", ok, detail, t0)


def criterion_10():
    t0 = time.perf_counter()
    rep = _run_config("linear_backward")
    keys = ("backward.zeta_second_moment", "backward.oracle_second_moment")
    ok = rep.passed and keys[1] in rep.values
    return _verdict(10, "backward coupling", ok, _describe(rep, keys), t0)


def criterion_11():
    t0 = time.perf_counter()
    rep = _run_config("linear_kb")
    return _verdict(11, "Krylov-Bogoliubov", rep.passed, _describe(rep, ("distances",)), t0)


def criterion_12():
    t0 = time.perf_counter()
    rep = _run_config("cubic_moment_ode")
    return _verdict(12, "moment comparison ODE", rep.passed, _describe(rep, ("bound", "equilibrium")), t0)


REPRO_CONFIG = """
[grid]
n_interior = 15
[nonlinearity]
coefficients = 1:1, 3:1
eta = 1
[noise]
kind = multiplicative
marks = 0.3:2.0, 0.1:3.0
g = tanh
[solver]
T = 0.5
dt = 0.01
[experiment]
name = simulate
samples = 2500
"""


def _repro_texts():
    bj = (CONFIGS / "bj.ini").read_text().replace("samples = 10000", "samples = 1500")
    return {"simulate": REPRO_CONFIG, "bj": bj}


def criterion_13(tmp: Path):
    t0 = time.perf_counter()
    identical = True
    compared = 0
    for label, text in _repro_texts().items():
        dirs = []
        for threads, rerun in ((1, "a"), (1, "b"), (4, "a"), (4, "b")):
            d = tmp / f"{label}-{threads}{rerun}"
            run(parse_config(text), d, seed=13, threads=threads)
            dirs.append(d)
        for name in sorted(f.name for f in dirs[0].glob("*.csv")):
            ref = (dirs[0] / name).read_bytes()
            identical &= all((d / name).read_bytes() == ref for d in dirs[1:])
            compared += 1
    return _verdict(13, "reproducibility across --threads", identical,
                    f"{compared} CSV files byte-compared over threads 1 and 4", t0)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8,
            criterion_9, criterion_10, criterion_11, criterion_12]


@pytest.mark.slow
@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i + 1}" for i in range(len(CRITERIA))])
def test_criterion(check):
    assert check(), RESULTS.get(CRITERIA.index(check) + 1)


@pytest.mark.slow
def test_criterion_13(tmp_path):
    assert criterion_13(tmp_path), RESULTS.get(13)


if __name__ == "__main__":
    import tempfile

    outcomes = [c() for c in CRITERIA]
    with tempfile.TemporaryDirectory() as d:
        outcomes.append(criterion_13(Path(d)))
    print(f"{sum(outcomes)}/{len(outcomes)} criteria passed")
    sys.exit(0 if all(outcomes) else 1)

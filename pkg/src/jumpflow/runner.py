"""Dispatch a validated config to an experiment and write its report files."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .ergodics import (
    backward_sample,
    coupling_decay,
    dissipativity_margin,
    krylov_bogoliubov,
    linear_coupling_rate,
    linear_stationary_second_moment,
    mixing_check,
    moment_ode_bound,
)
from .exceptions import InvalidParameterError, PreconditionError
from .inequalities import (
    apriori_experiment,
    bj_experiment,
    bjconv_experiment,
    solution_map_lipschitz,
    stability_experiment,
)
from .paths import format_float, uniform_nodes
from .reports import Report
from .solver import _jumps_for, _stderr, coeff_norms, run_chunks, simulate_batch, solve_additive

__all__ = ["RunResult", "run", "run_experiment"]


@dataclass
class RunResult:
    status: int
    report: Report | None
    reason: str = ""
    files: tuple = ()


def _merge(name: str, *reports: Report) -> Report:
    out = Report(name, samples=max(r.samples for r in reports), log_x=reports[0].log_x, log_y=reports[0].log_y)
    for r in reports:
        out.rows.extend(r.rows)
        out.checks.extend(r.checks)
        out.series.update({f"{r.name}: {k}": v for k, v in r.series.items()})
        out.values.update({f"{r.name}.{k}": v for k, v in r.values.items()})
    return out


def _linear_oracle_ok(model) -> bool:
    """The closed forms need linear f with f(0) = 0 and g(r) = r + const (or no noise)."""
    f = model.f
    if f is None or not (f.is_linear or not f.coefficients) or f.offset != 0 or model.lam is not None:
        return False
    nz = model.noise
    return nz.is_zero or (nz.kind == "multiplicative" and nz.coefficient.g.name in ("identity", "affine"))


def _single_mode(x, y) -> bool:
    d = x.coeffs - y.coeffs
    return bool(np.all(np.abs(d[1:]) <= 1e-12 * max(abs(d[0]), 1e-300))) and d[0] != 0


def _simulate(cfg: ExperimentConfig, threads: int):
    model = cfg.model()
    sol = cfg["solver"]
    x = cfg.field("x", model.grid)
    T, dt, seed = sol["T"], sol["dt"], cfg.seed
    keep = {}

    def work(a, b):
        jumps = _jumps_for(model, T, b - a, seed, a)
        bp = simulate_batch(model, x, jumps, dt, sol["tol"])
        if a == 0:
            keep["path"] = bp.path(0)
            keep["noise"] = jumps.path(0)
        return coeff_norms(bp.uniform_coeffs()) ** 2

    m2 = run_chunks(cfg.samples, work, 256, threads)
    times = uniform_nodes(0.0, T, dt)
    rep = Report("simulate", samples=cfg.samples, log_x=False)
    x2 = float(np.sum(x.coeffs**2))
    mean, se = m2.mean(axis=0), _stderr(m2)
    for t, a, s in zip(times, mean, se):
        rep.add(f"t={t:.6g}", a, s, x2)
    rep.series["E|u(t)|^2"] = (times, mean)
    rep.check("all states finite", np.all(np.isfinite(m2)))
    f = model.f
    if model.noise.is_zero and (not f.coefficients or f.is_linear) and f.offset == 0 and model.lam is None:
        rates = model.S.eigenvalues + f.linear_coefficient - model.eta
        exact = np.sum((x.coeffs[None, :] * np.exp(-np.outer(times, rates))) ** 2, axis=1)
        err = float(np.max(np.abs(mean - exact) / np.maximum(exact, 1e-300)))
        rep.series["exact"] = (times, exact)
        rep.check("linear deterministic decay matches the spectral solution", err <= 1e-10, f"max relative error {err:.2e}")
    extra = {"path.csv": keep["path"].to_csv(), "noise.csv": keep["noise"].to_csv()}
    return rep, extra


def _yosida(cfg: ExperimentConfig, threads: int):
    model = cfg.model()
    sol = cfg["solver"]
    x = cfg.field("x", model.grid)
    res = solve_additive(model, x, sol["T"], sol["dt"], sol["lambda_sequence"], cfg.samples, cfg.seed,
                         tol=sol["tol"], threads=threads)
    rep = Report("yosida", samples=cfg.samples)
    for lam, inc, se in zip(res.lams, res.increments, res.increment_stderr):
        rep.add(f"lam={lam:g}", inc, se, lam)
    rates = res.rates
    ok = np.all(np.isfinite(rates)) and np.all(rates > 0)
    spread = float(rates.max() / rates.min()) if ok else math.inf
    rep.check("E sup|u_lam - u_lam/2|^2 / lam within a factor 4 across lam", ok and spread <= 4.0, f"max/min {spread:.4g}")
    rep.series["rate"] = (res.lams[:-1], rates)
    rep.values.update(spread=spread)
    return rep, {}


def _mixing(cfg: ExperimentConfig, threads: int):
    model = cfg.model()
    sol, ex = cfg["solver"], cfg["experiment"]
    x, y = cfg.field("x", model.grid), cfg.field("y", model.grid)
    oracle = linear_coupling_rate(model) if _linear_oracle_ok(model) and _single_mode(x, y) else None
    rep = coupling_decay(model, x, y, sol["T"], sol["dt"], cfg.samples, cfg.seed, ex["beta0"], oracle, threads=threads)
    return rep, {}


def _backward(cfg: ExperimentConfig, threads: int):
    model = cfg.model()
    sol, ex = cfg["solver"], cfg["experiment"]
    x, y = cfg.field("x", model.grid), cfg.field("y", model.grid)
    oracle_m2 = None
    if _linear_oracle_ok(model) and not model.noise.is_zero:
        try:
            oracle_m2 = linear_stationary_second_moment(model)
        except PreconditionError:
            oracle_m2 = None
    res = backward_sample(model, x, ex["starts"], sol["dt"], cfg.samples, cfg.seed, ex["beta0"], y=y,
                          oracle_moment=oracle_m2, threads=threads)
    if _linear_oracle_ok(model):
        rate = linear_coupling_rate(model)
    else:
        rate = dissipativity_margin(model, ex["beta0"])[1]
    mix = mixing_check(model, x, res.zeta, rate, sol["T"], sol["dt"], cfg.samples, cfg.seed, threads=threads)
    return _merge("backward", res.report, mix), {"measure.csv": res.zeta.to_csv()}


def _kb(cfg: ExperimentConfig, threads: int):
    model = cfg.model()
    sol, ex = cfg["solver"], cfg["experiment"]
    rep, measures = krylov_bogoliubov(model, sol["T"], ex["multiples"], sol["dt"], cfg.samples, cfg.seed, ex["tau"],
                                      threads=threads)
    return rep, {"measure.csv": measures[-1].thinned(10_000).to_csv()}


def _simple(cfg: ExperimentConfig, threads: int):
    name = cfg.name
    model = cfg.model()
    grid = model.grid
    sol, ex = cfg["solver"], cfg["experiment"]
    T, dt, n, seed = sol["T"], sol["dt"], cfg.samples, cfg.seed
    x, y = cfg.field("x", grid), cfg.field("y", grid)
    if name == "bj":
        return bj_experiment(grid, cfg.noise_fields(grid), model.noise.marks, T, ex["ps"], n, seed, ex["intensities"],
                             threads=threads)
    if name == "bjconv":
        return bjconv_experiment(model.S, cfg.noise_fields(grid), model.noise.marks, T, ex["ps"], n, seed,
                                 ex["intensities"], dt, threads=threads)
    if name == "apriori":
        return apriori_experiment(model, x, ex["scalings"], sol["lambda_sequence"], T, dt, n, seed, threads=threads)
    if name == "stability":
        return stability_experiment(model, x, model.noise, y, cfg.noise(grid, ex["noise_scale"]), T, dt, n, seed,
                                    threads=threads)
    if name == "lipschitz":
        scalings = [s for s in ex["scalings"] if s > 0]
        return solution_map_lipschitz(model, x, y, scalings, T, dt, n, seed, threads=threads)
    if name == "moment_ode":
        return moment_ode_bound(model, x, T, dt, n, seed, threads=threads)
    raise InvalidParameterError(f"unknown experiment {name!r}")


_DISPATCH = {"simulate": _simulate, "yosida": _yosida, "mixing": _mixing, "backward": _backward, "kb": _kb}


def run_experiment(cfg: ExperimentConfig, threads: int = 1):
    """``(report, extra_files)`` for the configured experiment."""
    fn = _DISPATCH.get(cfg.name)
    if fn is not None:
        return fn(cfg, threads)
    return _simple(cfg, threads), {}


def _manifest(cfg: ExperimentConfig, seed: int, threads: int, elapsed: float, result: RunResult) -> str:
    lines = [
        f"jumpflow {__version__}",
        f"experiment = {cfg.name}",
        f"seed = {seed}",
        f"samples = {cfg.samples}",
        f"threads = {threads}",
        f"wall_clock_seconds = {elapsed:.3f}",
        f"status = {result.status}",
    ]
    if result.reason:
        lines.append(f"reason = {result.reason}")
    if result.report is not None:
        for k, v in result.report.values.items():
            v = format_float(v) if isinstance(v, (float, np.floating)) else v
            lines.append(f"value {k} = {v}")
        lines.extend(c.line() for c in result.report.checks)
    lines.extend(f"warning: {w}" for w in cfg.warnings)
    lines.append("--- config ---")
    lines.append(cfg.text.rstrip("\n"))
    return "\n".join(lines) + "\n"


def run(cfg: ExperimentConfig, out_dir, seed: int | None = None, threads: int = 1) -> RunResult:
    """Run, write ``report.csv``, ``report.svg``, ``manifest.txt`` (plus extras), return the status.

    Status 0 iff every check passed; 1 on a failed check; 2 when the
    experiment could not run (precondition or parameter error).
    """
    if threads < 1:
        raise InvalidParameterError("threads must be >= 1")
    if seed is not None:
        cfg.sections["experiment"]["seed"] = int(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    extra = {}
    try:
        report, extra = run_experiment(cfg, threads)
    except (PreconditionError, InvalidParameterError) as exc:
        result = RunResult(2, None, f"{type(exc).__name__}: {exc}".splitlines()[0])
    else:
        failures = report.failures
        reason = f"{len(failures)} check(s) failed; first: {failures[0].name}" if failures else ""
        result = RunResult(1 if failures else 0, report, reason)
    elapsed = time.perf_counter() - start
    files = []
    if result.report is not None:
        files.append(_write(out / "report.csv", result.report.to_csv()))
        files.append(_write(out / "report.svg", result.report.to_svg()))
    for name, text in extra.items():
        files.append(_write(out / name, text))
    files.append(_write(out / "manifest.txt", _manifest(cfg, cfg.seed, threads, elapsed, result)))
    result.files = tuple(files)
    return result


def _write(path: Path, text: str) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path

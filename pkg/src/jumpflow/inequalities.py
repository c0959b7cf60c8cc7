"""Monte Carlo checks of maximal inequalities, a priori bounds and stability estimates.

Every experiment returns a :class:`~jumpflow.reports.Report` whose rows are
``(sweep_param, lhs, lhs_stderr, rhs)`` and whose checks encode the
falsifiable part of the inequality: explicit constants where one is
provable, otherwise stability of the measured ratios across a sweep.
Differences are always estimated under synchronous coupling (both
solutions see the same jumps).
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import InvalidParameterError
from .noise import AdditiveNoise, JumpBatch, MarkSpace, NoiseModel, lp_class_functional, sample_batch
from .paths import Schedule, uniform_nodes
from .reports import Report
from .solver import DEFAULT_TOL, Model, _jumps_for, _stderr, coeff_norms, run_chunks, simulate_batch
from .spectral import Field, SemigroupOperator, SpatialGrid, lp_norms

__all__ = [
    "integral_sups",
    "bj_experiment",
    "bjconv_experiment",
    "apriori_experiment",
    "stability_experiment",
    "solution_map_lipschitz",
]

SLACK = 3.0


def _field_integrand(fields):
    def g(t, i):
        return fields[i]

    return g


def integral_sups(grid: SpatialGrid, fields: np.ndarray, batch: JumpBatch, ms: MarkSpace, p: float) -> np.ndarray:
    """Exact ``sup_t |g * mu_bar(t)|_p^p`` per path for time-constant per-mark fields.

    Between jumps the integral moves on a straight line, so by convexity of
    the norm the supremum sits at a jump (left limit or value) or an end point.
    """
    fields = np.asarray(fields, dtype=float)
    P, J = batch.times.shape
    rate = ms.weight_array @ fields
    t0 = batch.t0
    out = np.zeros(P)
    end = np.zeros((P, grid.n_interior))
    if J:
        on = batch.marks >= 0
        g = np.where(on[..., None], fields[np.where(on, batch.marks, 0)], 0.0)
        cum = np.cumsum(g, axis=1)
        tau = np.where(on, batch.times, batch.t1) - t0
        post = cum - tau[..., None] * rate
        pre = post - g
        out = np.maximum(lp_norms(post, grid.h, p).max(axis=1), lp_norms(pre, grid.h, p).max(axis=1)) ** p
        end = cum[:, -1]
    end = end - (batch.t1 - t0) * rate
    return np.maximum(out, lp_norms(end, grid.h, p) ** p)


def _convolution_sups(S: SemigroupOperator, fields, batch: JumpBatch, ms: MarkSpace, p: float, dt: float):
    """``sup`` over jump-adapted nodes of ``|G_A|_p^p`` and of the plain integral, per path."""
    grid = S.grid
    mu = S.eigenvalues
    coef = grid.analyze(np.asarray(fields, dtype=float))
    rate = ms.weight_array @ coef
    sched = Schedule.build(uniform_nodes(batch.t0, batch.t1, dt), batch.times, batch.marks)
    P, L = sched.nodes.shape
    conv = np.zeros((P, grid.n_interior))
    plain = np.zeros((P, grid.n_interior))
    sup_c = np.zeros(P)
    sup_p = np.zeros(P)
    for r in range(1, L):
        h = (sched.nodes[:, r] - sched.nodes[:, r - 1])[:, None]
        z = h * mu
        phi = np.where(z > 0, -np.expm1(-z) / np.where(z > 0, mu, 1.0), h)
        conv = np.exp(-z) * conv - phi * rate
        plain = plain - h * rate
        for state, sup in ((conv, sup_c), (plain, sup_p)):
            np.maximum(sup, lp_norms(grid.synthesize(state), grid.h, p) ** p, out=sup)
        jumps = sched.is_jump[:, r]
        if jumps.any():
            add = np.where(jumps[:, None], coef[np.where(jumps, sched.marks[:, r], 0)], 0.0)
            conv = conv + add
            plain = plain + add
            for state, sup in ((conv, sup_c), (plain, sup_p)):
                np.maximum(sup, lp_norms(grid.synthesize(state), grid.h, p) ** p, out=sup)
    return sup_c, sup_p


def bj_experiment(grid: SpatialGrid, fields, ms: MarkSpace, T: float = 1.0, ps=(2, 4), samples: int = 10_000,
                  seed: int = 0, intensities=(1, 2, 4), chunk=1024, threads=1) -> Report:
    """``E sup_t |g * mu_bar|_p^p`` against the L_p class functional over an intensity sweep."""
    fields = np.asarray(fields, dtype=float)
    rep = Report("bj", samples=samples)
    for p in ps:
        if p < 2:
            raise InvalidParameterError(f"p must be >= 2, got {p}")
        xs, ys = [], []
        for c in intensities:
            msc = ms.scaled(c)
            rhs = lp_class_functional(_field_integrand(fields), msc, (0.0, T), p, grid)

            def work(a, b, msc=msc, p=p, c=c):
                batch = sample_batch(msc, (0.0, T), b - a, seed, f"bj{c}", a)
                return integral_sups(grid, fields, batch, msc, p)

            vals = run_chunks(samples, work, chunk, threads)
            row = rep.add(f"p={p:g};intensity={c:g}", vals.mean(), _stderr(vals), rhs)
            xs.append(c)
            ys.append(row.ratio)
            if p == 2:
                rep.check(f"Doob bound at p=2, intensity {c:g}", row.ratio <= 2 + SLACK * row.lhs_stderr / rhs if rhs else row.lhs == 0,
                          f"ratio {row.ratio:.4g}")
        rep.series[f"p={p:g}"] = (xs, ys)
        finite = [y for y in ys if y > 0 and math.isfinite(y)]
        spread = max(finite) / min(finite) if finite else 1.0
        rep.check(f"ratios stable across intensities at p={p:g}", all(math.isfinite(y) for y in ys) and spread <= 3.0,
                  f"max/min {spread:.3g}")
    return rep


def bjconv_experiment(S: SemigroupOperator, fields, ms: MarkSpace, T: float = 1.0, ps=(2, 4), samples: int = 10_000,
                      seed: int = 0, intensities=(1, 2, 4), dt: float = 1e-2, chunk=1024, threads=1) -> Report:
    """Stochastic convolution version on matched seeds; the same constant must work."""
    grid = S.grid
    fields = np.asarray(fields, dtype=float)
    rep = Report("bjconv", samples=samples)
    for p in ps:
        xs, yc, yp = [], [], []
        for c in intensities:
            msc = ms.scaled(c)
            rhs = lp_class_functional(_field_integrand(fields), msc, (0.0, T), p, grid)

            def work(a, b, msc=msc, p=p, c=c):
                batch = sample_batch(msc, (0.0, T), b - a, seed, f"bj{c}", a)
                return _convolution_sups(S, fields, batch, msc, p, dt)

            conv, plain = run_chunks(samples, work, chunk, threads)
            rc = rep.add(f"p={p:g};intensity={c:g};convolution", conv.mean(), _stderr(conv), rhs)
            rp = rep.add(f"p={p:g};intensity={c:g};integral", plain.mean(), _stderr(plain), rhs)
            xs.append(c)
            yc.append(rc.ratio)
            yp.append(rp.ratio)
            rel = max(rc.relative_stderr, rp.relative_stderr)
            rep.check(f"convolution ratio <= integral ratio at p={p:g}, intensity {c:g}",
                      rc.ratio <= rp.ratio * (1 + SLACK * rel), f"{rc.ratio:.4g} vs {rp.ratio:.4g}")
        rep.series[f"convolution p={p:g}"] = (xs, yc)
        rep.series[f"integral p={p:g}"] = (xs, yp)
        finite = [y for y in yc if y > 0]
        spread = max(finite) / min(finite) if finite else 1.0
        rep.check(f"convolution ratios bounded at p={p:g}", all(math.isfinite(y) for y in yc) and spread <= 3.0,
                  f"max/min {spread:.3g}")
    return rep


def _sup_lp(grid, bp, p):
    a = lp_norms(grid.synthesize(bp.coeffs), grid.h, p)
    b = lp_norms(grid.synthesize(bp.pre), grid.h, p)
    return np.maximum(a, b).max(axis=1) ** p


def apriori_experiment(model: Model, x: Field, scalings=(0, 1, 2, 4), lams=(1e-2, 1e-3), T: float = 1.0,
                       dt: float = 1e-3, samples: int = 10_000, seed: int = 0, chunk=1024, threads=1) -> Report:
    """``E sup_t |u_lam|_{2d}^{2d} / (1 + |x|_{2d}^{2d})`` over data scalings and lam."""
    if model.noise.kind == "multiplicative":
        raise InvalidParameterError("the a priori estimate is stated for additive noise")
    grid = model.grid
    d = model.f.degree if model.f is not None else 1
    q = 2 * d
    rep = Report("apriori", samples=samples, log_x=False)
    table = {}
    for lam in lams:
        m = model.with_lam(lam)
        ys = []
        for s in scalings:
            xs = Field(grid, s * x.values)

            def work(a, b, m=m, xs=xs):
                jumps = _jumps_for(m, T, b - a, seed, a)
                return _sup_lp(grid, simulate_batch(m, xs, jumps, dt), q)

            vals = run_chunks(samples, work, chunk, threads)
            rhs = 1.0 + float(lp_norms(xs.values, grid.h, q)) ** q
            row = rep.add(f"lam={lam:g};scale={s:g}", vals.mean(), _stderr(vals), rhs)
            table[(lam, s)] = row
            ys.append(row.ratio)
        rep.series[f"lam={lam:g}"] = (list(scalings), ys)
    for s in scalings:
        rs = [table[(lam, s)].ratio for lam in lams]
        lo, hi = min(rs), max(rs)
        rep.check(f"ratio uniform in lam at scale {s:g}", hi <= 2 * lo or hi == 0, f"{lo:.4g}..{hi:.4g}")
    big = [s for s in scalings if s >= 1]
    for lam in lams:
        for a, b in zip(big, big[1:]):
            ra, rb = table[(lam, a)], table[(lam, b)]
            slack = SLACK * (ra.lhs_stderr / ra.rhs + rb.lhs_stderr / rb.rhs)
            rep.check(f"ratio non-increasing from scale {a:g} to {b:g} (lam={lam:g})", rb.ratio <= ra.ratio + slack,
                      f"{ra.ratio:.4g} -> {rb.ratio:.4g}")
    return rep


def stability_experiment(model: Model, x1: Field, noise1: NoiseModel, x2: Field, noise2: NoiseModel, T: float = 1.0,
                         dt: float = 1e-2, samples: int = 10_000, seed: int = 0, chunk=1024, threads=1) -> Report:
    """Nodewise ``e^{-2 eta t} E|u1 - u2|^2 <= |x1 - x2|^2 + int_0^t sum m |G1 - G2|^2``.

    Both solutions are driven by the same jumps (the two noise models must
    share the mark space).  The sup-in-time constant is reported as a value.
    """
    for nz in (noise1, noise2):
        if nz.kind == "multiplicative":
            raise InvalidParameterError("stability data must be additive noise coefficients")
    if len(noise1.marks) != len(noise2.marks) or noise1.marks.weights != noise2.marks.weights:
        if not (noise1.is_zero and noise2.is_zero):
            raise InvalidParameterError("synchronous coupling needs a common mark space")
    grid = model.grid
    m1, m2 = model.with_noise(noise1), model.with_noise(noise2)
    driver = m1 if not noise1.is_zero else m2

    def work(a, b):
        jumps = _jumps_for(driver, T, b - a, seed, a)
        u1 = simulate_batch(m1, x1, jumps, dt)
        u2 = simulate_batch(m2, x2, jumps, dt)
        d_uni = coeff_norms(u1.uniform_coeffs() - u2.uniform_coeffs()) ** 2
        both = np.maximum(coeff_norms(u1.coeffs - u2.coeffs), coeff_norms(u1.pre - u2.pre)) ** 2
        return d_uni, both.max(axis=1)

    d_uni, d_sup = run_chunks(samples, work, chunk, threads)
    times = uniform_nodes(0.0, T, dt)
    weight = np.exp(-2 * model.eta * times)
    lhs = weight * d_uni.mean(axis=0)
    lhs_se = weight * _stderr(d_uni)
    dx = float(grid.h * np.sum((x1.values - x2.values) ** 2))
    fields = [nz.coefficient.fields * nz.active[:, None] if not nz.is_zero else None for nz in (noise1, noise2)]
    if fields[0] is None and fields[1] is None:
        dg_rate = 0.0
    else:
        f1 = fields[0] if fields[0] is not None else np.zeros_like(fields[1])
        f2 = fields[1] if fields[1] is not None else np.zeros_like(fields[0])
        w = (noise1 if not noise1.is_zero else noise2).marks.weight_array
        dg_rate = float(np.dot(w, grid.h * np.sum((f1 - f2) ** 2, axis=1)))
    rhs = dx + dg_rate * times
    rep = Report("stability", samples=samples, log_x=False)
    for t, l, se, r in zip(times, lhs, lhs_se, rhs):
        rep.add(f"t={t:.6g}", l, se, r)
    viol = lhs - (rhs + SLACK * lhs_se)
    worst = int(np.argmax(viol))
    rep.check("e^{-2 eta t} E|u1-u2|^2 <= data increment at every node", np.all(viol <= 1e-14 * (1 + rhs)),
              f"worst margin {viol[worst]:.3g} at t={times[worst]:.4g}")
    rep.series["lhs"] = (times, lhs)
    rep.series["rhs"] = (times, rhs)
    total = rhs[-1]
    rep.values["sup_constant"] = float(d_sup.mean() / total) if total > 0 else 0.0
    rep.values["sup_constant_stderr"] = float(_stderr(d_sup) / total) if total > 0 else 0.0
    return rep


def solution_map_lipschitz(model: Model, x1: Field, direction: Field, scalings=(1.0, 0.5, 0.25), T: float = 1.0,
                           dt: float = 1e-2, samples: int = 10_000, seed: int = 0, chunk=1024, threads=1,
                           max_spread: float = 2.0) -> Report:
    """``||u(x1) - u(x2)||_2 / |x1 - x2|`` for ``x2 = x1 + s * direction``."""
    grid = model.grid
    rep = Report("lipschitz", samples=samples)
    ratios = []
    base = float(np.sqrt(grid.h * np.sum(direction.values**2)))
    if base == 0:
        raise InvalidParameterError("perturbation direction must be nonzero")
    for s in scalings:
        x2 = Field(grid, x1.values + s * direction.values)

        def work(a, b, x2=x2):
            jumps = _jumps_for(model, T, b - a, seed, a)
            u1 = simulate_batch(model, x1, jumps, dt)
            u2 = simulate_batch(model, x2, jumps, dt)
            both = np.maximum(coeff_norms(u1.coeffs - u2.coeffs), coeff_norms(u1.pre - u2.pre)) ** 2
            return both.max(axis=1)

        vals = run_chunks(samples, work, chunk, threads)
        mean = float(vals.mean())
        lhs = math.sqrt(mean)
        se = float(_stderr(vals)) / (2 * lhs) if lhs > 0 else 0.0
        row = rep.add(f"scale={s:g}", lhs, se, abs(s) * base)
        ratios.append(row.ratio)
    rep.series["ratio"] = (list(scalings), ratios)
    finite = all(math.isfinite(r) for r in ratios)
    pos = [r for r in ratios if r > 0]
    spread = max(pos) / min(pos) if pos else 1.0
    rep.check("Lipschitz ratio bounded across scalings", finite and spread <= max_spread, f"max/min {spread:.4g}")
    rep.values["lipschitz_estimate"] = max(ratios) if ratios else 0.0
    return rep

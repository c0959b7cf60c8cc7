"""Long-time behaviour: coupling decay, backward coupling, mixing, moment bounds, time averages.

Noise on negative times is an independent Poisson measure sampled directly
on the window ``(s, 0]``.  Because sampling is keyed by fixed time blocks,
the realization on ``(s1, 0]`` is exactly the restriction of the one on
``(s2, 0]`` for ``s2 < s1``; the reflection ``t -> -t`` in the usual
two-sided construction changes nothing in law and is not needed.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .exceptions import ContractViolationError, InvalidParameterError, PreconditionError
from .noise import JumpBatch, sample_batch
from .nonlinearity import strong_dissipativity_bound
from .paths import format_float, uniform_nodes
from .reports import Report
from .solver import DEFAULT_TOL, Model, _jumps_for, _stderr, coeff_norms, run_chunks, simulate_batch
from .spectral import Field, dirichlet_energy, lp_norms

__all__ = [
    "EmpiricalMeasure",
    "energy_distance",
    "dissipativity_margin",
    "fit_log_decay",
    "coupling_decay",
    "backward_sample",
    "mixing_check",
    "superlinearity_constants",
    "moment_ode_bound",
    "krylov_bogoliubov",
    "push_through",
    "linear_stationary_second_moment",
    "linear_coupling_rate",
]

SLACK = 3.0


@dataclass(eq=False)
class EmpiricalMeasure:
    """Equally weighted sample of states, kept as sine coefficients.

    ``groups`` labels the path each sample came from so that standard errors
    can be clustered (samples along one path are correlated).
    """

    model: Model
    coeffs: np.ndarray
    groups: np.ndarray | None = None

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 2 or self.coeffs.shape[0] == 0:
            raise InvalidParameterError("an empirical measure needs a nonempty (N, n) sample")
        if self.groups is None:
            self.groups = np.arange(self.coeffs.shape[0])

    def __len__(self):
        return self.coeffs.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.full(len(self), 1.0 / len(self))

    def norm_sq(self) -> np.ndarray:
        return coeff_norms(self.coeffs) ** 2

    def energy(self) -> np.ndarray:
        return dirichlet_energy(self.model.S, self.coeffs)

    def energy1(self) -> np.ndarray:
        """``E_1(u, u) = <A u, u> + |u|^2``."""
        return self.energy() + self.norm_sq()

    def mean_norm_sq(self) -> float:
        return float(np.mean(self.norm_sq()))

    def mean_energy(self) -> float:
        return float(np.mean(self.energy()))

    def histogram(self, edges) -> np.ndarray:
        counts, _ = np.histogram(np.sqrt(self.norm_sq()), bins=edges)
        return counts / len(self)

    def features(self, modes: int = 3) -> np.ndarray:
        """``|u|_2`` followed by the leading sine coefficients."""
        k = min(modes, self.coeffs.shape[1])
        return np.column_stack([np.sqrt(self.norm_sq()), self.coeffs[:, :k]])

    def thinned(self, size: int) -> "EmpiricalMeasure":
        if len(self) <= size:
            return self
        idx = np.linspace(0, len(self) - 1, size).round().astype(int)
        return EmpiricalMeasure(self.model, self.coeffs[idx], self.groups[idx])

    def to_csv(self, modes: int = 3) -> str:
        k = min(modes, self.coeffs.shape[1])
        buf = io.StringIO()
        buf.write("sample,norm_sq,energy," + ",".join(f"coef_{i}" for i in range(k)) + "\n")
        for i, (ns, en, c) in enumerate(zip(self.norm_sq(), self.energy(), self.coeffs[:, :k])):
            buf.write(f"{i},{format_float(ns)},{format_float(en)}," + ",".join(format_float(v) for v in c) + "\n")
        return buf.getvalue()


def _energy_distance_1d(x: np.ndarray, y: np.ndarray) -> float:
    def mean_abs_within(a):
        a = np.sort(a)
        n = a.size
        i = np.arange(1, n + 1)
        return 2.0 * np.sum((2 * i - n - 1) * a) / (n * n)

    def mean_abs_between(a, b):
        allv = np.concatenate([a, b])
        lab = np.concatenate([np.zeros(a.size), np.ones(b.size)])
        order = np.argsort(allv, kind="stable")
        v, lab = allv[order], lab[order]
        # sum over pairs (a_i, b_j) of |a_i - b_j| via running counts
        ca = np.cumsum(lab == 0)
        cb = np.cumsum(lab == 1)
        sa = np.cumsum(np.where(lab == 0, v, 0.0))
        sb = np.cumsum(np.where(lab == 1, v, 0.0))
        is_b = lab == 1
        total = np.sum(np.where(is_b, v * ca - sa, 0.0)) + np.sum(np.where(~is_b, v * cb - sb, 0.0))
        return total / (a.size * b.size)

    return float(2 * mean_abs_between(x, y) - mean_abs_within(x) - mean_abs_within(y))


def energy_distance(a: EmpiricalMeasure, b: EmpiricalMeasure, modes: int = 3) -> float:
    """Sum of one-dimensional energy distances over ``|u|_2`` and leading modes."""
    fa, fb = a.features(modes), b.features(modes)
    return float(sum(_energy_distance_1d(fa[:, j], fb[:, j]) for j in range(fa.shape[1])))


def dissipativity_margin(model: Model, beta0: float) -> tuple[float, float]:
    """``(omega_1, omega_1 - K)`` for the strong dissipativity condition."""
    if model.f is None:
        from .nonlinearity import MonotoneFunction

        f = MonotoneFunction((), model.eta)
    else:
        f = model.f
    if model.lam is not None and model.lam >= beta0:
        raise PreconditionError(f"lam={model.lam} must be below beta0={beta0}")
    shifted = type(f)(f.coefficients, model.eta, f.offset)
    omega1 = strong_dissipativity_bound(shifted, model.S, beta0)
    return omega1, omega1 - model.K


def fit_log_decay(times: np.ndarray, samples: np.ndarray, blocks: int = 20, floor: float = 1e-280):
    """Least-squares fit of ``log E X(t) = c + s t``; stderr by block jackknife over paths."""
    times = np.asarray(times, dtype=float)

    def fit(x):
        m = x.mean(axis=0)
        ok = m > floor
        if ok.sum() < 2:
            return math.nan, math.nan
        s, c = np.polyfit(times[ok], np.log(m[ok]), 1)
        return s, c

    slope, icept = fit(samples)
    P = samples.shape[0]
    B = min(blocks, P)
    if B < 2:
        return slope, icept, 0.0, 0.0
    edges = np.linspace(0, P, B + 1).astype(int)
    jk = []
    for i in range(B):
        keep = np.ones(P, bool)
        keep[edges[i] : edges[i + 1]] = False
        jk.append(fit(samples[keep]))
    jk = np.asarray(jk)
    se = np.sqrt((B - 1) / B * np.sum((jk - jk.mean(axis=0)) ** 2, axis=0))
    return slope, icept, float(se[0]), float(se[1])


def linear_coupling_rate(model: Model) -> float:
    """Decay rate of ``E|u(t;x) - u(t;y)|^2`` on mode 1 for the linear multiplicative model."""
    c = model.f.linear_coefficient if model.f is not None else 0.0
    if model.lam is not None:
        c = c / (1 + model.lam * c)
    noise = model.noise
    sigma_sq = 0.0
    if not noise.is_zero and noise.kind == "multiplicative":
        sigma_sq = float(np.dot(noise.effective_weights, noise.coefficient.sigma_array**2)) * noise.coefficient.lipschitz_g**2
    return 2 * model.S.mu1 + 2 * c - 2 * model.eta - sigma_sq


def linear_stationary_second_moment(model: Model) -> float:
    """``sum_k m sigma^2 b_k^2 / (2 a_k - m sigma^2)`` for ``g(r) = r + offset``.

    ``a_k = mu_k + c - eta`` and ``b_k`` are the sine coefficients of the
    constant offset field.  Valid when every denominator is positive.
    """
    noise = model.noise
    if noise.kind != "multiplicative" or noise.coefficient.g.name not in ("affine", "identity"):
        raise PreconditionError("the closed form needs g(r) = r + offset")
    c = model.f.linear_coefficient if model.f is not None else 0.0
    if model.f is not None and not model.f.is_linear:
        raise PreconditionError("the closed form needs a linear nonlinearity")
    if model.lam is not None:
        c = c / (1 + model.lam * c)
    grid = model.grid
    offset = noise.coefficient.g.fn(np.zeros(grid.n_interior))
    b = grid.analyze(offset)
    ms2 = float(np.dot(noise.effective_weights, noise.coefficient.sigma_array**2))
    a = model.S.eigenvalues + c - model.eta
    denom = 2 * a - ms2
    if np.any(denom <= 0):
        raise PreconditionError("second moment of the linear model is not stationary")
    return float(np.sum(ms2 * b**2 / denom))


def coupling_decay(model: Model, x: Field, y: Field, horizon: float = 2.0, dt: float = 1e-2, samples: int = 10_000,
                   seed: int = 0, beta0: float = 1e-3, oracle_rate: float | None = None, chunk=1024, threads=1) -> Report:
    """Synchronous coupling ``E|u(t;x) - u(t;y)|^2`` and its fitted exponential rate."""
    omega1, margin = dissipativity_margin(model, beta0)
    if margin <= 0:
        raise PreconditionError(f"strong dissipativity margin omega_1 - K = {margin:.4g} is not positive")
    grid = model.grid

    def work(a, b):
        jumps = _jumps_for(model, horizon, b - a, seed, a)
        u1 = simulate_batch(model, x, jumps, dt)
        u2 = simulate_batch(model, y, jumps, dt)
        return coeff_norms(u1.uniform_coeffs() - u2.uniform_coeffs()) ** 2

    d = run_chunks(samples, work, chunk, threads)
    times = uniform_nodes(0.0, horizon, dt)
    rep = Report("mixing", samples=samples, log_x=False)
    mean = d.mean(axis=0)
    se = _stderr(d)
    for t, m_, s_ in zip(times, mean, se):
        rep.add(f"t={t:.6g}", m_, s_, math.exp(-margin * t) * mean[0])
    rep.series["E|u1-u2|^2"] = (times, mean)
    rep.series["exp(-(omega1-K) t) |x-y|^2"] = (times, mean[0] * np.exp(-margin * times))
    d0 = float(grid.h * np.sum((x.values - y.values) ** 2))
    if d0 == 0:
        rep.check("identical data give zero difference", np.all(mean == 0))
        return rep
    slope, icept, s_se, i_se = fit_log_decay(times, d)
    rate = -slope
    rep.values.update(omega1=omega1, margin=margin, rate=rate, rate_stderr=s_se, intercept=icept, intercept_stderr=i_se)
    rep.check("fitted rate >= omega_1 - K", rate >= margin - SLACK * s_se, f"rate {rate:.5g} +- {s_se:.2g}, margin {margin:.5g}")
    rep.check("fitted intercept <= log |x-y|^2", icept <= math.log(d0) + SLACK * i_se + 1e-12,
              f"{icept:.5g} vs {math.log(d0):.5g}")
    if oracle_rate is not None:
        rel = abs(rate - oracle_rate) / oracle_rate
        rep.values["oracle_rate"] = oracle_rate
        rep.check("fitted rate matches the closed form within 5%", rel <= 0.05, f"{rate:.5g} vs {oracle_rate:.5g}")
    return rep


@dataclass
class BackwardResult:
    report: Report
    zeta: EmpiricalMeasure
    starts: tuple
    increments: np.ndarray
    displacements: np.ndarray


def _check_nested(realizations: dict):
    starts = sorted(realizations, reverse=True)
    for s1, s2 in zip(starts, starts[1:]):
        outer = realizations[s2]
        inner = realizations[s1]
        restricted = outer.restrict(s1, 0.0)
        if restricted.times.shape != inner.times.shape or not (
            np.array_equal(restricted.times, inner.times) and np.array_equal(restricted.marks, inner.marks)
        ):
            raise ContractViolationError(f"noise on ({s1}, 0] is not the restriction of the noise on ({s2}, 0]")


def backward_sample(model: Model, x: Field, starts=(-1.0, -2.0, -4.0, -8.0), dt: float = 1e-2, samples: int = 10_000,
                    seed: int = 0, beta0: float = 1e-3, y: Field | None = None, realizations: dict | None = None,
                    oracle_moment: float | None = None, tag="backward", chunk=1024, threads=1) -> BackwardResult:
    """``u(0; s, x)`` along ``s -> -infinity`` on nested noise.

    The Cauchy increments between consecutive starts are checked against
    ``e^{-(omega_1 - K)|s_1|} E|x - u_2(s_1)|^2``, where the last factor is
    estimated from the same ensembles: ``u_2(s_1)`` started at ``s_2 = 2 s_1``
    has the law of ``u(0; s_1, x)`` by stationarity of the noise.
    """
    starts = tuple(sorted((float(s) for s in starts), reverse=True))
    if any(s >= 0 for s in starts) or len(starts) < 2:
        raise InvalidParameterError("need at least two negative start times")
    omega1, margin = dissipativity_margin(model, beta0)
    if margin <= 0:
        raise PreconditionError(f"strong dissipativity margin omega_1 - K = {margin:.4g} is not positive")
    if realizations is not None:
        _check_nested(realizations)
    grid = model.grid
    s_min = starts[-1]
    y = x if y is None else y

    def work(a, b):
        if realizations is not None:
            deep = realizations[s_min]
            deep = JumpBatch(deep.t0, deep.t1, deep.times[a:b], deep.marks[a:b])
        else:
            deep = _jumps_for(model, 0.0, b - a, seed, a, start=s_min, tag=tag)
        finals = []
        for s in starts:
            jb = deep if s == s_min else deep.restrict(s, 0.0)
            finals.append(simulate_batch(model, x, jb, dt).final())
        other = simulate_batch(model, y, deep, dt).final() if y is not x else finals[-1]
        return np.stack(finals, axis=1), other

    finals, other = run_chunks(samples, work, chunk, threads)
    xc = x.coeffs
    incs = coeff_norms(finals[:, :-1] - finals[:, 1:]) ** 2
    disp = coeff_norms(finals - xc) ** 2
    rep = Report("backward", samples=samples)
    inc_mean, inc_se = incs.mean(axis=0), _stderr(incs)
    disp_mean = disp.mean(axis=0)
    for j, (s1, s2) in enumerate(zip(starts, starts[1:])):
        bound = math.exp(-margin * abs(s1)) * disp_mean[j]
        rep.add(f"s={s1:g}->{s2:g}", inc_mean[j], inc_se[j], bound)
        rep.check(f"Cauchy increment from s={s1:g} below exp(-(omega1-K)|s|) E|x-u(s)|^2",
                  inc_mean[j] <= bound + SLACK * inc_se[j], f"{inc_mean[j]:.4g} vs {bound:.4g}")
    rep.series["increment"] = ([abs(s) for s in starts[:-1]], inc_mean)
    rep.series["bound"] = ([abs(s) for s in starts[:-1]], [r.rhs for r in rep.rows])
    if y is not x:
        dxy = coeff_norms(finals[:, -1] - other) ** 2
        d0 = float(np.sum((x.coeffs - y.coeffs) ** 2))
        bound = math.exp(-margin * abs(s_min)) * d0
        rep.check("zeta independent of the initial condition", dxy.mean() <= bound + SLACK * _stderr(dxy),
                  f"{dxy.mean():.4g} vs {bound:.4g}")
    zeta = EmpiricalMeasure(model, finals[:, -1])
    m2 = zeta.norm_sq()
    rep.values.update(omega1=omega1, margin=margin, zeta_second_moment=float(m2.mean()),
                      zeta_second_moment_stderr=float(_stderr(m2)))
    half = len(m2) // 2
    if half >= 2:
        a_, b_ = m2[:half], m2
        rep.check("second moment of zeta finite and stable under sample doubling",
                  np.isfinite(b_.mean()) and abs(a_.mean() - b_.mean()) <= SLACK * (_stderr(a_) + _stderr(b_)) + 1e-300,
                  f"{a_.mean():.5g} vs {b_.mean():.5g}")
    if oracle_moment is not None:
        rel = abs(m2.mean() - oracle_moment) / oracle_moment
        rep.values["oracle_second_moment"] = oracle_moment
        rep.check("zeta second moment matches the closed form within 5%", rel <= 0.05,
                  f"{m2.mean():.5g} vs {oracle_moment:.5g}")
    return BackwardResult(rep, zeta, starts, inc_mean, disp_mean)


def _test_functions(clip: float, modes: int):
    fns = [("clipped |u|_2", lambda c: np.minimum(coeff_norms(c), clip), 1.0)]
    for k in range(modes):
        fns.append((f"coef_{k}", (lambda c, k=k: c[..., k]), 1.0))
    return fns


def mixing_check(model: Model, x: Field, nu: EmpiricalMeasure, rate: float, horizon: float = 1.0, dt: float = 1e-2,
                 samples: int = 10_000, seed: int = 0, clip: float = 1.0, modes: int = 2, chunk=1024, threads=1,
                 tag="mixing") -> Report:
    """``|E phi(u(t, x)) - nu(phi)| <= [phi] e^{-rate t / 2} E|x - y|_{y ~ nu} + 3 se`` on the uniform grid.

    ``rate`` is the decay rate of the squared coupling distance, so first
    moments of the distance decay at half that rate.
    """
    grid = model.grid
    fns = _test_functions(clip, modes)

    def work(a, b):
        jumps = _jumps_for(model, horizon, b - a, seed, a, tag=tag)
        c = simulate_batch(model, x, jumps, dt).uniform_coeffs()
        return np.stack([fn(c) for _, fn, _ in fns], axis=0).transpose(1, 0, 2)

    vals = run_chunks(samples, work, chunk, threads)
    times = uniform_nodes(0.0, horizon, dt)
    W = float(np.mean(coeff_norms(nu.coeffs - x.coeffs)))
    rep = Report("mixing_check", samples=samples, log_x=False)
    ok = True
    worst = -math.inf
    for j, (name, fn, lip) in enumerate(fns):
        target = fn(nu.coeffs)
        nu_mean, nu_se = float(target.mean()), float(_stderr(target))
        mean = vals[:, j].mean(axis=0)
        se = _stderr(vals[:, j])
        gap = np.abs(mean - nu_mean)
        bound = lip * np.exp(-0.5 * rate * times) * W
        slack = SLACK * np.sqrt(se**2 + nu_se**2)
        ok &= bool(np.all(gap <= bound + slack))
        worst = max(worst, float(np.max(gap - bound - slack)))
        every = max(1, times.size // 20)
        for t, g_, s_, b_ in zip(times[::every], gap[::every], se[::every], bound[::every]):
            rep.add(f"{name};t={t:.4g}", g_, s_, b_)
        rep.series[f"gap {name}"] = (times, gap)
        rep.series[f"bound {name}"] = (times, bound)
    rep.check("mixing bound holds for all test functions and times", ok, f"worst excess {worst:.3g}")
    rep.values.update(W=W, rate=rate)
    return rep


def superlinearity_constants(model: Model, probes: int = 2000, seed: int = 0):
    """``(b, alpha)`` with ``<f(u), u> >= b |u|^{2(1+alpha)} / 2`` on the grid.

    For ``f`` containing ``a_d r^d`` (d odd, d >= 3): ``alpha = (d-1)/2`` and
    ``b = 2 a_d (n h)^{-alpha}`` by Jensen on the discrete measure of mass
    ``n h``.  The calibration is verified on random probes; lower-order
    terms must be nonnegative on ``r f(r)``, which holds for this class.
    """
    f = model.f
    if f is None or f.degree < 3:
        raise PreconditionError("the comparison ODE needs a superlinear nonlinearity (degree >= 3)")
    if f.offset != 0:
        raise PreconditionError("the comparison ODE calibration assumes f(0) = 0")
    d = f.degree
    a_d = dict(f.coefficients)[d]
    grid = model.grid
    mass = grid.n_interior * grid.h
    alpha = (d - 1) / 2
    b = 2 * a_d * mass ** (-alpha)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((probes, grid.n_interior)) * rng.exponential(1.0, (probes, 1))
    lhs = grid.h * np.sum(f(u) * u, axis=1)
    rhs = 0.5 * b * lp_norms(u, grid.h, 2) ** (2 * (1 + alpha))
    if np.any(lhs < rhs * (1 - 1e-12) - 1e-300):
        raise PreconditionError("superlinearity calibration failed on the grid")
    return b, alpha


def moment_ode_bound(model: Model, x: Field, horizon: float = 2.0, dt: float = 1e-2, samples: int = 10_000,
                     seed: int = 0, eps: float = 1.0, chunk=1024, threads=1) -> Report:
    """MC ``E|u(t)|^2`` against the comparison ODE ``y' = a y - b y^{1+alpha} + c``."""
    b, alpha = superlinearity_constants(model)
    noise = model.noise
    K = model.K
    if noise.is_zero:
        a, c = 2 * model.eta, 0.0
    elif K == 0:
        a, c = 2 * model.eta, float(noise.square_mass(h=model.grid.h))
    else:
        a = 2 * model.eta + (1 + eps) * K
        c = (1 + 1 / eps) * float(noise.square_mass(h=model.grid.h))
    y0 = float(model.grid.h * np.sum(x.values**2))
    times = uniform_nodes(0.0, horizon, dt)

    def rhs(t, y):
        yy = max(y[0], 0.0)
        return [a * yy - b * yy ** (1 + alpha) + c]

    sol = solve_ivp(rhs, (0.0, horizon), [y0], method="LSODA", t_eval=times, rtol=1e-10, atol=1e-12)
    ybound = sol.y[0]

    def work(a_, b_):
        jumps = _jumps_for(model, horizon, b_ - a_, seed, a_)
        return coeff_norms(simulate_batch(model, x, jumps, dt).uniform_coeffs()) ** 2

    m2 = run_chunks(samples, work, chunk, threads)
    mean, se = m2.mean(axis=0), _stderr(m2)
    rep = Report("moment_ode", samples=samples, log_x=False)
    for t, m_, s_, y_ in zip(times, mean, se, ybound):
        rep.add(f"t={t:.6g}", m_, s_, y_)
    excess = mean - (ybound + SLACK * se)
    k = int(np.argmax(excess))
    rep.check("E|u(t)|^2 <= y(t) at every grid time", np.all(excess <= 1e-12 * (1 + ybound)),
              f"worst excess {excess[k]:.3g} at t={times[k]:.4g}")
    if c > 0:
        eq = brentq(lambda v: a * v - b * v ** (1 + alpha) + c, 0.0, 1e3 + (abs(a) + c) * 10 / max(b, 1e-12) + 10)
    else:
        eq = max(a / b, 0.0) ** (1 / alpha) if a > 0 else 0.0
    c_bound = max(y0, eq)
    rep.check("sup_t E|u(t)|^2 <= max(y(0), ODE equilibrium)", np.max(mean - SLACK * se) <= c_bound * (1 + 1e-12),
              f"{mean.max():.4g} vs {c_bound:.4g}")
    rep.series["E|u(t)|^2"] = (times, mean)
    rep.series["y(t)"] = (times, ybound)
    rep.values.update(a=a, b=b, alpha=alpha, c=c, y0=y0, equilibrium=eq, bound=c_bound)
    return rep


def push_through(model: Model, measure: EmpiricalMeasure, tau: float, dt: float, seed: int, tag="push", chunk=1024,
                 threads=1) -> EmpiricalMeasure:
    """Run every sample for time ``tau`` on fresh noise."""
    values = model.grid.synthesize(measure.coeffs)

    def work(a, b):
        jumps = _jumps_for(model, tau, b - a, seed, a, tag=tag)
        return simulate_batch(model, values[a:b], jumps, dt).final()

    out = run_chunks(len(measure), work, chunk, threads)
    return EmpiricalMeasure(model, out, measure.groups)


def _clustered_se(diff: np.ndarray, groups: np.ndarray) -> float:
    """Stderr of the mean of ``diff`` with samples clustered by group."""
    uniq, inv = np.unique(groups, return_inverse=True)
    sums = np.bincount(inv, weights=diff, minlength=uniq.size)
    n = diff.size
    G = uniq.size
    if G < 2:
        return 0.0
    mean = diff.mean()
    counts = np.bincount(inv, minlength=uniq.size)
    resid = sums - counts * mean
    return float(math.sqrt(G / (G - 1) * np.sum(resid**2)) / n)


def krylov_bogoliubov(model: Model, T: float = 1.0, multiples=(1, 2, 4), dt: float = 1e-2, samples: int = 1000,
                      seed: int = 0, tau: float = 1.0, push_samples: int = 4000, stride: float = 0.1,
                      radii=(10.0, 100.0), chunk=256, threads=1, x: Field | None = None):
    """Time-and-ensemble averages ``nu_n`` of ``u(s, x)`` over ``s in (0, n T]``.

    Returns ``(report, measures)``.  Checks: energy-statistic distance
    between consecutive measures decreasing; average ``E_1`` below the bound
    read off the energy identity; Markov tails; invariance of the deepest
    measure under the dynamics (paired, clustered by path).
    """
    grid = model.grid
    x = Field.zeros(grid) if x is None else x
    horizon = T * max(multiples)
    times = uniform_nodes(0.0, horizon, dt)
    step = max(1, int(round(stride / dt)))
    keep = np.arange(step, times.size, step)

    def work(a, b):
        jumps = _jumps_for(model, horizon, b - a, seed, a)
        c = simulate_batch(model, x, jumps, dt).uniform_coeffs()
        return c[:, keep]

    states = run_chunks(samples, work, chunk, threads)
    kt = times[keep]
    measures = []
    for mlt in multiples:
        sel = kt <= mlt * T + 1e-12
        c = states[:, sel].reshape(-1, grid.n_interior)
        groups = np.repeat(np.arange(samples), sel.sum())
        measures.append(EmpiricalMeasure(model, c, groups))
    rep = Report("kb", samples=samples, log_x=False)
    dists = [energy_distance(a.thinned(20000), b.thinned(20000)) for a, b in zip(measures, measures[1:])]
    for (m1, m2), dd in zip(zip(multiples, multiples[1:]), dists):
        rep.add(f"distance n={m1}T->{m2}T", dd, 0.0, 0.0)
    rep.check("energy-statistic distance between consecutive measures decreasing",
              all(b_ < a_ for a_, b_ in zip(dists, dists[1:])), ", ".join(f"{v:.3g}" for v in dists))
    # energy identity: E|u(t)|^2 + 2 E int <Au,u> <= |x|^2 + int (2 eta E|u|^2 + E sum m |G(u)|^2)
    m2_t = coeff_norms(states) ** 2
    mean_m2 = m2_t.mean(axis=0)
    ok_tight = True
    tight = []
    for mlt, nu in zip(multiples, measures):
        sel = kt <= mlt * T + 1e-12
        n_len = mlt * T
        g_mass = _noise_square_mass(model, states[:, sel])
        bound_e = (float(grid.h * np.sum(x.values**2)) + np.mean(2 * model.eta * mean_m2[sel] + g_mass) * n_len) / (2 * n_len)
        bound = bound_e + float(mean_m2[sel].mean())
        e1 = nu.energy1()
        avg = float(e1.mean())
        se = _clustered_se(e1 - avg, nu.groups)
        rep.add(f"energy1 n={mlt}T", avg, se, bound)
        ok_tight &= avg <= bound + SLACK * se
        tight.append(f"{avg:.4g}<={bound:.4g}")
        tails = []
        for R in radii:
            tail = float(np.mean(e1 > R))
            tails.append(tail)
            rep.check(f"Markov tail nu_{mlt}T(E_1 > {R:g}) <= avg/R", tail <= avg / R + 1e-15, f"{tail:.3g} vs {avg / R:.3g}")
        rep.check(f"tail mass non-increasing in R at n={mlt}T", all(b_ <= a_ for a_, b_ in zip(tails, tails[1:])))
    rep.check("energy average bounded uniformly in n", ok_tight, ", ".join(tight))
    deep = measures[-1]
    idx = np.linspace(0, len(deep) - 1, min(push_samples, len(deep))).round().astype(int)
    base = EmpiricalMeasure(model, deep.coeffs[idx], deep.groups[idx])
    pushed = push_through(model, base, tau, dt, seed, tag="push", chunk=1024, threads=threads)
    inv_ok, detail = _invariance_checks(base, pushed)
    rep.check("invariance push-through within 3 stderr", inv_ok, detail)
    rep.series["distance"] = (list(multiples[1:]), dists)
    rep.values.update(distances=dists)
    return rep, measures


def _noise_square_mass(model: Model, coeffs: np.ndarray) -> np.ndarray:
    noise = model.noise
    if noise.is_zero:
        return np.zeros(coeffs.shape[1])
    grid = model.grid
    if noise.kind == "additive":
        return np.full(coeffs.shape[1], noise.square_mass(h=grid.h))
    vals = grid.synthesize(coeffs)
    return np.mean(noise.square_mass(vals, grid.h), axis=0)


def _invariance_checks(before: EmpiricalMeasure, after: EmpiricalMeasure, bins: int = 10):
    details = []
    ok = True
    for name, fa, fb in (
        ("mean |u|^2", before.norm_sq(), after.norm_sq()),
        ("energy mean", before.energy(), after.energy()),
    ):
        diff = fb - fa
        se = _clustered_se(diff - diff.mean(), before.groups)
        good = abs(diff.mean()) <= SLACK * se
        ok &= good
        details.append(f"{name} shift {diff.mean():.3g} (se {se:.2g})")
    r_a, r_b = np.sqrt(before.norm_sq()), np.sqrt(after.norm_sq())
    edges = np.quantile(np.concatenate([r_a, r_b]), np.linspace(0, 1, bins + 1))
    edges[-1] += 1e-12
    ia = np.clip(np.searchsorted(edges, r_a, side="right") - 1, 0, bins - 1)
    ib = np.clip(np.searchsorted(edges, r_b, side="right") - 1, 0, bins - 1)
    tv = 0.0
    se_sum = 0.0
    for k in range(bins):
        d = (ib == k).astype(float) - (ia == k).astype(float)
        tv += 0.5 * abs(d.mean())
        se_sum += 0.5 * _clustered_se(d - d.mean(), before.groups)
    good = tv <= SLACK * se_sum
    ok &= good
    details.append(f"histogram TV {tv:.3g} (bound {SLACK * se_sum:.2g})")
    return bool(ok), "; ".join(details)

"""Pathwise mild solvers on jump-adapted grids.

Between consecutive nodes the linear part is propagated exactly on the sine
modes, and the drift convolution uses a product trapezoid rule: with
``z = mu h``,

    u_{k+1} = e^{-z} u_k + h psi(z) F(u_k) + h (phi1(z) - psi(z)) F(u_{k+1}-)

which is the trapezoid rule when ``mu = 0`` and stays second order for stiff
modes.  The implicit endpoint is resolved by Picard iteration on every step.
At a jump node the hard update ``u(tau) = u(tau-) + G(tau, z, u(tau-))`` is
applied, so the mild formula is exact across jumps.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ContractionError, InvalidParameterError, NonconvergenceError, PreconditionError
from .noise import AdditiveNoise, JumpBatch, MarkSpace, NoiseModel, PathRealization, sample_batch, stochastic_convolution
from .nonlinearity import MonotoneFunction
from .paths import BatchPath, Schedule, SolutionPath, TimeGrid, uniform_nodes
from .spectral import Field, SemigroupOperator, SpatialGrid

__all__ = [
    "Model",
    "march",
    "run_chunks",
    "simulate",
    "simulate_batch",
    "solve_deterministic_mild",
    "solve_additive_regularized",
    "solve_additive",
    "LimitResult",
    "solve_generalized",
    "GeneralizedResult",
    "solve_multiplicative",
    "PicardResult",
    "choose_alpha",
    "EnsembleNorms",
    "ensemble_norms",
    "mild_residual",
    "coeff_norms",
]

DEFAULT_TOL = 1e-10
PICARD_BUDGET = 200
CONTRACTION_CONSTANT = 146.0


def coeff_norms(c: np.ndarray) -> np.ndarray:
    """L_2(D) norms from sine coefficients (the basis is orthonormal)."""
    return np.sqrt(np.einsum("...k,...k->...", c, c))


def _weights(mu: np.ndarray, h: np.ndarray):
    z = h[:, None] * mu[None, :]
    E = np.exp(-z)
    phi1 = np.ones_like(z)
    big = z > 0
    phi1[big] = -np.expm1(-z[big]) / z[big]
    psi = np.empty_like(z)
    small = z < 0.02
    zs = z[small]
    psi[small] = 0.5 - zs / 3 + zs**2 / 8 - zs**3 / 30 + zs**4 / 144 - zs**5 / 840
    zb = z[~small]
    psi[~small] = (1.0 - E[~small] * (1.0 + zb)) / zb**2
    hh = h[:, None]
    return E, hh * psi, hh * (phi1 - psi)


@dataclass(frozen=True, eq=False)
class Model:
    """Generator, reaction ``eta u - f_lam(u)`` and noise; ``lam=None`` uses f itself."""

    S: SemigroupOperator
    f: MonotoneFunction | None = None
    lam: float | None = None
    noise: NoiseModel = field(default_factory=NoiseModel.zero)
    eta: float | None = None

    def __post_init__(self):
        if self.lam is not None and not self.lam > 0:
            raise InvalidParameterError(f"Yosida parameter must be positive, got {self.lam}")
        if self.eta is None:
            object.__setattr__(self, "eta", self.f.eta if self.f is not None else 0.0)

    @property
    def grid(self) -> SpatialGrid:
        return self.S.grid

    @property
    def K(self) -> float:
        return self.noise.K

    def with_lam(self, lam) -> "Model":
        return replace(self, lam=lam)

    def with_noise(self, noise: NoiseModel) -> "Model":
        return replace(self, noise=noise)

    def reaction(self, u: np.ndarray) -> np.ndarray:
        out = self.eta * u
        if self.f is not None and self.f.coefficients or (self.f is not None and self.f.offset):
            fu = self.f(u) if self.lam is None else self.f.yosida(self.lam)(u)
            out = out - fu
        return out

    @property
    def reaction_lipschitz(self) -> float:
        """Lipschitz bound of the reaction, finite only for the regularized drift."""
        if self.f is None or not self.f.coefficients:
            return abs(self.eta)
        if self.f.is_linear:
            return abs(self.eta) + self.f.linear_coefficient
        return abs(self.eta) + (1.0 / self.lam if self.lam else math.inf)


def march(mu, nodes, c0, drift, jump=None, is_jump=None, marks=None, tol=DEFAULT_TOL, budget=PICARD_BUDGET):
    """Batched product-trapezoid march over per-path node lists.

    ``drift(r, t, c, left)`` returns coefficient drift at node r for states c
    (``left`` is True for the step's left endpoint, i.e. the post-jump state
    at r, and False for the left limit at r).  ``jump(r, t, marks, c_pre)``
    returns coefficient increments.  Returns ``(post, pre)`` arrays (P, L, n).
    """
    P, L = nodes.shape
    n = mu.size
    post = np.empty((P, L, n))
    pre = np.empty((P, L, n))
    c = np.broadcast_to(np.asarray(c0, dtype=float), (P, n)).copy()
    post[:, 0] = pre[:, 0] = c
    f_left = drift(0, nodes[:, 0], c, True)
    for r in range(1, L):
        t = nodes[:, r]
        h = t - nodes[:, r - 1]
        E, W0, W1 = _weights(mu, h)
        base = E * c + W0 * f_left
        y = base + W1 * f_left
        # converged paths are frozen so a path's result never depends on its batch mates
        active = np.ones(P, dtype=bool)
        for _ in range(budget):
            y_new = base + W1 * drift(r, t, y, False)
            res = coeff_norms(y_new - y)
            y = np.where(active[:, None], y_new, y)
            active &= res > tol * (1.0 + coeff_norms(y))
            if not active.any():
                break
        else:
            raise NonconvergenceError(f"Picard step at t={float(np.max(t)):.6g} did not converge", float(np.max(res)))
        pre[:, r] = y
        if jump is not None and is_jump[:, r].any():
            y = y + jump(r, t, marks[:, r], y)
        post[:, r] = y
        c = y
        f_left = drift(r, t, c, True)
    return post, pre


def _model_drift(model: Model, frozen=None):
    grid = model.grid

    def drift(r, t, c, left):
        u = grid.synthesize(c)
        val = model.reaction(u)
        if not model.noise.is_zero:
            if frozen is None:
                v = u
            else:
                v = grid.synthesize(frozen[0][:, r] if left else frozen[1][:, r])
            val = val - model.noise.compensator_values(t, v)
        return grid.analyze(val)

    return drift


def _model_jump(model: Model, frozen=None):
    grid = model.grid

    def jump(r, t, marks, c_pre):
        v = c_pre if frozen is None else frozen[1][:, r]
        return grid.analyze(model.noise.jump_values(t, marks, grid.synthesize(v)))

    return jump


def simulate_batch(model: Model, u0, jumps: JumpBatch, dt: float, tol=DEFAULT_TOL, frozen=None) -> BatchPath:
    """March one batch of paths on its jump-adapted schedules.

    ``u0`` is a Field, a values vector, or a (P, n) array of values.
    ``frozen=(post, pre)`` freezes the noise coefficient along a given path
    (the map whose fixed point is the multiplicative solution).
    """
    grid = model.grid
    uniform = uniform_nodes(jumps.t0, jumps.t1, dt)
    schedule = Schedule.build(uniform, jumps.times, jumps.marks)
    vals = u0.values if isinstance(u0, Field) else np.asarray(u0, dtype=float)
    c0 = grid.analyze(vals)
    post, pre = march(
        model.S.eigenvalues,
        schedule.nodes,
        c0,
        _model_drift(model, frozen),
        None if model.noise.is_zero else _model_jump(model, frozen),
        schedule.is_jump,
        schedule.marks,
        tol,
    )
    return BatchPath(grid, schedule, post, pre)


def run_chunks(n_paths: int, fn, chunk: int = 1024, threads: int = 1):
    """Evaluate ``fn(start, stop)`` over fixed-size chunks and concatenate in order.

    Chunk boundaries do not depend on ``threads``, so results are identical
    for any worker count.  ``fn`` may return an array or a tuple of arrays.
    """
    if n_paths < 1:
        raise InvalidParameterError("need at least one path")
    bounds = [(a, min(a + chunk, n_paths)) for a in range(0, n_paths, chunk)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: fn(*b), bounds))
    else:
        parts = [fn(*b) for b in bounds]
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)


def simulate(model: Model, u0, horizon: float, dt: float, n_paths: int = 1, seed: int = 0, *, start=0.0,
             tag="noise", first=0, tol=DEFAULT_TOL) -> BatchPath:
    """Sample jumps for ``n_paths`` scenarios and solve; keeps every node in memory."""
    jumps = sample_batch(model.noise.marks, (start, horizon), n_paths, seed, tag, first) if not model.noise.is_zero \
        else JumpBatch.empty(n_paths, start, horizon)
    return simulate_batch(model, u0, jumps, dt, tol)


def solve_deterministic_mild(S: SemigroupOperator, fmap, u0: Field, tg: TimeGrid, tol=DEFAULT_TOL) -> SolutionPath:
    """Mild solution of ``u' = -A u + fmap(t, u)`` on the grid nodes.

    ``fmap(t, Field) -> Field`` must be Lipschitz in the field.  Each step's
    implicit trapezoid endpoint is a fixed point found by Picard iteration.
    """
    grid = S.grid
    nodes = tg.nodes[None, :]

    def drift(r, t, c, left):
        return grid.analyze(fmap(float(t[0]), Field.from_coeffs(grid, c[0])).values)[None, :]

    post, pre = march(S.eigenvalues, nodes, u0.coeffs[None, :], drift, tol=tol)
    return SolutionPath(grid, tg.nodes, grid.synthesize(post[0]), grid.synthesize(pre[0]), np.zeros(nodes.shape[1], bool))


def solve_additive_regularized(model: Model, pr: PathRealization, u0: Field, dt: float, tol=DEFAULT_TOL) -> SolutionPath:
    """Additive noise, regularized drift, by subtracting the stochastic convolution.

    ``G_A`` is computed first, then ``y = u - G_A`` solves the random PDE
    ``y' = -A y + eta (y + G_A) - f_lam(y + G_A)`` with continuous paths.
    """
    if model.lam is None:
        raise InvalidParameterError("the regularized solver needs lam > 0")
    if model.noise.kind == "multiplicative":
        raise InvalidParameterError("convolution subtraction needs additive noise")
    grid = model.grid
    tg = TimeGrid(pr.t1, dt, tuple(pr.times), pr.t0)
    nodes = tg.nodes
    if model.noise.is_zero:
        ga_post = ga_pre = np.zeros((nodes.size, grid.n_interior))
        is_jump = np.zeros(nodes.size, bool)
    else:
        coef = model.noise.coefficient
        act = model.noise.active

        def g(t, i):
            return coef.values(np.asarray(t, dtype=float), i) if act[i] else np.zeros(grid.n_interior)

        ga = stochastic_convolution(model.S, g, pr, model.noise.marks, nodes, time_constant=coef.time_constant)
        ga_post, ga_pre, is_jump = ga.states, ga.left_limits, ga.is_jump

    def drift(r, t, c, left):
        u = grid.synthesize(c[0]) + (ga_post[r] if left else ga_pre[r])
        return grid.analyze(model.reaction(u))[None, :]

    y0 = u0.coeffs - grid.analyze(ga_post[0])
    post, pre = march(model.S.eigenvalues, nodes[None, :], y0[None, :], drift, tol=tol)
    y_post = grid.synthesize(post[0])
    y_pre = grid.synthesize(pre[0])
    return SolutionPath(grid, nodes, y_post + ga_post, y_pre + ga_pre, is_jump)


@dataclass
class LimitResult:
    """Solution at the smallest lam plus Cauchy increments along the halving sequence."""

    lams: np.ndarray
    increments: np.ndarray
    increment_stderr: np.ndarray
    final: np.ndarray
    path: BatchPath | None = None

    @property
    def rates(self) -> np.ndarray:
        """``E sup |u_lam - u_next|^2 / lam`` per consecutive pair."""
        return self.increments / self.lams[:-1]


def _sup_sq_diff(a: BatchPath, b: BatchPath) -> np.ndarray:
    d_post = coeff_norms(a.coeffs - b.coeffs) ** 2
    d_pre = coeff_norms(a.pre - b.pre) ** 2
    return np.maximum(d_post, d_pre).max(axis=1)


def solve_additive(model: Model, u0, horizon: float, dt: float, lam_sequence, n_paths: int = 1, seed: int = 0, *,
                   tol=DEFAULT_TOL, chunk=1024, threads=1, keep_path=False) -> LimitResult:
    """Solve along a decreasing lam sequence on shared noise; report Cauchy increments."""
    lams = np.asarray(lam_sequence, dtype=float)
    if lams.size < 2 or np.any(np.diff(lams) >= 0) or np.any(lams <= 0):
        raise InvalidParameterError("lam_sequence must be positive and strictly decreasing, length >= 2")

    def work(a, b):
        jumps = _jumps_for(model, horizon, b - a, seed, a)
        init = _slice_u0(u0, a, b)
        prev = simulate_batch(model.with_lam(lams[0]), init, jumps, dt, tol)
        incs = []
        for lam in lams[1:]:
            cur = simulate_batch(model.with_lam(lam), init, jumps, dt, tol)
            incs.append(_sup_sq_diff(prev, cur))
            prev = cur
        return np.stack(incs, axis=1), prev.final()

    incs, final = run_chunks(n_paths, work, chunk, threads)
    path = simulate(model.with_lam(lams[-1]), _slice_u0(u0, 0, n_paths), horizon, dt, n_paths, seed, tol=tol) if keep_path else None
    return LimitResult(lams, incs.mean(axis=0), _stderr(incs), final, path)


def _stderr(x: np.ndarray, axis=0) -> np.ndarray:
    n = x.shape[axis]
    if n < 2:
        return np.zeros_like(np.mean(x, axis=axis))
    return np.std(x, axis=axis, ddof=1) / math.sqrt(n)


def _jumps_for(model: Model, horizon, count, seed, first, start=0.0, tag="noise") -> JumpBatch:
    if model.noise.is_zero:
        return JumpBatch.empty(count, start, horizon)
    return sample_batch(model.noise.marks, (start, horizon), count, seed, tag, first)


def _slice_u0(u0, a, b):
    if isinstance(u0, Field):
        return u0
    arr = np.asarray(u0, dtype=float)
    return arr[a:b] if arr.ndim == 2 else arr


@dataclass
class GeneralizedResult:
    levels: tuple
    increments: np.ndarray
    increment_stderr: np.ndarray
    data_increments: np.ndarray
    constant: float
    path: BatchPath


def _cutoff_noise(noise: NoiseModel, level: float, keep: int) -> NoiseModel:
    c = noise.coefficient
    fields = np.clip(c.fields, -level, level)
    active = noise.active & noise.marks.restricted(keep)
    return NoiseModel(noise.marks, AdditiveNoise(c.grid, fields), active)


def solve_generalized(model: Model, x: Field, horizon: float, dt: float, cutoff_levels, n_paths: int = 1, seed: int = 0,
                      tol=DEFAULT_TOL) -> GeneralizedResult:
    """Generalized mild solution as the limit of cut-off problems.

    Level n clamps the data to [-n, n] and keeps the marks of Z_n (the
    mark space's truncation sequence, or all marks when none is given).
    Successive levels share the noise realization.  The reported constant is
    the largest ratio of solution increments to data increments.
    """
    levels = tuple(float(v) for v in cutoff_levels)
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise InvalidParameterError("cutoff levels must be increasing")
    noise = model.noise
    if not noise.is_zero and (noise.kind != "additive" or not noise.coefficient.time_constant):
        raise InvalidParameterError("cut-off approximation supports time-constant additive noise")
    ms = noise.marks
    trunc = ms.truncation or (len(ms),) * len(levels)
    trunc = tuple(trunc[min(i, len(trunc) - 1)] for i in range(len(levels)))
    jumps = _jumps_for(model, horizon, n_paths, seed, 0)
    grid = model.grid
    paths, data = [], []
    for level, keep in zip(levels, trunc):
        xn = np.clip(x.values, -level, level)
        nz = noise if noise.is_zero else _cutoff_noise(noise, level, keep)
        paths.append(simulate_batch(model.with_noise(nz), xn, jumps, dt, tol))
        data.append((xn, nz))
    incs, incs_se, dinc = [], [], []
    for (pa, (xa, na)), (pb, (xb, nb)) in zip(zip(paths, data), zip(paths[1:], data[1:])):
        d = _sup_sq_diff(pa, pb)
        incs.append(d.mean())
        incs_se.append(float(_stderr(d)))
        dx = float(np.sum((xa - xb) ** 2) * grid.h)
        dg = 0.0
        if not noise.is_zero:
            fa = na.coefficient.fields * na.active[:, None]
            fb = nb.coefficient.fields * nb.active[:, None]
            dg = horizon * float(np.dot(ms.weight_array, grid.h * np.sum((fa - fb) ** 2, axis=1)))
        dinc.append(dx + dg)
    incs = np.asarray(incs)
    dinc = np.asarray(dinc)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(dinc > 0, incs / np.where(dinc > 0, dinc, 1.0), 0.0)
    return GeneralizedResult(levels, incs, np.asarray(incs_se), dinc, float(ratios.max()) if ratios.size else 0.0, paths[-1])


def choose_alpha(eta: float, K: float, T: float) -> float:
    """Smallest alpha >= 0 with ``146 K T exp(2 (eta - alpha) T) <= 1/2``."""
    if not T > 0:
        raise InvalidParameterError(f"horizon must be positive, got {T}")
    if K <= 0:
        return max(0.0, float(eta))
    return max(0.0, float(eta) + math.log(2.0 * CONTRACTION_CONSTANT * K * T) / (2.0 * T))


@dataclass
class PicardResult:
    path: BatchPath
    iterations: int
    increments: list
    ratios: list
    alpha: float


def _weighted_sup(a: BatchPath, b_post, b_pre, alpha) -> float:
    w = np.exp(-alpha * a.schedule.nodes)
    d = np.maximum(coeff_norms(a.coeffs - b_post), coeff_norms(a.pre - b_pre)) * w
    return float(np.sqrt(np.mean(d.max(axis=1) ** 2)))


def solve_multiplicative(model: Model, u0, jumps: JumpBatch, dt: float, alpha: float | None = None, tol=1e-8,
                         init="frozen", budget=100, step_tol=DEFAULT_TOL) -> PicardResult:
    """Fixed point of the frozen-coefficient map in the ensemble norm ``||.||_{2,alpha}``.

    ``init="frozen"`` starts from the constant path u0, ``"deterministic"``
    from the noise-free solution on the same schedule; an explicit
    ``(post, pre)`` pair is also accepted.  Raises ContractionError when an
    increment ratio reaches 1 and NonconvergenceError when the budget runs out.
    """
    T = jumps.t1 - jumps.t0
    if alpha is None:
        alpha = choose_alpha(model.eta, model.K, T)
    grid = model.grid
    uniform = uniform_nodes(jumps.t0, jumps.t1, dt)
    schedule = Schedule.build(uniform, jumps.times, jumps.marks)
    vals = u0.values if isinstance(u0, Field) else np.asarray(u0, dtype=float)
    P, L = schedule.nodes.shape
    c0 = np.broadcast_to(grid.analyze(vals), (P, grid.n_interior))
    if isinstance(init, tuple):
        v_post, v_pre = init
    elif init == "frozen":
        v_post = np.repeat(c0[:, None, :], L, axis=1)
        v_pre = v_post
    elif init == "deterministic":
        det = simulate_batch(model.with_noise(NoiseModel.zero()), vals, jumps, dt, step_tol)
        v_post, v_pre = det.coeffs, det.pre
    else:
        raise InvalidParameterError(f"unknown Picard initialization {init!r}")
    t_nodes = schedule.nodes - jumps.t0
    increments, ratios = [], []
    current = None
    for k in range(1, budget + 1):
        current = simulate_batch(model, vals, jumps, dt, step_tol, frozen=(v_post, v_pre))
        current_w = BatchPath(grid, replace(schedule, nodes=t_nodes), current.coeffs, current.pre)
        d = _weighted_sup(current_w, v_post, v_pre, alpha)
        increments.append(d)
        if len(increments) >= 2:
            prev = increments[-2]
            ratio = d / prev if prev > 0 else 0.0
            ratios.append(ratio)
            if k >= 3 and ratio >= 1.0 and d > 1e3 * np.finfo(float).eps * (1 + np.abs(current.coeffs).max()):
                raise ContractionError(
                    f"Picard increments stopped contracting (ratio {ratio:.3g} at iteration {k}); increase alpha", d)
        v_post, v_pre = current.coeffs, current.pre
        if d < tol and k >= 2:
            return PicardResult(current, k - 1, increments, ratios, alpha)
    raise NonconvergenceError("Picard iteration budget exhausted", increments[-1])


@dataclass
class EnsembleNorms:
    """Monte Carlo estimates of ``|[u]|_p``, ``||u||_p`` and ``||u||_{p,alpha}`` in the L_2(D) state norm."""

    count: int
    p: float
    alpha: float
    pointwise: float
    pointwise_stderr: float
    sup: float
    sup_stderr: float
    weighted: float
    weighted_stderr: float


def _root_with_se(samples: np.ndarray, p: float):
    m = float(samples.mean())
    se = float(_stderr(samples)) if samples.size > 1 else 0.0
    if m <= 0:
        return 0.0, se ** (1.0 / p)
    return m ** (1.0 / p), se * m ** (1.0 / p - 1.0) / p


def ensemble_norms(paths, p: float = 2.0, alpha: float = 0.0) -> EnsembleNorms:
    """Norm estimates from a BatchPath or a list of SolutionPaths on a common grid."""
    if isinstance(paths, BatchPath):
        times = paths.schedule.nodes - paths.schedule.uniform[0]
        n_post = coeff_norms(paths.coeffs)
        n_pre = coeff_norms(paths.pre)
        uni = coeff_norms(paths.uniform_coeffs())
    else:
        paths = list(paths)
        if not paths:
            raise InvalidParameterError("empty ensemble")
        lengths = {len(q) for q in paths}
        if len(lengths) != 1:
            raise InvalidParameterError("paths must share a time grid for ensemble norms")
        h = paths[0].grid.h
        times = np.stack([q.times - q.times[0] for q in paths])
        n_post = np.stack([np.sqrt(h * np.sum(q.states**2, axis=1)) for q in paths])
        n_pre = np.stack([np.sqrt(h * np.sum(q.left_limits**2, axis=1)) for q in paths])
        uni = n_post
    if n_post.shape[0] == 0:
        raise InvalidParameterError("empty ensemble")
    both = np.maximum(n_post, n_pre)
    sup_s = both.max(axis=1) ** p
    w_s = (both * np.exp(-alpha * times)).max(axis=1) ** p
    per_t = (uni**p).mean(axis=0)
    k = int(np.argmax(per_t))
    pw, pw_se = _root_with_se(uni[:, k] ** p, p)
    s, s_se = _root_with_se(sup_s, p)
    w, w_se = _root_with_se(w_s, p)
    return EnsembleNorms(int(n_post.shape[0]), p, alpha, pw, pw_se, s, s_se, w, w_se)


def mild_residual(model: Model, path: SolutionPath, pr: PathRealization | None = None) -> float:
    """Largest L_2 gap between the path and the right side of the mild formula.

    The right side is assembled non-recursively: every step's quadrature
    contribution and every jump is propagated from its own node to each later
    node with the exact semigroup, using the path's own states in the drift.
    """
    grid = model.grid
    mu = model.S.eigenvalues
    t = path.times
    c_post = grid.analyze(path.states)
    c_pre = grid.analyze(path.left_limits)
    drift = _model_drift(model)
    L = t.size
    local = np.zeros((L, grid.n_interior))
    if L > 1:
        _, W0, W1 = _weights(mu, np.diff(t))
        f_left = drift(0, t[:-1], c_post[:-1], True)
        f_right = drift(0, t[1:], c_pre[1:], False)
        local[1:] = W0 * f_left + W1 * f_right
    if pr is not None and pr.count and not model.noise.is_zero:
        idx = np.searchsorted(t, pr.times)
        local[idx] += grid.analyze(model.noise.jump_values(pr.times, pr.marks, path.left_limits[idx]))
    worst = 0.0
    for k in range(L):
        decay = np.exp(-np.outer(t[k] - t[: k + 1], mu))
        rhs = np.exp(-(t[k] - t[0]) * mu) * c_post[0] + np.sum(decay[1:] * local[1 : k + 1], axis=0)
        worst = max(worst, float(np.sqrt(np.sum((rhs - c_post[k]) ** 2))))
    return worst

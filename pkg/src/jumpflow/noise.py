"""Poisson random measures on [t0, t1] x Z with a finite, atomic mark space.

Jumps are sampled in fixed-length time blocks, each block from its own
counter-based stream.  Sampling a window therefore returns exactly the
restriction of any larger window's sample, which is what backward coupling
needs (nested noise on [s, 0] for s -> -infinity).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as rngmod
from .exceptions import InvalidParameterError
from .paths import SolutionPath, format_float, uniform_nodes
from .spectral import Field, SemigroupOperator, SpatialGrid, lp_norms

__all__ = [
    "MarkSpace",
    "ScalarMap",
    "SCALAR_MAPS",
    "AdditiveNoise",
    "MultiplicativeNoise",
    "NoiseModel",
    "PathRealization",
    "JumpBatch",
    "sample_poisson",
    "sample_path",
    "sample_batch",
    "compensated_integral",
    "compensated_integrals",
    "stochastic_convolution",
    "lp_class_functional",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_MAX_PANELS = 512


@dataclass(frozen=True)
class MarkSpace:
    """M weighted atoms.  ``truncation`` lists nested prefix sizes realizing Z_n."""

    weights: tuple = ()
    labels: tuple = ()
    truncation: tuple = ()

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if any(not (x > 0 and math.isfinite(x)) for x in w):
            raise InvalidParameterError("mark weights must be positive and finite")
        labels = tuple(self.labels) if self.labels else tuple(range(len(w)))
        if len(labels) != len(w):
            raise InvalidParameterError("one label per mark weight")
        trunc = tuple(int(k) for k in self.truncation)
        if trunc and (list(trunc) != sorted(trunc) or trunc[0] < 1 or trunc[-1] > len(w)):
            raise InvalidParameterError("truncation sizes must be nondecreasing within 1..M")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "truncation", trunc)

    def __len__(self):
        return len(self.weights)

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def total_mass(self) -> float:
        return float(sum(self.weights))

    @property
    def probabilities(self) -> np.ndarray:
        return self.weight_array / self.total_mass

    def truncation_masses(self) -> list[float]:
        return [float(sum(self.weights[:k])) for k in self.truncation]

    def scaled(self, factor: float) -> "MarkSpace":
        return MarkSpace(tuple(w * factor for w in self.weights), self.labels, self.truncation)

    def restricted(self, k: int) -> np.ndarray:
        """Indicator of Z_k, the first k marks."""
        ind = np.zeros(len(self), dtype=bool)
        ind[:k] = True
        return ind


@dataclass(frozen=True)
class ScalarMap:
    name: str
    fn: Callable
    lipschitz: float


def _affine(offset):
    return lambda r: r + offset


SCALAR_MAPS = {
    "identity": lambda offset: ScalarMap("identity", lambda r: r, 1.0),
    "affine": lambda offset: ScalarMap("affine", _affine(offset), 1.0),
    "tanh": lambda offset: ScalarMap("tanh", np.tanh, 1.0),
    "sin": lambda offset: ScalarMap("sin", np.sin, 1.0),
    "constant": lambda offset: ScalarMap("constant", lambda r: np.ones_like(r) * (1.0 if offset == 0 else offset), 0.0),
}


@dataclass(frozen=True, eq=False)
class AdditiveNoise:
    """``G(t, z_i) = theta(t) * fields[i]`` (grid values), independent of the state."""

    grid: SpatialGrid
    fields: np.ndarray
    time_profile: Callable | None = None

    def __post_init__(self):
        f = np.array(self.fields, dtype=float, ndmin=2)
        if f.shape[1] != self.grid.n_interior:
            raise InvalidParameterError("additive noise fields must match the grid")
        f.setflags(write=False)
        object.__setattr__(self, "fields", f)

    kind = "additive"

    @property
    def lipschitz_g(self) -> float:
        return 0.0

    @property
    def time_constant(self) -> bool:
        return self.time_profile is None

    def theta(self, t):
        t = np.asarray(t, dtype=float)
        return np.ones_like(t) if self.time_profile is None else np.asarray(self.time_profile(t), dtype=float)

    def values(self, t, mark, u=None):
        """Jump field for mark index ``mark`` at time ``t`` (batched over leading axes)."""
        return self.theta(t)[..., None] * self.fields[mark]

    def at_zero(self):
        return self.fields


@dataclass(frozen=True, eq=False)
class MultiplicativeNoise:
    """``G(z_i, u)(x) = sigma_i g(u(x))`` with g scalar Lipschitz."""

    grid: SpatialGrid
    sigmas: tuple
    g: ScalarMap

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))

    kind = "multiplicative"
    time_constant = True

    @property
    def lipschitz_g(self) -> float:
        return self.g.lipschitz

    @property
    def sigma_array(self) -> np.ndarray:
        return np.asarray(self.sigmas, dtype=float)

    def values(self, t, mark, u):
        return self.sigma_array[mark][..., None] * self.g.fn(u)

    def at_zero(self):
        zero = np.zeros(self.grid.n_interior)
        return np.stack([s * self.g.fn(zero) for s in self.sigmas]) if self.sigmas else np.zeros((0, zero.size))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Mark space plus coefficient; supplies K and the compensator drift."""

    marks: MarkSpace
    coefficient: AdditiveNoise | MultiplicativeNoise | None = None
    active: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.coefficient is not None:
            m = len(self.marks)
            size = self.coefficient.fields.shape[0] if self.coefficient.kind == "additive" else len(self.coefficient.sigmas)
            if size != m:
                raise InvalidParameterError(f"noise coefficient has {size} marks, mark space has {m}")
        act = np.ones(len(self.marks), dtype=bool) if self.active is None else np.asarray(self.active, dtype=bool)
        object.__setattr__(self, "active", act)

    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls(MarkSpace())

    @classmethod
    def additive(cls, grid: SpatialGrid, weights, fields, time_profile=None) -> "NoiseModel":
        return cls(MarkSpace(tuple(weights)), AdditiveNoise(grid, fields, time_profile))

    @classmethod
    def multiplicative(cls, grid: SpatialGrid, weights, sigmas, g="identity", offset=0.0) -> "NoiseModel":
        gmap = g if isinstance(g, ScalarMap) else SCALAR_MAPS[g](offset)
        return cls(MarkSpace(tuple(weights)), MultiplicativeNoise(grid, tuple(sigmas), gmap))

    @property
    def is_zero(self) -> bool:
        return self.coefficient is None or len(self.marks) == 0 or not self.active.any()

    @property
    def kind(self) -> str:
        return "zero" if self.is_zero else self.coefficient.kind

    @property
    def effective_weights(self) -> np.ndarray:
        return self.marks.weight_array * self.active

    @property
    def K(self) -> float:
        """Lipschitz constant of u -> G(., u) into L_2(Z, m; H)."""
        if self.is_zero or self.coefficient.kind == "additive":
            return 0.0
        sig = self.coefficient.sigma_array
        return float(self.coefficient.lipschitz_g**2 * np.sum(self.effective_weights * sig**2))

    def scaled(self, factor: float) -> "NoiseModel":
        return NoiseModel(self.marks.scaled(factor), self.coefficient, self.active)

    def restricted(self, k: int) -> "NoiseModel":
        return NoiseModel(self.marks, self.coefficient, self.active & self.marks.restricted(k))

    def jump_values(self, t, mark, u_pre_values):
        """Jump increments (grid values) for marks; inactive marks give zero."""
        if self.is_zero:
            return np.zeros_like(u_pre_values)
        safe = np.where(mark >= 0, mark, 0)
        vals = self.coefficient.values(t, safe, u_pre_values)
        on = (mark >= 0) & self.active[safe]
        return np.where(on[..., None], vals, 0.0)

    def compensator_values(self, t, u_values):
        """``sum_i m_i G(t, z_i, u)`` as grid values, batched over leading axes of u."""
        if self.is_zero:
            return np.zeros_like(u_values)
        w = self.effective_weights
        c = self.coefficient
        if c.kind == "additive":
            base = w @ c.fields
            return c.theta(t)[..., None] * np.broadcast_to(base, u_values.shape)
        return float(np.dot(w, c.sigma_array)) * c.g.fn(u_values)

    def square_mass(self, u_values=None, h=1.0):
        """``sum_i m_i |G(z_i, u)|_2^2`` for time-constant coefficients."""
        if self.is_zero:
            return 0.0
        c = self.coefficient
        if c.kind == "additive":
            return float(np.dot(self.effective_weights, lp_norms(c.fields, h, 2) ** 2))
        gu = c.g.fn(np.zeros(c.grid.n_interior) if u_values is None else u_values)
        return np.dot(self.effective_weights, c.sigma_array**2) * lp_norms(gu, h, 2) ** 2

    def integrand(self, u: Field | None = None):
        """``(t, i) -> G(t, z_i, u)`` as a Field-valued callable (u frozen for multiplicative)."""
        c = self.coefficient
        grid = c.grid

        def g(t, i):
            if self.is_zero or not self.active[i]:
                return Field.zeros(grid)
            state = np.zeros(grid.n_interior) if u is None else u.values
            return Field(grid, c.values(np.asarray(t, dtype=float), np.asarray(i), state))

        return g


@dataclass(frozen=True, eq=False)
class PathRealization:
    """Jump times in (t0, t1] with mark indices for one scenario."""

    t0: float
    t1: float
    times: np.ndarray
    marks: np.ndarray
    seed: tuple = ()

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        marks = np.asarray(self.marks, dtype=np.int64).reshape(-1)
        if times.size != marks.size:
            raise InvalidParameterError("one mark per jump time")
        if times.size and (np.any(np.diff(times) <= 0) or times[0] <= self.t0 or times[-1] > self.t1):
            raise InvalidParameterError("jump times must be strictly increasing inside (t0, t1]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)

    @property
    def count(self) -> int:
        return self.times.size

    def restrict(self, t0: float, t1: float) -> "PathRealization":
        if t0 < self.t0 or t1 > self.t1:
            raise InvalidParameterError("restriction window must lie inside the sampled window")
        keep = (self.times > t0) & (self.times <= t1)
        return PathRealization(t0, t1, self.times[keep], self.marks[keep], self.seed)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("tau,mark_index\n")
        for t, m in zip(self.times, self.marks):
            buf.write(f"{format_float(t)},{int(m)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, t0: float, t1: float) -> "PathRealization":
        rows = [line.split(",") for line in text.strip().splitlines()[1:] if line.strip()]
        return cls(t0, t1, [float(r[0]) for r in rows], [int(r[1]) for r in rows])


def sample_poisson(ms: MarkSpace, window, rng: np.random.Generator) -> PathRealization:
    """One realization on ``window = (t0, t1)`` from a caller-supplied generator."""
    t0, t1 = map(float, window)
    if not t1 > t0:
        raise InvalidParameterError(f"empty window ({t0}, {t1}]")
    if len(ms) == 0:
        return PathRealization(t0, t1, [], [])
    n = rng.poisson(ms.total_mass * (t1 - t0))
    times = np.sort(t1 - (t1 - t0) * rng.random(n))
    marks = rng.choice(len(ms), size=n, p=ms.probabilities)
    return PathRealization(t0, t1, times, marks)


def _sample_block(ms: MarkSpace, master_seed, scenario, tag, block, block_length):
    g = rngmod.stream(master_seed, scenario, tag, block)
    lo = block * block_length
    n = g.poisson(ms.total_mass * block_length)
    times = lo + block_length * (1.0 - g.random(n))
    marks = g.choice(len(ms), size=n, p=ms.probabilities) if n else np.zeros(0, dtype=np.int64)
    order = np.argsort(times, kind="stable")
    return times[order], marks[order]


def sample_path(ms: MarkSpace, window, master_seed: int, scenario: int, tag="noise", block_length: float = 1.0) -> PathRealization:
    """Block-keyed realization: restrictions of larger windows agree exactly."""
    t0, t1 = map(float, window)
    if not t1 > t0:
        raise InvalidParameterError(f"empty window ({t0}, {t1}]")
    if len(ms) == 0:
        return PathRealization(t0, t1, [], [], (master_seed, scenario, tag))
    b0 = math.floor(t0 / block_length)
    b1 = math.ceil(t1 / block_length)
    ts, ms_ = [], []
    for b in range(b0, b1):
        t, m = _sample_block(ms, master_seed, scenario, tag, b, block_length)
        ts.append(t)
        ms_.append(m)
    times = np.concatenate(ts)
    marks = np.concatenate(ms_)
    keep = (times > t0) & (times <= t1)
    return PathRealization(t0, t1, times[keep], marks[keep], (master_seed, scenario, tag))


@dataclass(frozen=True, eq=False)
class JumpBatch:
    """Realizations for a batch of scenarios, padded to a common width."""

    t0: float
    t1: float
    times: np.ndarray
    marks: np.ndarray

    @classmethod
    def from_paths(cls, paths: list[PathRealization]) -> "JumpBatch":
        t0, t1 = paths[0].t0, paths[0].t1
        width = max((p.count for p in paths), default=0)
        times = np.full((len(paths), width), np.inf)
        marks = np.full((len(paths), width), -1, dtype=np.int64)
        for i, p in enumerate(paths):
            times[i, : p.count] = p.times
            marks[i, : p.count] = p.marks
        return cls(t0, t1, times, marks)

    @classmethod
    def empty(cls, n_paths: int, t0: float, t1: float) -> "JumpBatch":
        return cls(t0, t1, np.full((n_paths, 0), np.inf), np.full((n_paths, 0), -1, dtype=np.int64))

    @property
    def n_paths(self) -> int:
        return self.times.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return np.sum(np.isfinite(self.times), axis=1)

    def path(self, p: int) -> PathRealization:
        k = int(self.counts[p])
        return PathRealization(self.t0, self.t1, self.times[p, :k], self.marks[p, :k])

    def restrict(self, t0: float, t1: float) -> "JumpBatch":
        return JumpBatch.from_paths([self.path(p).restrict(t0, t1) for p in range(self.n_paths)])

    def shifted(self, dt: float) -> "JumpBatch":
        return JumpBatch(self.t0 + dt, self.t1 + dt, self.times + dt, self.marks)


def sample_batch(ms: MarkSpace, window, n_paths: int, master_seed: int, tag="noise", first=0, block_length=1.0) -> JumpBatch:
    paths = [sample_path(ms, window, master_seed, first + p, tag, block_length) for p in range(n_paths)]
    if not paths:
        return JumpBatch.empty(0, *window)
    return JumpBatch.from_paths(paths)


def _as_values(x):
    return x.values if isinstance(x, Field) else np.asarray(x, dtype=float)


def compensated_integral(g, pr: PathRealization, ms: MarkSpace) -> np.ndarray:
    """``sum_j g(tau_j, z_j) - int sum_i m_i g(s, z_i) ds`` on the realization's window.

    The compensator uses 8-point Gauss-Legendre on every inter-jump interval,
    which is exact for time-constant integrands.
    """
    total = None
    for t, m in zip(pr.times, pr.marks):
        v = _as_values(g(t, int(m)))
        total = v.copy() if total is None else total + v
    breaks = np.concatenate([[pr.t0], pr.times, [pr.t1]])
    comp = None
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        for xg, wg in zip(_GL_NODES, _GL_WEIGHTS):
            s = mid + half * xg
            rate = sum(w * _as_values(g(s, i)) for i, w in enumerate(ms.weights))
            if isinstance(rate, (int, float)):
                continue
            term = half * wg * rate
            comp = term if comp is None else comp + term
    if total is None and comp is None:
        probe = _as_values(g(pr.t0, 0)) if len(ms) else np.zeros(1)
        return np.zeros_like(probe)
    if total is None:
        return -comp
    if comp is None:
        return total
    return total - comp


def compensated_integrals(fields: np.ndarray, batch: JumpBatch, ms: MarkSpace) -> np.ndarray:
    """Vectorized compensated integrals of time-constant per-mark fields, one row per path."""
    fields = np.asarray(fields, dtype=float)
    jumps = np.zeros((batch.n_paths, fields.shape[1]))
    if batch.times.shape[1]:
        safe = np.where(batch.marks >= 0, batch.marks, 0)
        contrib = np.where((batch.marks >= 0)[..., None], fields[safe], 0.0)
        jumps = contrib.sum(axis=1)
    comp = (batch.t1 - batch.t0) * (ms.weight_array @ fields) if len(ms) else 0.0
    return jumps - comp


def _phi1(mu, t):
    z = mu * t
    out = np.empty_like(z)
    small = z < 1e-10
    out[small] = t if np.ndim(t) == 0 else np.broadcast_to(t, z.shape)[small]
    out[~small] = -np.expm1(-z[~small]) / mu[~small] if np.ndim(mu) else -np.expm1(-z[~small]) / mu
    return out


def stochastic_convolution(S: SemigroupOperator, g, pr: PathRealization, ms: MarkSpace, eval_times=None, time_constant=None) -> SolutionPath:
    """``G_A(t) = sum_{tau_j <= t} e^{-(t - tau_j)A} g_j - int_{t0}^t e^{-(t-s)A} sum_i m_i g(s, z_i) ds``.

    ``eval_times`` must contain every jump time (default: jump times plus the
    window ends).  Time-constant integrands use the closed form
    ``(1 - e^{-mu_k t}) / mu_k`` mode by mode; otherwise the compensator is
    integrated with composite 8-point Gauss-Legendre between consecutive
    evaluation times, on panels short enough for the fastest mode.
    """
    grid = S.grid
    if eval_times is None:
        eval_times = np.concatenate([[pr.t0], pr.times, [pr.t1]])
    eval_times = np.unique(np.asarray(eval_times, dtype=float))
    if np.any(eval_times < pr.t0) or np.any(eval_times > pr.t1):
        raise InvalidParameterError("evaluation times must lie in the realization window")
    if not np.all(np.isin(pr.times, eval_times)):
        raise InvalidParameterError("evaluation times must include every jump time")
    mu = S.eigenvalues
    if time_constant is None:
        time_constant = getattr(g, "time_constant", False)

    def coeffs(t, i):
        return grid.analyze(_as_values(g(t, i)))

    rate0 = sum((w * coeffs(pr.t0, i) for i, w in enumerate(ms.weights)), np.zeros(grid.n_interior))
    n = grid.n_interior
    L = eval_times.size
    post = np.zeros((L, n))
    pre = np.zeros((L, n))
    is_jump = np.isin(eval_times, pr.times)
    state = np.zeros(n)
    t_prev = eval_times[0]
    jump_of = dict(zip(pr.times.tolist(), pr.marks.tolist()))
    for k, t in enumerate(eval_times):
        h = t - t_prev
        if h > 0:
            decay = np.exp(-mu * h)
            if time_constant:
                comp = _phi1(mu, h) * rate0
            else:
                comp = np.zeros(n)
                # keep mu_max * panel <= 4 so the kernel stays smooth on each panel
                panels = min(_MAX_PANELS, max(1, math.ceil(mu[-1] * h / 4.0)))
                edges = np.linspace(t_prev, t, panels + 1)
                for a, b in zip(edges[:-1], edges[1:]):
                    half, mid = 0.5 * (b - a), 0.5 * (a + b)
                    for xg, wg in zip(_GL_NODES, _GL_WEIGHTS):
                        s = mid + half * xg
                        rate = sum((w * coeffs(s, i) for i, w in enumerate(ms.weights)), np.zeros(n))
                        comp += half * wg * np.exp(-mu * (t - s)) * rate
            state = decay * state - comp
        pre[k] = state
        if is_jump[k]:
            state = state + coeffs(t, jump_of[t])
        post[k] = state
        t_prev = t
    return SolutionPath(grid, eval_times, grid.synthesize(post), grid.synthesize(pre), is_jump)


def lp_class_functional(g, ms: MarkSpace, window, p: float, grid: SpatialGrid | None = None, panels: int = 1) -> float:
    """``int [sum_i m_i |g(t,z_i)|_p^p + (sum_i m_i |g(t,z_i)|_p^2)^(p/2)] dt``.

    Gauss-Legendre with ``panels`` panels of 8 nodes; exact for time-constant g.
    """
    if p < 2:
        raise InvalidParameterError(f"the L_p class needs p >= 2, got {p}")
    t0, t1 = map(float, window)
    if len(ms) == 0:
        return 0.0
    edges = np.linspace(t0, t1, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        for xg, wg in zip(_GL_NODES, _GL_WEIGHTS):
            s = mid + half * xg
            norms = []
            for i in range(len(ms)):
                v = g(s, i)
                h = v.grid.h if isinstance(v, Field) else grid.h
                norms.append(float(lp_norms(_as_values(v), h, p)))
            norms = np.asarray(norms)
            w = ms.weight_array
            total += half * wg * (np.dot(w, norms**p) + np.dot(w, norms**2) ** (p / 2))
    return float(total)

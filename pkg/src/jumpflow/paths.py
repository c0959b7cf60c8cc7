"""Jump-adapted time grids and the path containers produced by the solvers."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidParameterError
from .spectral import Field, SpatialGrid

__all__ = ["TimeGrid", "uniform_nodes", "Schedule", "SolutionPath", "BatchPath", "format_float"]


def format_float(x) -> str:
    """17 significant digits: enough to round-trip any double."""
    return "%.17g" % float(x)


def uniform_nodes(t0: float, t1: float, dt: float) -> np.ndarray:
    """Uniform nodes from t0 to t1 with spacing at most dt; both ends exact."""
    if not t1 > t0:
        raise InvalidParameterError(f"empty time window [{t0}, {t1}]")
    if not dt > 0:
        raise InvalidParameterError(f"time step must be positive, got {dt}")
    n = max(1, math.ceil((t1 - t0) / dt - 1e-9))
    nodes = t0 + (t1 - t0) * np.arange(n + 1) / n
    nodes[-1] = t1
    return nodes


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes merged with the jump times of one realization."""

    horizon: float
    dt: float
    jump_times: tuple = ()
    start: float = 0.0

    def __post_init__(self):
        uniform_nodes(self.start, self.horizon, self.dt)
        jt = np.asarray(self.jump_times, dtype=float)
        if jt.size and (np.any(jt <= self.start) or np.any(jt > self.horizon)):
            raise InvalidParameterError("jump times must lie in (start, horizon]")

    @property
    def uniform(self) -> np.ndarray:
        return uniform_nodes(self.start, self.horizon, self.dt)

    @property
    def nodes(self) -> np.ndarray:
        return np.unique(np.concatenate([self.uniform, np.asarray(self.jump_times, dtype=float)]))


@dataclass(frozen=True, eq=False)
class Schedule:
    """Per-path node lists for a batch, padded at the end with zero-length steps.

    ``nodes[p]`` is sorted; ``is_jump[p, r]`` flags a jump arriving at node r
    with mark ``marks[p, r]``; ``uniform_index[p, k]`` is where uniform node
    k sits in path p's list.
    """

    nodes: np.ndarray
    is_jump: np.ndarray
    marks: np.ndarray
    uniform_index: np.ndarray
    uniform: np.ndarray
    counts: np.ndarray

    @classmethod
    def build(cls, uniform: np.ndarray, jump_times: np.ndarray, jump_marks: np.ndarray) -> "Schedule":
        uniform = np.asarray(uniform, dtype=float)
        jump_times = np.asarray(jump_times, dtype=float)
        P = jump_times.shape[0]
        counts = np.sum(np.isfinite(jump_times), axis=1)
        jmax = int(counts.max()) if P else 0
        jump_times = jump_times[:, :jmax]
        jump_marks = jump_marks[:, :jmax]
        nu = uniform.size
        merged = np.concatenate([np.broadcast_to(uniform, (P, nu)), jump_times], axis=1)
        order = np.argsort(merged, axis=1, kind="stable")
        nodes = np.take_along_axis(merged, order, axis=1)
        is_jump = order >= nu
        all_marks = np.concatenate([np.full((P, nu), -1, dtype=np.int64), jump_marks.astype(np.int64)], axis=1)
        marks = np.take_along_axis(all_marks, order, axis=1)
        padding = ~np.isfinite(nodes)
        nodes = np.where(padding, uniform[-1], nodes)
        is_jump &= ~padding
        marks = np.where(is_jump, marks, -1)
        rank = np.argsort(order, axis=1, kind="stable")
        uniform_index = rank[:, :nu]
        return cls(nodes, is_jump, marks, uniform_index, uniform, counts)

    @property
    def n_paths(self) -> int:
        return self.nodes.shape[0]

    @property
    def length(self) -> int:
        return self.nodes.shape[1]


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """One càdlàg trajectory: states at the nodes plus left limits."""

    grid: SpatialGrid
    times: np.ndarray
    states: np.ndarray
    left_limits: np.ndarray
    is_jump: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.states)) or not np.all(np.isfinite(self.left_limits)):
            raise FloatingPointError("solution path contains non-finite states")

    def __len__(self):
        return self.times.size

    def field(self, k: int) -> Field:
        return Field(self.grid, self.states[k])

    def left_field(self, k: int) -> Field:
        return Field(self.grid, self.left_limits[k])

    @property
    def jump_increments(self) -> np.ndarray:
        return self.states - self.left_limits

    def at(self, t: float) -> Field:
        """State at node time t (nodes only; no interpolation)."""
        k = int(np.searchsorted(self.times, t, side="right") - 1)
        if k < 0 or not math.isclose(self.times[k], t, rel_tol=0, abs_tol=1e-12):
            raise InvalidParameterError(f"{t} is not a node of this path")
        return self.field(k)

    def to_csv(self) -> str:
        buf = io.StringIO()
        n = self.states.shape[1]
        buf.write("t,is_jump," + ",".join(f"state_{i}" for i in range(n)) + "\n")
        for t, jump, row in zip(self.times, self.is_jump, self.states):
            buf.write(format_float(t) + "," + ("1" if jump else "0") + ",")
            buf.write(",".join(format_float(v) for v in row) + "\n")
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class BatchPath:
    """A batch of paths on per-path jump-adapted schedules, stored as sine coefficients."""

    grid: SpatialGrid
    schedule: Schedule
    coeffs: np.ndarray
    pre: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.coeffs.shape[0]

    @property
    def uniform_times(self) -> np.ndarray:
        return self.schedule.uniform

    def uniform_coeffs(self) -> np.ndarray:
        idx = self.schedule.uniform_index[:, :, None]
        return np.take_along_axis(self.coeffs, idx, axis=1)

    def uniform_pre(self) -> np.ndarray:
        idx = self.schedule.uniform_index[:, :, None]
        return np.take_along_axis(self.pre, idx, axis=1)

    def final(self) -> np.ndarray:
        return self.coeffs[:, -1, :]

    def sup_over_nodes(self, fn, weight=None) -> np.ndarray:
        """``max_r max(fn(u(t_r-)), fn(u(t_r)))`` per path.

        ``fn`` maps coefficient arrays (..., n) to (...); ``weight`` maps node
        times to multipliers applied before the max.
        """
        a = fn(self.coeffs)
        b = fn(self.pre)
        vals = np.maximum(a, b)
        if weight is not None:
            vals = vals * weight(self.schedule.nodes)
        return vals.max(axis=1)

    def path(self, p: int) -> SolutionPath:
        length = self.schedule.uniform.size + int(self.schedule.counts[p])
        sl = slice(0, length)
        return SolutionPath(
            self.grid,
            self.schedule.nodes[p, sl].copy(),
            self.grid.synthesize(self.coeffs[p, sl]),
            self.grid.synthesize(self.pre[p, sl]),
            self.schedule.is_jump[p, sl].copy(),
        )

"""Sine-Galerkin discretization of D = (0, 1) with Dirichlet boundary.

Fields live on the interior grid points ``x_i = i h``.  The discrete sine
modes ``e_k(x_i) = sqrt(2) sin(k pi x_i)`` are orthonormal for the pairing
``<u, v> = h sum_i u_i v_i``, so analysis and synthesis are exact inverses
and every operator below acts diagonally on sine coefficients.

Batched routines accept arrays whose last axis is the grid axis; leading
axes are treated as independent samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import InvalidParameterError

__all__ = [
    "SpatialGrid",
    "Field",
    "SemigroupOperator",
    "lp_norm",
    "lp_norms",
    "semigroup_apply",
    "yosida_operator_apply",
    "dirichlet_energy",
]


@dataclass(frozen=True)
class SpatialGrid:
    n_interior: int

    def __post_init__(self):
        if int(self.n_interior) != self.n_interior or self.n_interior < 1:
            raise InvalidParameterError(f"n_interior must be a positive integer, got {self.n_interior!r}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n_interior + 1)

    @cached_property
    def points(self) -> np.ndarray:
        pts = np.arange(1, self.n_interior + 1) * self.h
        pts.setflags(write=False)
        return pts

    @cached_property
    def modes(self) -> np.ndarray:
        """Synthesis matrix ``Phi[k, i] = sqrt(2) sin((k+1) pi x_i)``."""
        k = np.arange(1, self.n_interior + 1)
        phi = np.sqrt(2.0) * np.sin(np.pi * np.outer(k, self.points))
        phi.setflags(write=False)
        return phi

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Grid values -> sine coefficients (batched over leading axes)."""
        return self.h * (np.asarray(values, dtype=float) @ self.modes.T)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Sine coefficients -> grid values (batched over leading axes)."""
        return np.asarray(coeffs, dtype=float) @ self.modes

    def field(self, values) -> "Field":
        return Field(self, values)

    def sample(self, fn) -> "Field":
        """Evaluate a vectorized callable on the interior points."""
        return Field(self, fn(self.points))


@dataclass(frozen=True, eq=False)
class Field:
    """A real function on the interior grid, carrying L_p semantics."""

    grid: SpatialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.shape != (self.grid.n_interior,):
            raise InvalidParameterError(
                f"field has {vals.size} values, grid expects {self.grid.n_interior}"
            )
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("field contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: SpatialGrid) -> "Field":
        return cls(grid, np.zeros(grid.n_interior))

    @classmethod
    def from_coeffs(cls, grid: SpatialGrid, coeffs) -> "Field":
        return cls(grid, grid.synthesize(coeffs))

    @property
    def coeffs(self) -> np.ndarray:
        return self.grid.analyze(self.values)

    def _like(self, values) -> "Field":
        return Field(self.grid, values)

    def __add__(self, other):
        return self._like(self.values + _values_of(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._like(self.values - _values_of(other))

    def __rsub__(self, other):
        return self._like(_values_of(other) - self.values)

    def __neg__(self):
        return self._like(-self.values)

    def __mul__(self, scalar):
        return self._like(self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._like(self.values / float(scalar))


def _values_of(obj):
    return obj.values if isinstance(obj, Field) else np.asarray(obj, dtype=float)


def lp_norm(u: Field, p: float) -> float:
    """Discrete L_p(D) norm ``(h sum |u_i|^p)^(1/p)``."""
    return float(lp_norms(u.values, u.grid.h, p))


def lp_norms(values: np.ndarray, h: float, p: float) -> np.ndarray:
    """Batched L_p norms over the last axis of ``values``."""
    if not p >= 1:
        raise InvalidParameterError(f"L_p norm needs p >= 1, got {p}")
    a = np.abs(np.asarray(values, dtype=float))
    if p == 2:
        return np.sqrt(h * np.einsum("...i,...i->...", a, a))
    if np.isinf(p):
        return a.max(axis=-1)
    return (h * np.sum(a**p, axis=-1)) ** (1.0 / p)


@dataclass(frozen=True, eq=False)
class SemigroupOperator:
    """Diagonal generator ``A e_k = mu_k e_k`` on the sine basis.

    ``kind`` is ``"laplacian"`` (mu_k = (k pi)^2) or ``"fractional"``
    (mu_k = (k pi)^(2s), 0 < s <= 1).  ``custom`` eigenvalues are accepted
    for test generators; they only need to be nonnegative.
    """

    grid: SpatialGrid
    kind: str = "laplacian"
    s: float = 1.0
    custom: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("laplacian", "fractional", "custom"):
            raise InvalidParameterError(f"unknown operator kind {self.kind!r}")
        if self.kind == "fractional" and not 0.0 < self.s <= 1.0:
            raise InvalidParameterError(f"fractional order must lie in (0, 1], got {self.s}")
        if self.kind == "custom":
            mu = np.asarray(self.custom, dtype=float)
            if mu.shape != (self.grid.n_interior,) or np.any(mu < 0) or not np.all(np.isfinite(mu)):
                raise InvalidParameterError("custom eigenvalues must be finite, nonnegative, one per mode")

    @classmethod
    def laplacian(cls, grid: SpatialGrid) -> "SemigroupOperator":
        return cls(grid, "laplacian")

    @classmethod
    def fractional(cls, grid: SpatialGrid, s: float) -> "SemigroupOperator":
        return cls(grid, "fractional", s)

    @classmethod
    def with_eigenvalues(cls, grid: SpatialGrid, eigenvalues) -> "SemigroupOperator":
        return cls(grid, "custom", custom=tuple(float(v) for v in eigenvalues))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        k = np.arange(1, self.grid.n_interior + 1)
        if self.kind == "custom":
            mu = np.asarray(self.custom, dtype=float)
        else:
            order = 1.0 if self.kind == "laplacian" else self.s
            mu = (k * np.pi) ** (2.0 * order)
        mu = mu.copy()
        mu.setflags(write=False)
        return mu

    @property
    def mu1(self) -> float:
        return float(self.eigenvalues[0])

    def propagator(self, t) -> np.ndarray:
        """Multipliers ``exp(-t mu_k)``; ``t`` may be an array (broadcast on a new last axis)."""
        t = np.asarray(t, dtype=float)
        return np.exp(-t[..., None] * self.eigenvalues)

    def yosida_eigenvalues(self, beta: float) -> np.ndarray:
        if not beta > 0:
            raise InvalidParameterError(f"Yosida parameter must be positive, got {beta}")
        mu = self.eigenvalues
        return mu / (1.0 + beta * mu)

    def apply(self, t: float, u: Field) -> Field:
        return semigroup_apply(self, t, u)

    def yosida_semigroup_apply(self, beta: float, t: float, u: Field) -> Field:
        """``exp(-t A_beta) u`` with ``A_beta = A (I + beta A)^-1``."""
        if t < 0:
            raise InvalidParameterError(f"semigroup time must be nonnegative, got {t}")
        mult = np.exp(-t * self.yosida_eigenvalues(beta))
        return Field.from_coeffs(self.grid, u.coeffs * mult)


def semigroup_apply(S: SemigroupOperator, t: float, u: Field) -> Field:
    if t < 0:
        raise InvalidParameterError(f"semigroup time must be nonnegative, got {t}")
    if t == 0:
        return u
    return Field.from_coeffs(S.grid, u.coeffs * np.exp(-t * S.eigenvalues))


def yosida_operator_apply(S: SemigroupOperator, beta: float, u: Field) -> Field:
    return Field.from_coeffs(S.grid, u.coeffs * S.yosida_eigenvalues(beta))


def dirichlet_energy(S: SemigroupOperator, u) -> float | np.ndarray:
    """``<A u, u> = sum_k mu_k c_k^2``.

    Accepts a Field or a batch of coefficient vectors (last axis = modes).
    """
    c = u.coeffs if isinstance(u, Field) else np.asarray(u, dtype=float)
    energy = np.einsum("...k,k,...k->...", c, S.eigenvalues, c)
    return float(energy) if np.ndim(energy) == 0 else energy

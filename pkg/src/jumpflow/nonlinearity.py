"""Odd-polynomial monotone nonlinearities and their Yosida regularization."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import InvalidParameterError, NonconvergenceError
from .spectral import Field, SemigroupOperator

__all__ = [
    "MonotoneFunction",
    "YosidaRealization",
    "eval_f",
    "resolvent",
    "yosida_f",
    "apply_nemitskii",
    "strong_dissipativity_bound",
]

_NEWTON_BUDGET = 200


@dataclass(frozen=True)
class MonotoneFunction:
    """``f(r) = a0 + sum_j a_j r^j`` with j odd and a_j >= 0.

    ``coefficients`` maps degree -> coefficient (``{1: 1.0, 3: 1.0}`` is
    ``r + r^3``).  ``offset`` is the constant ``a0 = f(0)``.  ``eta`` is the
    shift in the drift ``eta u - f(u)``.
    """

    coefficients: tuple = ()
    eta: float = 0.0
    offset: float = 0.0

    def __post_init__(self):
        items = dict(self.coefficients) if not isinstance(self.coefficients, dict) else self.coefficients
        clean = {}
        for deg, a in items.items():
            deg = int(deg)
            a = float(a)
            if deg < 1 or deg % 2 == 0:
                raise InvalidParameterError(f"only odd degrees >= 1 are monotone on R, got degree {deg}")
            if a < 0:
                raise InvalidParameterError(f"coefficient of r^{deg} must be nonnegative, got {a}")
            if a != 0.0:
                clean[deg] = clean.get(deg, 0.0) + a
        object.__setattr__(self, "coefficients", tuple(sorted(clean.items())))
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def polynomial(cls, eta=0.0, offset=0.0, **terms) -> "MonotoneFunction":
        """``MonotoneFunction.polynomial(a1=1, a3=1)`` for ``r + r^3``."""
        coeffs = {int(k[1:]): v for k, v in terms.items()}
        return cls(tuple(coeffs.items()), eta, offset)

    @property
    def degree(self) -> int:
        """Growth exponent d (1 for the zero or linear map)."""
        return max((deg for deg, _ in self.coefficients), default=1)

    @property
    def d_star(self) -> int:
        return 2 * self.degree**2

    @property
    def linear_coefficient(self) -> float:
        """``inf f' = a_1`` for this class."""
        return dict(self.coefficients).get(1, 0.0)

    @property
    def is_linear(self) -> bool:
        return all(deg == 1 for deg, _ in self.coefficients)

    @property
    def growth_constant(self) -> float:
        return 1.0 + abs(self.offset) + sum(abs(a) for _, a in self.coefficients)

    @cached_property
    def _dense(self) -> np.ndarray:
        dense = np.zeros(self.degree + 1)
        for deg, a in self.coefficients:
            dense[deg] = a
        return dense

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = _horner(self._dense, r)
        return out + self.offset if self.offset else out

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        dense = self._dense
        return _horner(dense[1:] * np.arange(1, dense.size), r)

    def yosida(self, lam: float) -> "YosidaRealization":
        return YosidaRealization(self, lam)


def _horner(dense, r):
    out = np.full_like(r, dense[-1])
    for a in dense[-2::-1]:
        out *= r
        if a:
            out += a
    return out


def _cubic_root(p, q):
    """Real root of ``r^3 + p r = q`` for p > 0, without cancellation."""
    d = np.sqrt(0.25 * q * q + p**3 / 27.0)
    a = np.cbrt(0.5 * np.abs(q) + d)
    b = p / (3.0 * a)
    return np.sign(q) * np.abs(q) / (a * a + a * b + b * b)


def eval_f(f: MonotoneFunction, r):
    out = f(r)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class YosidaRealization:
    base: MonotoneFunction
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidParameterError(f"Yosida parameter must be positive, got {self.lam}")

    def resolvent(self, x):
        """Root r of ``r + lam f(r) = x``, vectorized.

        Newton started at x converges monotonically because ``r + lam p(r)``
        is convex for r > 0 and concave for r < 0; the bracket
        ``[min(0, x), max(0, x)]`` guards against rounding excursions.
        """
        f, lam = self.base, self.lam
        x = np.asarray(x, dtype=float)
        target = x - lam * f.offset
        if f.is_linear:
            return target / (1.0 + lam * f.linear_coefficient)
        poly = MonotoneFunction(f.coefficients)
        top, a_top = f.coefficients[-1]
        if top == 3:
            # Cardano start, then Newton polish
            r = _cubic_root((1.0 + lam * f.linear_coefficient) / (lam * a_top), target / (lam * a_top))
        else:
            # both |x| and (|x| / (lam a_d))^(1/d) bound |J x| from above
            mag = np.minimum(np.abs(target), (np.abs(target) / (lam * a_top)) ** (1.0 / top))
            r = np.sign(target) * mag
        lo = np.minimum(target, 0.0)
        hi = np.maximum(target, 0.0)
        for _ in range(_NEWTON_BUDGET):
            pr = poly(r)
            res = r + lam * pr - target
            tol = np.maximum(1e-13, 8 * np.finfo(float).eps * (np.abs(target) + np.abs(r) + lam * np.abs(pr)))
            done = np.abs(res) <= tol
            if np.all(done):
                return r
            lo = np.where(res < 0, np.maximum(lo, r), lo)
            hi = np.where(res > 0, np.minimum(hi, r), hi)
            cand = r - res / (1.0 + lam * poly.derivative(r))
            outside = (cand < lo) | (cand > hi)
            cand = np.where(outside, 0.5 * (lo + hi), cand)
            r = np.where(done, r, cand)
        raise NonconvergenceError("resolvent Newton iteration did not converge", float(np.max(np.abs(res))))

    def __call__(self, x):
        """``f_lam(x) = f(J_lam x)``; equals ``(x - J_lam x) / lam`` but without the cancellation."""
        return self.base(self.resolvent(x))

    def residual(self, x):
        r = self.resolvent(x)
        return r + self.lam * self.base(r) - np.asarray(x, dtype=float)


def resolvent(y: YosidaRealization, x):
    out = y.resolvent(x)
    return float(out) if np.ndim(out) == 0 else out


def yosida_f(y: YosidaRealization, x):
    out = y(x)
    return float(out) if np.ndim(out) == 0 else out


def apply_nemitskii(g, u: Field) -> Field:
    """Pointwise application of a scalar function to a field."""
    return Field(u.grid, np.broadcast_to(g(u.values), u.values.shape))


def strong_dissipativity_bound(f: MonotoneFunction, S: SemigroupOperator, beta0: float) -> float:
    """Certified lower bound for the dissipativity margin, uniform in beta, lam < beta0.

    ``2 mu_1/(1+beta0 mu_1) + 2 m/(1+beta0 m) - 2 eta`` with ``m = inf f'``.
    Uses that the Yosida approximation of an m-strongly monotone map is
    ``m/(1+lam m)``-strongly monotone.
    """
    if not beta0 > 0:
        raise InvalidParameterError(f"beta0 must be positive, got {beta0}")
    mu1 = S.mu1
    m = f.linear_coefficient
    return 2 * mu1 / (1 + beta0 * mu1) + 2 * m / (1 + beta0 * m) - 2 * f.eta

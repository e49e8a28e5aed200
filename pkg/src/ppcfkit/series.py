# src/ppcfkit/series.py
"""One-variable power series with nonnegative coefficients summing to at most 1.

These are the morphisms !1 -> 1: entire on the unit ball, monotone, and the
simplest place to check derivative and Lipschitz facts numerically.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence, Tuple, Union

import numpy as np

from .errors import PreconditionError
from .scalar import Dual

__all__ = [
    "PowerSeries1", "eval_series", "deriv_series", "eval_series_dual", "compose_dual",
    "phi_prefix", "random_series",
]

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class PowerSeries1:
    coeffs: Tuple[float, ...]

    def __post_init__(self) -> None:
        cs = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", cs)
        if any(c < 0 for c in cs):
            raise PreconditionError("series coefficients must be >= 0")
        if sum(cs) > 1 + _SUM_TOL:
            raise PreconditionError(f"series coefficients sum to {sum(cs):.12g} > 1")

    @classmethod
    def of(cls, coeffs: Sequence[float]) -> "PowerSeries1":
        return cls(tuple(coeffs))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def __len__(self) -> int:
        return len(self.coeffs)


def _check_x(x: float) -> None:
    if not (0.0 <= x <= 1.0):
        raise PreconditionError(f"series argument must lie in [0,1], got {x}")


def eval_series(s: PowerSeries1, x: float) -> float:
    _check_x(x)
    if not s.coeffs:
        return 0.0
    return float(np.polynomial.polynomial.polyval(x, s.array))


def deriv_series(s: PowerSeries1, x: float) -> float:
    _check_x(x)
    if len(s.coeffs) < 2:
        return 0.0
    return float(np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(s.array)))


def eval_series_dual(s: PowerSeries1, x: Union[Dual, float]) -> Dual:
    """Horner over dual numbers; the tangent is the directional derivative."""
    acc = Dual(0.0)
    for c in reversed(s.coeffs):
        acc = acc * x + c
    return acc


def compose_dual(t: PowerSeries1, s: PowerSeries1, x: float, slot: Hashable = "x") -> Dual:
    """t(s(x)) with tangent d/dx, seeded on slot."""
    _check_x(x)
    inner = eval_series_dual(s, Dual(x, {slot: 1.0}))
    if not (0.0 <= inner.primal <= 1.0 + _SUM_TOL):
        raise PreconditionError("inner series leaves the unit interval")
    return eval_series_dual(t, inner)


def phi_prefix(q: float, n: int) -> PowerSeries1:
    """Coefficients 0..n of phi(u) = (1 - sqrt(1 - 4q(1-q)u^2)) / 2q.

    phi is the least solution of phi(u) = (1-q)u^2 + q phi(u)^2; only even
    powers occur. At q = 0 it is u^2.
    """
    if not (0.0 <= q <= 1.0):
        raise PreconditionError(f"q must lie in [0,1], got {q}")
    if n < 0:
        raise PreconditionError("prefix length must be >= 0")
    out = np.zeros(n + 1)
    if q == 0.0:
        if n >= 2:
            out[2] = 1.0
        return PowerSeries1(tuple(out))
    z = 4.0 * q * (1.0 - q)
    c, zk = 1.0, 1.0
    for k in range(1, n // 2 + 1):
        # c runs through binom(1/2, k) * (-1)^k
        c *= (k - 1.5) / k
        zk *= z
        out[2 * k] = -c * zk / (2.0 * q)
    # round-off can push a long prefix a hair past 1
    total = out.sum()
    if total > 1.0:
        out /= total
    return PowerSeries1(tuple(out))


def random_series(rng: np.random.Generator, max_degree: int = 8) -> PowerSeries1:
    """A random series with a random total mass in [0,1]."""
    d = int(rng.integers(0, max_degree + 1))
    raw = rng.random(d + 1)
    mass = rng.random()
    cs = raw / raw.sum() * mass if raw.sum() > 0 else raw
    return PowerSeries1(tuple(cs))

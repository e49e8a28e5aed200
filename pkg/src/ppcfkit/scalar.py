# src/ppcfkit/scalar.py
"""Coefficient arithmetic for the denotational evaluator.

Three carriers share one code path: exact rationals (Fraction), floats, and
dual numbers with a map of named tangent slots. Constants always enter
through ScalarKind.embed.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, Hashable, Mapping, Union

__all__ = ["Dual", "ScalarKind", "EXACT", "FLOAT", "DUAL", "primal", "tangent", "is_zero", "Scalar"]


class Dual:
    """primal + sum of tangent[k] * eps_k, with eps_j * eps_k = 0."""

    __slots__ = ("primal", "tangents")

    def __init__(self, primal: float, tangents: Mapping[Hashable, float] | None = None) -> None:
        self.primal = float(primal)
        self.tangents: Dict[Hashable, float] = dict(tangents) if tangents else {}

    @staticmethod
    def lift(x: Any) -> "Dual":
        return x if isinstance(x, Dual) else Dual(float(x))

    def tangent(self, key: Hashable) -> float:
        return self.tangents.get(key, 0.0)

    def __add__(self, other: Any) -> "Dual":
        if not isinstance(other, Dual):
            return Dual(self.primal + float(other), self.tangents)
        t = dict(self.tangents)
        for k, v in other.tangents.items():
            t[k] = t.get(k, 0.0) + v
        return Dual(self.primal + other.primal, t)

    __radd__ = __add__

    def __neg__(self) -> "Dual":
        return Dual(-self.primal, {k: -v for k, v in self.tangents.items()})

    def __sub__(self, other: Any) -> "Dual":
        return self + (-Dual.lift(other))

    def __rsub__(self, other: Any) -> "Dual":
        return Dual.lift(other) + (-self)

    def __mul__(self, other: Any) -> "Dual":
        if not isinstance(other, Dual):
            c = float(other)
            return Dual(self.primal * c, {k: v * c for k, v in self.tangents.items()})
        a, b = self.primal, other.primal
        t = {k: v * b for k, v in self.tangents.items()}
        for k, v in other.tangents.items():
            t[k] = t.get(k, 0.0) + a * v
        return Dual(a * b, t)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "Dual":
        if isinstance(other, Dual):
            if other.primal == 0.0:
                raise ZeroDivisionError("dual division by a zero primal")
            q = self.primal / other.primal
            t = {k: v / other.primal for k, v in self.tangents.items()}
            for k, v in other.tangents.items():
                t[k] = t.get(k, 0.0) - q * v / other.primal
            return Dual(q, t)
        return self * (1.0 / float(other))

    def __pow__(self, n: int) -> "Dual":
        out = Dual(1.0)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Dual):
            return self.primal == other.primal and _nz(self.tangents) == _nz(other.tangents)
        if isinstance(other, (int, float, Fraction)):
            return self.primal == other and not _nz(self.tangents)
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.primal, frozenset(_nz(self.tangents).items())))

    def __repr__(self) -> str:
        return f"Dual({self.primal!r}, {self.tangents!r})"


def _nz(t: Mapping[Hashable, float]) -> Dict[Hashable, float]:
    return {k: v for k, v in t.items() if v != 0.0}


Scalar = Union[Fraction, float, Dual]


@dataclass(frozen=True)
class ScalarKind:
    name: str
    embed: Callable[[Fraction], Scalar]

    def zero(self) -> Scalar:
        return self.embed(Fraction(0))

    def one(self) -> Scalar:
        return self.embed(Fraction(1))


EXACT = ScalarKind("exact", lambda r: Fraction(r))
FLOAT = ScalarKind("float", float)
# constants stay floats; dual values come in through the environment
DUAL = ScalarKind("dual", float)


def primal(x: Scalar) -> float:
    return x.primal if isinstance(x, Dual) else float(x)


def tangent(x: Scalar, key: Hashable) -> float:
    return x.tangent(key) if isinstance(x, Dual) else 0.0


def is_zero(x: Scalar) -> bool:
    if isinstance(x, Dual):
        return x.primal == 0.0 and not _nz(x.tangents)
    return x == 0

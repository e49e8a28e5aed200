# src/ppcfkit/metrics.py
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .ast import NAT, App, Term, TyCtx, as_rat
from .contexts import AMPLIFIER_SRC, NamedContext, builtin_contexts
from .errors import PreconditionError
from .parse import parse
from .scalar import primal
from .semantics import Ground, SemParams, interp, prob_zero
from .series import PowerSeries1
from .transform import tamed
from .typecheck import typecheck

__all__ = [
    "as_vec", "norm_ground", "glb", "lub", "exits_ball", "dist_ground",
    "LipschitzReport", "lipschitz_check", "max_grid_slope",
    "DistanceRow", "DistanceReport", "tamed_distance_estimate", "untamed_gap",
    "amplifier_context",
]

_BALL_TOL = 1e-9
_BOUND_TOL = 1e-9

GroundLike = Union[Ground, Sequence[float], np.ndarray]


# ---------- ground vectors ----------

def as_vec(v: GroundLike) -> np.ndarray:
    if isinstance(v, Ground):
        return np.array([primal(x) for x in v.vec], dtype=float)
    return np.asarray(v, dtype=float)


def _pad(u: GroundLike, v: GroundLike) -> Tuple[np.ndarray, np.ndarray]:
    a, b = as_vec(u), as_vec(v)
    n = max(a.size, b.size)
    return np.pad(a, (0, n - a.size)), np.pad(b, (0, n - b.size))


def norm_ground(v: GroundLike) -> float:
    """On nat the norm is the total mass."""
    return float(as_vec(v).sum())


def glb(u: GroundLike, v: GroundLike) -> np.ndarray:
    a, b = _pad(u, v)
    return np.minimum(a, b)


def lub(u: GroundLike, v: GroundLike) -> np.ndarray:
    """u + v - glb(u, v); may leave the unit ball, see exits_ball."""
    a, b = _pad(u, v)
    return a + b - np.minimum(a, b)


def exits_ball(v: GroundLike) -> bool:
    return norm_ground(v) > 1.0 + _BALL_TOL


def dist_ground(u: GroundLike, v: GroundLike) -> float:
    """|u - u^v| + |v - u^v|, which on nat is the L1 distance."""
    a, b = _pad(u, v)
    m = np.minimum(a, b)
    return float((a - m).sum() + (b - m).sum())


# ---------- Lipschitz ----------

@dataclass
class LipschitzReport:
    p: float
    constant: float
    pairs: int
    max_ratio: float = 0.0
    violations: List[Tuple[float, float, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def lipschitz_check(t: PowerSeries1, p: float, n_pairs: int, seed: int = 0) -> LipschitzReport:
    """Random pairs in [0, p]: |t(x) - t(y)| <= |x - y| / (1 - p)."""
    if not (0.0 <= p < 1.0):
        raise PreconditionError(f"radius p must lie in [0,1), got {p}")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, p, n_pairs)
    ys = rng.uniform(0.0, p, n_pairs)
    cs = t.array if t.coeffs else np.zeros(1)
    tx = np.polynomial.polynomial.polyval(xs, cs)
    ty = np.polynomial.polynomial.polyval(ys, cs)
    dx = np.abs(xs - ys)
    dt = np.abs(tx - ty)
    const = 1.0 / (1.0 - p)
    rep = LipschitzReport(p=p, constant=const, pairs=n_pairs)
    moved = dx > 0
    if np.any(moved):
        rep.max_ratio = float(np.max(dt[moved] / dx[moved]))
    for i in np.flatnonzero(dt > dx * const + 1e-12):
        rep.violations.append((float(xs[i]), float(ys[i]), float(dt[i] / dx[i])))
    return rep


def max_grid_slope(t: PowerSeries1, hi: float, n: int = 1000) -> float:
    """Largest secant slope between neighbours of an n-point grid on [0, hi]."""
    grid = np.linspace(0.0, hi, n)
    vals = np.polynomial.polynomial.polyval(grid, t.array if t.coeffs else np.zeros(1))
    return float(np.max(np.diff(vals) / np.diff(grid)))


# ---------- tamed observational distance ----------

@dataclass(frozen=True)
class DistanceRow:
    context: str
    prob1: float
    prob2: float

    @property
    def gap(self) -> float:
        return abs(self.prob1 - self.prob2)


@dataclass
class DistanceReport:
    p: Fraction
    distance: float
    bound: float
    rows: List[DistanceRow] = field(default_factory=list)

    @property
    def empirical(self) -> float:
        return max((r.gap for r in self.rows), default=0.0)

    @property
    def holds(self) -> bool:
        return self.empirical <= self.bound + _BOUND_TOL


def _ground_pair(m1: Term, m2: Term) -> None:
    for m in (m1, m2):
        if typecheck(TyCtx(), m) != NAT:
            raise PreconditionError("distances are computed between closed terms of type nat only")


def tamed_distance_estimate(
    m1: Term,
    m2: Term,
    p: Union[Fraction, str, float],
    contexts: Optional[Sequence[NamedContext]] = None,
    params: SemParams = SemParams(),
) -> DistanceReport:
    """Largest gap over the contexts once each is tamed by p, next to (p/(1-p)) d(m1, m2)."""
    _ground_pair(m1, m2)
    p = as_rat(p)
    if not (0 <= p < 1):
        raise PreconditionError(f"taming probability must lie in [0,1), got {p}")
    ctxs = list(contexts) if contexts is not None else builtin_contexts()
    d = dist_ground(interp(m1, {}, params), interp(m2, {}, params))
    rep = DistanceReport(p=p, distance=d, bound=float(p / (1 - p)) * d)
    for c in ctxs:
        tc = tamed(c.term, p, NAT)
        rep.rows.append(DistanceRow(
            c.name,
            primal(prob_zero(App(tc, m1), params)),
            primal(prob_zero(App(tc, m2), params)),
        ))
    return rep


def untamed_gap(context: Term, m1: Term, m2: Term, params: SemParams = SemParams()) -> float:
    _ground_pair(m1, m2)
    return abs(primal(prob_zero(App(context, m1), params)) - primal(prob_zero(App(context, m2), params)))


def amplifier_context() -> Term:
    """fix f. fun x. ifz x then 0 else f x; on input u it reaches 0 with probability u_0 / (1 - u_1 - u_2 - ...)."""
    return parse(AMPLIFIER_SRC)

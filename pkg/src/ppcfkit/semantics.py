# src/ppcfkit/semantics.py
from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Hashable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .ast import (
    Abs, App, Arrow, Dice, DiceLab, Fix, If, Label, Let, Mark, NAT, Nat, Num, Pred, Succ, Term,
    Ty, TyCtx, Var, is_closed, labels,
)
from .errors import PreconditionError, TypeCheckError
from .explore import enumerate as enumerate_tapes
from .log import note, warn
from .machine import State
from .scalar import DUAL, EXACT, FLOAT, Dual, Scalar, ScalarKind, is_zero, primal, tangent
from .transform import spy, spy_context, spy_vars
from .typecheck import typecheck

__all__ = [
    "SemParams", "Ground", "Func", "SemVal", "EvalReport", "Finite", "Diverged", "Expectation",
    "interp", "evaluate", "prob_zero", "spy_probability",
    "expect_label_semantic", "expect_labels_semantic", "label_polynomial",
    "ground_mass", "point",
]


@dataclass(frozen=True)
class SemParams:
    K: int = 64
    fix_tol: float = 1e-12
    fix_max_iters: int = 100_000
    tangent_tol: float = 1e-9
    scalar: ScalarKind = FLOAT
    unroll_depth: int = 32
    newton: bool = True
    max_table: int = 4096

    def __post_init__(self) -> None:
        if self.K < 1:
            raise PreconditionError("truncation K must be >= 1")
        if self.fix_tol <= 0 or self.tangent_tol <= 0:
            raise PreconditionError("tolerances must be > 0")
        if self.fix_max_iters < 1 or self.unroll_depth < 0:
            raise PreconditionError("iteration bounds must be positive")

    def with_scalar(self, kind: ScalarKind) -> "SemParams":
        return dataclasses.replace(self, scalar=kind)


# ---------- semantic values ----------

@dataclass(frozen=True, eq=False)
class Ground:
    """Truncated sub-distribution on 0..K-1."""
    vec: Tuple[Scalar, ...]

    def __getitem__(self, n: int) -> Scalar:
        return self.vec[n]

    def __len__(self) -> int:
        return len(self.vec)


@dataclass(frozen=True, eq=False)
class Func:
    fn: Callable[["SemVal"], "SemVal"]

    def __call__(self, v: "SemVal") -> "SemVal":
        return self.fn(v)


SemVal = Union[Ground, Func]


def point(n: int, params: SemParams, weight: Optional[Scalar] = None) -> Ground:
    kind = params.scalar
    w = kind.one() if weight is None else weight
    return Ground(tuple(w if i == n else kind.zero() for i in range(params.K)))


def ground_mass(v: Ground) -> float:
    return sum(primal(x) for x in v.vec)


# ---------- results ----------

@dataclass
class EvalReport:
    fixpoints: int = 0
    sweeps: int = 0
    newton_steps: int = 0
    unconverged: int = 0
    tangent_diverged: bool = False
    table_overflow: bool = False
    unrolled: int = 0

    @property
    def converged(self) -> bool:
        return not (self.unconverged or self.tangent_diverged or self.table_overflow)


@dataclass(frozen=True)
class Finite:
    value: float


@dataclass(frozen=True)
class Diverged:
    reason: str
    infinite: bool = False


Expectation = Union[Finite, Diverged]


# ---------- evaluator ----------

_WINDOW = 10
_MIN_SWEEPS_FOR_DIVERGENCE = 50
# per-sweep contraction of tangent deltas below which iteration is taken as settling
_TANGENT_DECAY = 0.99
# dense Jacobians beyond this many unknowns are left to plain sweeps
_NEWTON_MAX_UNKNOWNS = 512


def _uncurry(ty: Ty) -> Tuple[List[Ty], Ty]:
    args: List[Ty] = []
    while isinstance(ty, Arrow):
        args.append(ty.dom)
        ty = ty.cod
    return args, ty


def _has_dual(vec: Sequence[Scalar]) -> bool:
    return any(isinstance(x, Dual) for x in vec)


class _Evaluator:
    def __init__(self, params: SemParams) -> None:
        self.p = params
        self.K = params.K
        self.kind = params.scalar
        self.zero = self.kind.zero()
        self.one = self.kind.one()
        self.report = EvalReport()
        self._tags = itertools.count()

    # -- ground helpers
    def zeros(self) -> List[Scalar]:
        return [self.zero] * self.K

    def zero_of(self, ty: Ty) -> SemVal:
        if isinstance(ty, Nat):
            return Ground(tuple(self.zeros()))
        cod = ty.cod
        return Func(lambda _v: self.zero_of(cod))

    def combine(self, parts: List[Tuple[Scalar, SemVal]], ty: Callable[[], Ty]) -> SemVal:
        """Linear combination of values of one type; zero weights already dropped."""
        if not parts:
            return self.zero_of(ty())
        if isinstance(parts[0][1], Ground):
            acc = self.zeros()
            for c, v in parts:
                for n, x in enumerate(v.vec):
                    if not is_zero(x):
                        acc[n] = acc[n] + c * x
            return Ground(tuple(acc))
        return Func(lambda a: self.combine([(c, v(a)) for c, v in parts], lambda: _cod(ty())))

    # -- clauses
    def ev(self, term: Term, env: Mapping[str, SemVal], ctx: TyCtx) -> SemVal:
        if isinstance(term, Num):
            if term.n >= self.K:
                return Ground(tuple(self.zeros()))
            return point(term.n, self.p)
        if isinstance(term, Var):
            try:
                return env[term.name]
            except KeyError:
                raise TypeCheckError(f"unbound variable {term.name}", term=term) from None
        if isinstance(term, Dice):
            v = self.zeros()
            v[0] = self.kind.embed(term.r)
            if self.K > 1:
                v[1] = self.kind.embed(1 - term.r)
            return Ground(tuple(v))
        if isinstance(term, (Mark, DiceLab)):
            raise PreconditionError("the denotational evaluator takes unlabeled terms; strip or spy first")
        if isinstance(term, Succ):
            m = self._ground(term.t, env, ctx)
            return Ground((self.zero,) + m.vec[:-1])
        if isinstance(term, Pred):
            m = self._ground(term.t, env, ctx)
            if self.K == 1:
                return m
            return Ground((m.vec[0] + m.vec[1],) + m.vec[2:] + (self.zero,))
        if isinstance(term, Let):
            m = self._ground(term.bound, env, ctx)
            inner = ctx.extend(term.x, NAT)
            parts = [
                (m.vec[n], self.ev(term.body, {**env, term.x: point(n, self.p)}, inner))
                for n in range(self.K)
                if not is_zero(m.vec[n])
            ]
            return self.combine(parts, lambda: typecheck(ctx, term))
        if isinstance(term, If):
            m = self._ground(term.scrut, env, ctx)
            w0 = m.vec[0]
            rest = self.zero
            for x in m.vec[1:]:
                if not is_zero(x):
                    rest = rest + x
            parts: List[Tuple[Scalar, SemVal]] = []
            if not is_zero(w0):
                parts.append((w0, self.ev(term.zero, env, ctx)))
            if not is_zero(rest):
                parts.append((rest, self.ev(term.nonzero, env, ctx)))
            return self.combine(parts, lambda: typecheck(ctx, term))
        if isinstance(term, Abs):
            inner = ctx.extend(term.x, term.ty)
            return Func(lambda v: self.ev(term.body, {**env, term.x: v}, inner))
        if isinstance(term, App):
            f = self.ev(term.fn, env, ctx)
            if not isinstance(f, Func):
                raise TypeCheckError("application of a ground value", term=term)
            return f(self.ev(term.arg, env, ctx))
        if isinstance(term, Fix):
            return self.ev_fix(term, env, ctx)
        raise TypeCheckError(f"not a term: {term!r}", term=term)

    def _ground(self, term: Term, env: Mapping[str, SemVal], ctx: TyCtx) -> Ground:
        v = self.ev(term, env, ctx)
        if not isinstance(v, Ground):
            raise TypeCheckError("expected a ground value", term=term, expected=NAT)
        return v

    # -- fixpoints
    def ev_fix(self, term: Fix, env: Mapping[str, SemVal], ctx: TyCtx) -> SemVal:
        functional = self.ev(term.t, env, ctx)
        if not isinstance(functional, Func):
            raise TypeCheckError("fix of a ground value", term=term)
        if isinstance(term.t, Abs):
            sigma = term.t.ty
        else:
            fty = typecheck(ctx, term.t)
            assert isinstance(fty, Arrow)
            sigma = fty.dom
        arg_tys, _ = _uncurry(sigma)
        self.report.fixpoints += 1
        if all(isinstance(a, Nat) for a in arg_tys):
            return _FixTable(self, functional, len(arg_tys), next(self._tags)).value()
        return self.unrolled(functional, sigma)

    def unrolled(self, functional: Func, sigma: Ty) -> SemVal:
        # higher-order arguments: F^d(0) built lazily, level by level
        depth = min(self.p.unroll_depth, self.p.fix_max_iters)
        self.report.unrolled += 1
        cache: Dict[int, SemVal] = {}

        def level(d: int) -> SemVal:
            if d == 0:
                return self.zero_of(sigma)
            if d not in cache:
                cache[d] = functional(Func(lambda a: level(d - 1)(a)))  # type: ignore[operator]
            return cache[d]

        return level(depth)


def _cod(ty: Ty) -> Ty:
    assert isinstance(ty, Arrow)
    return ty.cod


class _FixTable:
    """Least fixpoint of a functional over nat -> ... -> nat, one row per argument tuple.

    Rows are refined by Gauss-Seidel sweeps of the functional; rows for argument
    tuples met during a sweep start at zero. On float scalars a Newton step on
    the polynomial system of the rows follows each sweep.
    """

    def __init__(self, ev: _Evaluator, functional: Func, arity: int, tag: int) -> None:
        self.ev = ev
        self.F = functional
        self.arity = arity
        self.tag = tag
        self.rows: Dict[Hashable, List[Scalar]] = {}
        self.args: Dict[Hashable, Tuple[Ground, ...]] = {}
        self.fresh = False
        self.overflow = False
        self.newton_ok = ev.p.newton and ev.kind is FLOAT
        self.newton_failures = 0
        self.solved: set = set()

    # -- lookups
    @staticmethod
    def key(args: Tuple[Ground, ...]) -> Hashable:
        return tuple(a.vec for a in args)

    def row(self, args: Tuple[Ground, ...]) -> Ground:
        k = self.key(args)
        r = self.rows.get(k)
        if r is None:
            if len(self.rows) >= self.ev.p.max_table:
                self.overflow = self.ev.report.table_overflow = True
                return Ground(tuple(self.ev.zeros()))
            r = self.rows[k] = self.ev.zeros()
            self.args[k] = args
            self.fresh = True
        return Ground(tuple(r))

    def curried(self, lookup: Callable[[Tuple[Ground, ...]], Ground], got: Tuple[Ground, ...] = ()) -> SemVal:
        if len(got) == self.arity:
            return lookup(got)

        def take(v: SemVal) -> SemVal:
            if not isinstance(v, Ground):
                raise TypeCheckError("ground argument expected by a recursive function")
            return self.curried(lookup, got + (v,))

        return Func(take)

    def apply(self, body: SemVal, args: Tuple[Ground, ...]) -> Ground:
        for a in args:
            assert isinstance(body, Func)
            body = body(a)
        assert isinstance(body, Ground)
        return body

    # -- the value handed back to the program
    def value(self) -> SemVal:
        if self.arity == 0:
            self.row(())
            self.solve()
            return Ground(tuple(self.rows[()]))

        def call(args: Tuple[Ground, ...]) -> Ground:
            k = self.key(args)
            if k not in self.solved:
                self.row(args)
                self.solve()
                self.solved.update(self.rows)
            return Ground(tuple(self.rows.get(k, self.ev.zeros())))

        return self.curried(call)

    # -- iteration
    def sweep(self) -> Tuple[float, float]:
        self.fresh = False
        body = self.F(self.curried(self.row)) if self.arity else None
        dp = dt = 0.0
        for k in list(self.rows):
            if self.arity == 0:
                new = self.F(Ground(tuple(self.rows[()])))
                assert isinstance(new, Ground)
            else:
                new = self.apply(body, self.args[k])
            old = self.rows[k]
            for n, (x, y) in enumerate(zip(new.vec, old)):
                dp = max(dp, abs(primal(x) - primal(y)))
                if isinstance(x, Dual) or isinstance(y, Dual):
                    keys = set(Dual.lift(x).tangents) | set(Dual.lift(y).tangents)
                    for t in keys:
                        dt = max(dt, abs(tangent(x, t) - tangent(y, t)))
            self.rows[k] = list(new.vec)
        return dp, dt

    def solve(self) -> None:
        p = self.ev.p
        rep = self.ev.report
        history: List[float] = []
        for it in range(1, p.fix_max_iters + 1):
            dp, dt = self.sweep()
            rep.sweeps += 1
            history.append(dt)
            if self.fresh:
                continue
            step = None
            if self.newton_ok and not self.overflow and not any(_has_dual(r) for r in self.rows.values()):
                step = self.newton()
            if dp < p.fix_tol and dt < p.tangent_tol and (step is None or step < p.fix_tol):
                return
            if it >= _MIN_SWEEPS_FOR_DIVERGENCE and dt >= p.tangent_tol and self._tangents_diverge(history):
                rep.tangent_diverged = True
                note(f"fixpoint {self.tag}: tangents stopped contracting after {it} sweeps")
                return
        rep.unconverged += 1
        warn(f"⚠ fixpoint not converged after {p.fix_max_iters} sweeps")

    @staticmethod
    def _tangents_diverge(history: List[float]) -> bool:
        # no geometric decay across the last three windows
        if len(history) < 4 * _WINDOW:
            return False
        for w in range(3):
            now = history[-1 - w * _WINDOW]
            then = history[-1 - (w + 1) * _WINDOW]
            if then <= 0.0 or now <= 0.0:
                return False
            if (now / then) ** (1.0 / _WINDOW) < _TANGENT_DECAY:
                return False
        return True

    def newton(self) -> Optional[float]:
        """One Newton step on X = F(X) over all rows; returns the step size, or None."""
        keys = list(self.rows)
        K = self.ev.K
        idx = {k: i for i, k in enumerate(keys)}
        X = np.array([[primal(x) for x in self.rows[k]] for k in keys], dtype=float)
        n = X.size
        if n > _NEWTON_MAX_UNKNOWNS:
            return None
        seed_tag = ("newton", self.tag)
        bad = False

        def seeded(args: Tuple[Ground, ...]) -> Ground:
            nonlocal bad
            k = self.key(args)
            if k not in idx or any(_has_dual(a.vec) for a in args):
                bad = True
                return Ground(tuple(self.ev.zeros()))
            i = idx[k]
            return Ground(tuple(Dual(X[i, m], {(seed_tag, i * K + m): 1.0}) for m in range(K)))

        diverged_before = self.ev.report.tangent_diverged
        try:
            if self.arity == 0:
                outs = [self.F(seeded(()))]
            else:
                body = self.F(self.curried(seeded))
                outs = [self.apply(body, self.args[k]) for k in keys]
        except ZeroDivisionError:
            bad = True
        if bad or self.ev.report.tangent_diverged != diverged_before:
            self.ev.report.tangent_diverged = diverged_before
            return self._newton_failed()

        G = np.zeros(n)
        J = np.zeros((n, n))
        for i, out in enumerate(outs):
            assert isinstance(out, Ground)
            for m, x in enumerate(out.vec):
                G[i * K + m] = primal(x)
                if isinstance(x, Dual):
                    for col, v in _slots(x, seed_tag):
                        J[i * K + m, col] = v
        x0 = X.reshape(-1)
        try:
            delta = np.linalg.solve(np.eye(n) - J, G - x0)
        except np.linalg.LinAlgError:
            return self._newton_failed()
        x1 = np.maximum(x0 + delta, x0)
        if not np.all(np.isfinite(x1)):
            return self._newton_failed()
        x1 = x1.reshape(len(keys), K)
        if np.any(x1.sum(axis=1) > 1.0 + 1e-9):
            return self._newton_failed()
        for i, k in enumerate(keys):
            self.rows[k] = [float(v) for v in x1[i]]
        self.ev.report.newton_steps += 1
        return float(np.max(np.abs(x1.reshape(-1) - x0))) if n else 0.0

    def _newton_failed(self) -> Optional[float]:
        self.newton_failures += 1
        if self.newton_failures >= 3:
            self.newton_ok = False
        return None


def _slots(x: Dual, seed_tag: Hashable) -> Iterator[Tuple[int, float]]:
    for key, v in x.tangents.items():
        if isinstance(key, tuple) and len(key) == 2 and key[0] == seed_tag:
            yield key[1], v



# ---------- entry points ----------

def evaluate(
    term: Term,
    env: Optional[Mapping[str, SemVal]] = None,
    params: SemParams = SemParams(),
    ctx: Optional[TyCtx] = None,
) -> Tuple[SemVal, EvalReport]:
    """Truncated denotation of term together with the fixpoint report."""
    env = dict(env or {})
    if ctx is None:
        ctx = TyCtx(tuple((x, NAT) for x, v in env.items() if isinstance(v, Ground)))
        if any(isinstance(v, Func) for v in env.values()):
            raise PreconditionError("function-valued environments need an explicit typing context")
    typecheck(ctx, term)
    ev = _Evaluator(params)
    return ev.ev(term, env, ctx), ev.report


def interp(
    term: Term,
    env: Optional[Mapping[str, SemVal]] = None,
    params: SemParams = SemParams(),
    ctx: Optional[TyCtx] = None,
) -> SemVal:
    value, report = evaluate(term, env, params, ctx)
    if report.table_overflow:
        warn(f"⚠ recursive table exceeded {params.max_table} rows; result is a lower bound")
    return value


def prob_zero(term: Term, params: SemParams = SemParams()) -> Scalar:
    """Probability of reaching 0, read off the denotation."""
    if not is_closed(term) or typecheck(TyCtx(), term) != NAT:
        raise PreconditionError("prob_zero needs a closed term of type nat")
    v = interp(term, {}, params)
    assert isinstance(v, Ground)
    return v.vec[0]


def _spy_env(
    term: Term,
    rates: Mapping[Label, Union[float, Fraction]],
    params: SemParams,
    wrt: Sequence[Label],
) -> Tuple[Term, Dict[str, SemVal], TyCtx]:
    vs = spy_vars(term)
    spied = spy(term, vs)
    env: Dict[str, SemVal] = {}
    for l, x in sorted(vs.items()):
        r = rates.get(l, 1)
        if l in wrt:
            w: Scalar = Dual(float(r), {l: 1.0})
        else:
            w = params.scalar.embed(Fraction(r)) if params.scalar is EXACT else float(r)
        env[x] = point(0, params, w)
    return spied, env, spy_context(vs)


def spy_probability(
    term: Term,
    rates: Mapping[Label, Union[float, Fraction]],
    params: SemParams = SemParams(),
    wrt: Sequence[Label] = (),
) -> Tuple[Scalar, EvalReport]:
    """Probability of 0 for the spied term with each x_l bound to r_l times the point 0.

    With wrt nonempty the result is a Dual carrying d/dr_l for each l in wrt.
    """
    if typecheck(TyCtx(), term) != NAT:
        raise PreconditionError("spy_probability needs a closed term of type nat")
    if wrt:
        params = params.with_scalar(DUAL)
    spied, env, ctx = _spy_env(term, rates, params, wrt)
    value, report = evaluate(spied, env, params, ctx)
    assert isinstance(value, Ground)
    return value.vec[0], report


def expect_labels_semantic(
    term: Term, ls: Sequence[Label], params: SemParams = SemParams()
) -> Dict[Label, Expectation]:
    """Expected uses of each label given convergence, one dual pass for all of them."""
    present = [l for l in ls if l in labels(term)]
    value, report = spy_probability(term, {}, params, present)
    p = primal(value)
    out: Dict[Label, Expectation] = {}
    for l in ls:
        if p == 0.0:
            out[l] = Diverged("probability of convergence is 0")
        elif l not in present:
            out[l] = Finite(0.0)
        elif report.tangent_diverged:
            out[l] = Diverged("tangent iteration does not contract", infinite=True)
        else:
            out[l] = Finite(tangent(value, l) / p)
    return out


def expect_label_semantic(term: Term, l: Label, params: SemParams = SemParams()) -> Expectation:
    return expect_labels_semantic(term, [l], params)[l]


def _lagrange(xs: Sequence[Fraction], ys: Sequence[Fraction]) -> List[Fraction]:
    n = len(xs)
    coeffs = [Fraction(0)] * n
    for i in range(n):
        basis = [Fraction(1)]
        denom = Fraction(1)
        for j in range(n):
            if j == i:
                continue
            # multiply basis by (x - xs[j])
            nxt = [Fraction(0)] * (len(basis) + 1)
            for k, c in enumerate(basis):
                nxt[k] -= c * xs[j]
                nxt[k + 1] += c
            basis = nxt
            denom *= xs[i] - xs[j]
        scale = ys[i] / denom
        for k, c in enumerate(basis):
            coeffs[k] += c * scale
    return coeffs


def _horner(coeffs: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def label_polynomial(
    term: Term,
    l: Label,
    degree: int,
    params: SemParams = SemParams(),
    fuel: int = 10000,
    max_tape: int = 64,
) -> List[Fraction]:
    """Coefficients of r -> P(0) for the spied term, i.e. P(l used k times), exactly."""
    if degree < 0:
        raise PreconditionError("degree must be >= 0")
    extra = labels(term) - {l}
    if extra:
        raise PreconditionError(f"label_polynomial needs a single-label term, also found {sorted(x.name for x in extra)}")
    res = enumerate_tapes(State.initial(term), fuel, max_tape)
    if res.residual != 0:
        raise PreconditionError(f"enumeration leaves residual {res.residual}; the polynomial is not exact")
    exact = params.with_scalar(EXACT)

    def at(r: Fraction) -> Fraction:
        v, _ = spy_probability(term, {l: r}, exact)
        return Fraction(v)

    xs = [Fraction(k, degree) for k in range(degree + 1)] if degree else [Fraction(1)]
    coeffs = _lagrange(xs, [at(x) for x in xs])
    check_at = Fraction(1, 2 * degree + 3)
    if _horner(coeffs, check_at) != at(check_at):
        raise PreconditionError(f"degree bound {degree} too small")
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs

# src/ppcfkit/transform.py
from __future__ import annotations

from fractions import Fraction
from typing import Dict, Mapping, Optional

from .ast import (
    Abs, App, Arrow, Dice, DiceLab, Fix, If, Label, Let, Mark, NAT, Term, Ty, TyCtx, Var,
    as_rat, free_vars, is_core, is_lab, labels, map_children, subterms,
)
from .errors import PreconditionError
from .typecheck import typecheck

__all__ = ["loop", "strip", "mark_all", "lcof", "spy", "spy_vars", "spy_context", "tamed"]


def loop(sigma: Ty) -> Term:
    """The ever-looping term fix (fun x: sigma => x)."""
    return Fix(Abs("x", sigma, Var("x")))


def strip(term: Term) -> Term:
    """Drop marks and turn labeled coins into plain coins."""
    if isinstance(term, Mark):
        return strip(term.t)
    if isinstance(term, DiceLab):
        return Dice(term.r)
    return map_children(term, strip)


def mark_all(term: Term, l: Label) -> Term:
    """Wrap every subterm occurrence, the root included, in a mark l."""
    if not is_core(term):
        raise PreconditionError("mark_all needs an unlabeled term")
    return _mark_all(term, l)


def _mark_all(term: Term, l: Label) -> Term:
    return Mark(map_children(term, lambda c: _mark_all(c, l)), l)


def _binder_walk(term: Term, ctx: TyCtx, on_mark) -> Term:
    # structural rebuild that tracks the typing context; on_mark(mark, ctx, rebuilt_body)
    if isinstance(term, Mark):
        return on_mark(term, ctx, _binder_walk(term.t, ctx, on_mark))
    if isinstance(term, Abs):
        return Abs(term.x, term.ty, _binder_walk(term.body, ctx.extend(term.x, term.ty), on_mark))
    if isinstance(term, Let):
        return Let(
            term.x,
            _binder_walk(term.bound, ctx, on_mark),
            _binder_walk(term.body, ctx.extend(term.x, NAT), on_mark),
        )
    return map_children(term, lambda c: _binder_walk(c, ctx, on_mark))


def lcof(term: Term, r: Mapping[Label, Fraction], ctx: Optional[TyCtx] = None) -> Term:
    """Replace each mark l by a guard coin[l](r_l) that falls into a loop on failure."""
    ctx = ctx or TyCtx()
    if not is_lab(term):
        raise PreconditionError("lcof needs a term without labeled coins")
    typecheck(ctx, term)
    missing = labels(term) - set(r)
    if missing:
        raise PreconditionError(f"no probability for label(s) {sorted(l.name for l in missing)}")
    rates = {l: as_rat(v) for l, v in r.items()}

    def on_mark(m: Mark, c: TyCtx, body: Term) -> Term:
        sigma = typecheck(c, m.t)
        return If(DiceLab(m.label, rates[m.label]), body, loop(sigma))

    return _binder_walk(term, ctx, on_mark)


def spy_vars(term: Term, ctx: Optional[TyCtx] = None) -> Dict[Label, str]:
    """Fresh x_<label> variable per label, suffixed until it clashes with nothing."""
    taken = _names(term) | set((ctx or TyCtx()).names())
    out: Dict[Label, str] = {}
    for l in sorted(labels(term)):
        name, k = f"x_{l.name}", 1
        while name in taken:
            k += 1
            name = f"x_{l.name}{k}"
        taken.add(name)
        out[l] = name
    return out


def _names(term: Term) -> set[str]:
    out: set[str] = set()
    for t in subterms(term):
        if isinstance(t, Var):
            out.add(t.name)
        elif isinstance(t, (Abs, Let)):
            out.add(t.x)
    return out


def spy(
    term: Term, vars: Optional[Mapping[Label, str]] = None, ctx: Optional[TyCtx] = None
) -> Term:
    """Replace each mark l by a guard on the free nat variable vars[l]."""
    ctx = ctx or TyCtx()
    if not is_lab(term):
        raise PreconditionError("spy needs a term without labeled coins")
    typecheck(ctx, term)
    vs = dict(vars) if vars is not None else spy_vars(term, ctx)
    missing = labels(term) - set(vs)
    if missing:
        raise PreconditionError(f"no spy variable for label(s) {sorted(l.name for l in missing)}")
    chosen = list(vs.values())
    if len(set(chosen)) != len(chosen):
        raise PreconditionError("spy variables must be pairwise distinct")
    clash = set(chosen) & (_names(term) | free_vars(term) | set(ctx.names()))
    if clash:
        raise PreconditionError(f"spy variable clash: {sorted(clash)}")

    def on_mark(m: Mark, c: TyCtx, body: Term) -> Term:
        return If(Var(vs[m.label]), body, loop(typecheck(c, m.t)))

    return _binder_walk(term, ctx, on_mark)


def spy_context(vars: Mapping[Label, str], ctx: Optional[TyCtx] = None) -> TyCtx:
    """ctx extended with every spy variable at type nat, in label order."""
    out = ctx or TyCtx()
    for l in sorted(vars):
        out = out.extend(vars[l], NAT)
    return out


def tamed(context: Term, p: Fraction, sigma: Ty) -> Term:
    """fun z: sigma => context (ifz coin(p) then z else loop)"""
    p = as_rat(p)
    if not (0 <= p < 1):
        raise PreconditionError(f"taming probability must lie in [0,1), got {p}")
    ty = typecheck(TyCtx(), context)
    if ty != Arrow(sigma, NAT):
        raise PreconditionError("tamed needs a closed context of type sigma -> nat")
    z = "z"
    k = 1
    while z in _names(context):
        k += 1
        z = f"z{k}"
    return Abs(z, sigma, App(context, If(Dice(p), Var(z), loop(sigma))))

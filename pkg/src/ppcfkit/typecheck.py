# src/ppcfkit/typecheck.py
from __future__ import annotations

from typing import Optional

from .ast import (
    Abs, App, Arg, Arrow, Dice, DiceLab, Empty, Fix, If, IfF, Let, LetF, Mark, NAT, Nat,
    Num, Pred, PredF, Stack, Succ, SuccF, Term, Ty, TyCtx, Var,
)
from .errors import TypeCheckError
from .parse import pretty, pretty_type

__all__ = ["typecheck", "typecheck_stack", "type_of_state", "check_type"]


def _expect(ctx: TyCtx, term: Term, want: Ty, where: Term) -> None:
    got = typecheck(ctx, term)
    if got != want:
        raise TypeCheckError(
            f"in {pretty(where)}: {pretty(term)} has type {pretty_type(got)}, expected {pretty_type(want)}",
            term=term, expected=want, actual=got,
        )


def typecheck(ctx: TyCtx, term: Term) -> Ty:
    """The unique type of term under ctx."""
    if isinstance(term, Num):
        if term.n < 0:
            raise TypeCheckError(f"negative numeral {term.n}", term=term)
        return NAT
    if isinstance(term, Var):
        ty = ctx.lookup(term.name)
        if ty is None:
            raise TypeCheckError(f"unbound variable {term.name}", term=term)
        return ty
    if isinstance(term, (Dice, DiceLab)):
        return NAT
    if isinstance(term, (Succ, Pred)):
        _expect(ctx, term.t, NAT, term)
        return NAT
    if isinstance(term, Mark):
        return typecheck(ctx, term.t)
    if isinstance(term, Let):
        _expect(ctx, term.bound, NAT, term)
        return typecheck(ctx.extend(term.x, NAT), term.body)
    if isinstance(term, If):
        _expect(ctx, term.scrut, NAT, term)
        ty = typecheck(ctx, term.zero)
        _expect(ctx, term.nonzero, ty, term)
        return ty
    if isinstance(term, Abs):
        return Arrow(term.ty, typecheck(ctx.extend(term.x, term.ty), term.body))
    if isinstance(term, App):
        fty = typecheck(ctx, term.fn)
        if not isinstance(fty, Arrow):
            raise TypeCheckError(
                f"in {pretty(term)}: {pretty(term.fn)} has type {pretty_type(fty)}, expected a function",
                term=term.fn, actual=fty,
            )
        _expect(ctx, term.arg, fty.dom, term)
        return fty.cod
    if isinstance(term, Fix):
        fty = typecheck(ctx, term.t)
        if not isinstance(fty, Arrow) or fty.dom != fty.cod:
            raise TypeCheckError(
                f"fix expects a term of type s -> s, got {pretty_type(fty)}",
                term=term.t, actual=fty,
            )
        return fty.dom
    raise TypeCheckError(f"not a term: {term!r}", term=term)


def check_type(term: Term, ctx: Optional[TyCtx] = None) -> Optional[Ty]:
    """typecheck, returning None instead of raising."""
    try:
        return typecheck(ctx or TyCtx(), term)
    except TypeCheckError:
        return None


def typecheck_stack(stack: Stack) -> Ty:
    """The type s with s |- stack, i.e. the stack consumes an s and produces nat."""
    empty = TyCtx()
    if isinstance(stack, Empty):
        return NAT
    rest_ty = typecheck_stack(stack.rest)
    if isinstance(stack, Arg):
        return Arrow(typecheck(empty, stack.m), rest_ty)
    if isinstance(stack, (SuccF, PredF)):
        if not isinstance(rest_ty, Nat):
            raise TypeCheckError(f"{type(stack).__name__} must sit on a nat stack, found {pretty_type(rest_ty)}")
        return NAT
    if isinstance(stack, IfF):
        _expect(empty, stack.zero, rest_ty, stack.zero)
        _expect(empty, stack.nonzero, rest_ty, stack.nonzero)
        return NAT
    if isinstance(stack, LetF):
        _expect(empty.extend(stack.x, NAT), stack.body, rest_ty, stack.body)
        return NAT
    raise TypeCheckError(f"not a stack: {stack!r}")


def type_of_state(term: Term, stack: Stack) -> Ty:
    ty = typecheck(TyCtx(), term)
    want = typecheck_stack(stack)
    if ty != want:
        raise TypeCheckError(
            f"state mismatch: term has type {pretty_type(ty)}, stack expects {pretty_type(want)}",
            term=term, expected=want, actual=ty,
        )
    return ty

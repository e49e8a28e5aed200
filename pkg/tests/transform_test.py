from fractions import Fraction

import pytest

from corpus import ADEQUACY, LABELED
from ppcfkit.ast import NAT, App, Arrow, Dice, DiceLab, If, Label, Mark, Num, TyCtx, Var, is_core, is_lc
from ppcfkit.errors import PreconditionError
from ppcfkit.explore import enumerate
from ppcfkit.machine import State
from ppcfkit.parse import parse, pretty
from ppcfkit.transform import lcof, loop, mark_all, spy, spy_context, spy_vars, strip, tamed
from ppcfkit.typecheck import typecheck

L, M = Label("l"), Label("m")
FUEL, MAX_TAPE = 2000, 30


def enum(term):
    return enumerate(State.initial(term), FUEL, MAX_TAPE)


def test_loop():
    assert typecheck(TyCtx(), loop(NAT)) == NAT
    assert typecheck(TyCtx(), loop(Arrow(NAT, NAT))) == Arrow(NAT, NAT)
    assert enum(loop(NAT)).accept_total == 0


def test_strip():
    assert strip(parse("#l{coin[m](1/3)}")) == Dice(Fraction(1, 3))
    for src in LABELED:
        assert is_core(strip(parse(src)))


def test_mark_all():
    assert mark_all(Num(0), L) == Mark(Num(0), L)
    assert mark_all(parse("succ 0"), L) == parse("#l{succ #l{0}}")
    with pytest.raises(PreconditionError):
        mark_all(parse("#l{0}"), L)


def test_mark_all_counts_every_step_but_keeps_the_mass():
    t = parse("ifz coin(1/2) then 0 else 1")
    res = enum(mark_all(t, L))
    assert res.accept_total == enum(t).accept_total
    assert all(mu.count(L) >= 3 for mu in res.table)


def test_lcof():
    assert lcof(parse("#l{0}"), {L: Fraction(1, 2)}) == If(DiceLab(L, Fraction(1, 2)), Num(0), loop(NAT))
    fn = lcof(parse("#l{fun x: nat => x}"), {L: 1})
    assert pretty(fn) == "ifz coin[l](1) then fun x: nat => x else fix (fun x: nat -> nat => x)"
    assert parse(pretty(fn)) == fn
    assert is_lc(lcof(parse(LABELED[3]), {L: Fraction(1, 3)}))
    with pytest.raises(PreconditionError):
        lcof(parse("#l{#m{0}}"), {L: Fraction(1, 2)})


@pytest.mark.parametrize("src", LABELED)
def test_lcof_at_one_keeps_acceptance(src):
    t = parse(src)
    assert enum(strip(lcof(t, {L: 1}))).accept_total == enum(strip(t)).accept_total


@pytest.mark.parametrize("src", LABELED)
@pytest.mark.parametrize("r", [Fraction(1, 2), Fraction(2, 3)])
def test_lcof_weighs_each_use(src, r):
    t = parse(src)
    table = enum(t).table
    expected = sum((p * r ** mu.count(L) for mu, p in table.items()), Fraction(0))
    assert enum(strip(lcof(t, {L: r}))).accept_total == expected


def test_spy():
    vs = spy_vars(parse("#l{0}"))
    assert vs == {L: "x_l"}
    assert spy(parse("#l{0}")) == If(Var("x_l"), Num(0), loop(NAT))
    ctx = spy_context(vs)
    assert typecheck(ctx, spy(parse("#l{#l{2}}"))) == NAT


def test_spy_vars_avoid_clashes():
    t = parse("(fun x_l: nat => #l{x_l}) 0")
    vs = spy_vars(t)
    assert vs[L] == "x_l2"
    assert typecheck(spy_context(vs), spy(t, vs)) == NAT
    with pytest.raises(PreconditionError):
        spy(t, {L: "x_l"})
    with pytest.raises(PreconditionError):
        spy(parse("#l{#m{0}}"), {L: "a", M: "a"})


def test_tamed():
    c = parse("fun y: nat => y")
    out = tamed(c, Fraction(1, 2), NAT)
    assert typecheck(TyCtx(), out) == Arrow(NAT, NAT)
    assert pretty(out) == "fun z: nat => (fun y: nat => y) (ifz coin(1/2) then z else fix (fun x: nat => x))"
    with pytest.raises(PreconditionError):
        tamed(c, Fraction(1), NAT)
    with pytest.raises(PreconditionError):
        tamed(parse("0"), Fraction(1, 2), NAT)


@pytest.mark.parametrize("src", ADEQUACY[:8])
def test_tamed_identity_scales_the_mass(src):
    t = parse(src)
    p = Fraction(1, 3)
    tamed_run = enum(App(tamed(parse("fun y: nat => y"), p, NAT), t))
    assert tamed_run.accept_total == p * enum(t).accept_total

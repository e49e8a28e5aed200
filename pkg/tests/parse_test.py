from fractions import Fraction

import pytest

from corpus import ADEQUACY, DETERMINISTIC, LABELED
from ppcfkit.ast import (
    NAT, Abs, App, Arrow, Dice, DiceLab, Fix, If, Label, Let, Mark, Num, Pred, Succ, Var, arrow,
)
from ppcfkit.errors import ParseError
from ppcfkit.parse import (
    format_rat, parse, parse_multitape, parse_rat, parse_tape, parse_type, pretty, pretty_type,
)

L = Label("l")


def test_atoms():
    assert parse("0") == Num(0)
    assert parse("coin(1/3)") == Dice(Fraction(1, 3))
    assert parse("coin(0.25)") == Dice(Fraction(1, 4))
    assert parse("coin[l](1/2)") == DiceLab(L, Fraction(1, 2))
    assert parse("#l{0}") == Mark(Num(0), L)


def test_application_is_left_associative():
    assert parse("f a b") == App(App(Var("f"), Var("a")), Var("b"))


def test_binders_extend_right():
    t = parse("fun x: nat => succ x")
    assert t == Abs("x", NAT, Succ(Var("x")))
    t = parse("let x = coin(1/2) in ifz x then 0 else pred x")
    assert t == Let("x", Dice(Fraction(1, 2)), If(Var("x"), Num(0), Pred(Var("x"))))


def test_fix_and_types():
    t = parse("fix (fun f: nat -> nat => f)")
    assert isinstance(t, Fix) and t.t.ty == Arrow(NAT, NAT)
    assert parse_type("nat -> nat -> nat") == arrow(NAT, NAT, NAT)
    assert parse_type("(nat -> nat) -> nat") == Arrow(Arrow(NAT, NAT), NAT)
    assert pretty_type(Arrow(Arrow(NAT, NAT), NAT)) == "(nat -> nat) -> nat"


def test_comments_are_skipped():
    assert parse("-- the answer\nsucc 0 -- one") == Succ(Num(0))


@pytest.mark.parametrize("src", ADEQUACY + LABELED + [s for s, _, _ in DETERMINISTIC])
def test_pretty_reparses(src):
    t = parse(src)
    assert parse(pretty(t)) == t


@pytest.mark.parametrize("src, line, col", [
    ("coin(3/2)", 1, 6),
    ("succ", 1, 5),
    ("0 0 )", 1, 5),
    ("fun x nat => x", 1, 7),
    ("\n  ifz 0 then 1", 2, 15),
])
def test_parse_errors_carry_position(src, line, col):
    with pytest.raises(ParseError) as e:
        parse(src)
    assert (e.value.line, e.value.column) == (line, col)


def test_rates_and_tapes():
    assert parse_rat("1/3") == Fraction(1, 3)
    assert parse_rat("1") == 1
    with pytest.raises(ParseError):
        parse_rat("1/0")
    assert format_rat(Fraction(2, 4)) == "1/2"
    assert format_rat(Fraction(3)) == "3"
    assert parse_tape("0110") == (0, 1, 1, 0)
    assert parse_tape("") == ()
    with pytest.raises(ParseError):
        parse_tape("012")
    assert parse_multitape("l:01, m:") == {L: (0, 1), Label("m"): ()}

import itertools
from fractions import Fraction

import pytest

from corpus import LABELED, LOOP
from ppcfkit.ast import Label
from ppcfkit.errors import PreconditionError
from ppcfkit.explore import enumerate, enumerate_domain, enumerate_lc_domain
from ppcfkit.machine import (
    AcceptZero, LabelMultiset, OutOfFuel, Reject, State, run_lc, run_lc_shuffle, run_tape,
)
from ppcfkit.parse import parse
from ppcfkit.transform import lcof, strip

L = Label("l")
MAX_LEN = 6


def st(src):
    return State.initial(parse(src))


def tapes(n):
    for k in range(n + 1):
        yield from itertools.product((0, 1), repeat=k)


# ---------- single runs ----------

def test_zero_accepts_in_one_step():
    assert run_tape(st("0"), (), 1) == AcceptZero(Fraction(1), LabelMultiset(), 1)
    assert isinstance(run_tape(st("0"), (), 0), OutOfFuel)


@pytest.mark.parametrize("src, tape, expected", [
    ("coin(1/3)", (0,), "accept 1/3"),
    ("coin(1/3)", (1,), "terminal-nonzero"),
    ("coin(1/3)", (), "tape-exhausted"),
    ("0", (1,), "leftover-tape"),
    ("ifz coin(1/2) then coin(1/4) else 0", (0, 1), "terminal-nonzero"),
    ("ifz coin(1/2) then coin(1/4) else 0", (0, 0), "accept 1/8"),
    ("ifz coin(1/2) then coin(1/4) else 0", (1,), "accept 1/2"),
    ("let x = coin(1/3) in ifz x then 0 else x", (1,), "terminal-nonzero"),
])
def test_run_tape(src, tape, expected):
    out = run_tape(st(src), tape, 100)
    if expected.startswith("accept"):
        assert isinstance(out, AcceptZero)
        assert out.weight == Fraction(expected.split()[1])
    else:
        assert out == Reject(expected, out.steps)


def test_marks_are_counted():
    out = run_tape(st("#l{0}"), (), 10)
    assert out == AcceptZero(Fraction(1), LabelMultiset.of(L), out.steps)
    out = run_tape(st("(fun x: nat => ifz x then x else 0) #l{0}"), (), 100)
    assert isinstance(out, AcceptZero) and out.labels.count(L) == 2
    assert str(out.labels) == "{l:2}"


def test_forced_coin_has_zero_weight():
    out = run_tape(st("coin(0)"), (0,), 10)
    assert isinstance(out, AcceptZero) and out.weight == 0
    out = run_tape(st("ifz coin(1) then 1 else 0"), (1,), 10)
    assert isinstance(out, AcceptZero) and out.weight == 0
    assert run_tape(st("ifz coin(1) then 1 else 0"), (0,), 10).reason == "terminal-nonzero"
    # exact enumeration never reports a zero-weight acceptance
    res = enumerate(State.initial(parse("ifz coin(1) then 1 else 0")), 10, 4)
    assert res.table == {} and res.accept_total == 0
    assert res.reject_total == 1


def test_loop_runs_out_of_fuel():
    assert run_tape(st(LOOP), (), 50) == OutOfFuel(50)


def test_fuel_monotonicity():
    s = st("(fix (fun f: nat -> nat => fun n: nat => ifz coin(1/2) then n else f (pred n))) 2")
    for tape in tapes(4):
        first = next((k for k in range(200) if isinstance(run_tape(s, tape, k), AcceptZero)), None)
        if first is None:
            continue
        out = run_tape(s, tape, first)
        for k in range(first, first + 20):
            assert run_tape(s, tape, k) == out


def test_variant_preconditions():
    with pytest.raises(PreconditionError):
        run_tape(st("coin[l](1/2)"), (0,), 10)
    with pytest.raises(PreconditionError):
        run_lc(st("#l{0}"), (), {L: ()}, 10)
    with pytest.raises(PreconditionError):
        run_lc(st("coin[l](1/2)"), (), {}, 10)


# ---------- the lc machine ----------

def test_run_lc_examples():
    s = st("coin[l](1/2)")
    assert run_lc(s, (), {L: (0,)}, 10) == AcceptZero(Fraction(1, 2), LabelMultiset(), 2)
    assert run_lc(s, (), {L: ()}, 10).reason == "empty-label-tape"
    assert run_lc(st("0"), (), {L: (0,)}, 10).reason == "leftover-tape"


def test_shuffle_examples():
    assert run_lc_shuffle(st("coin[l](1/2)"), (), {L: (0,)}, 10) == (0,)
    assert run_lc_shuffle(st("0"), (), {L: ()}, 10) == ()
    s = st("ifz coin(1/4) then coin[l](1/2) else 0")
    assert run_lc_shuffle(s, (0,), {L: (0,)}, 10) == (0, 0)
    assert run_lc_shuffle(s, (1,), {L: (0,)}, 10) is None


# ---------- structure over every short tape ----------

LC_SOURCES = [
    "coin[l](1/2)",
    "ifz coin(1/4) then coin[l](1/2) else 0",
    "let x = coin[l](1/3) in ifz coin[m](1/2) then x else coin(1/2)",
    "ifz coin[l](2/3) then (ifz coin[l](1/2) then coin(1/5) else 0) else coin[m](1/4)",
    "(fun x: nat => ifz x then x else 0) coin[m](1/2)",
]
LC_STATES = [st(src) for src in LC_SOURCES] + [
    State.initial(lcof(parse(src), {L: Fraction(1, 2)})) for src in LABELED[:8]
]


@pytest.mark.parametrize("src", LABELED)
def test_strip_keeps_the_domain(src):
    s = st(src)
    s0 = State.initial(strip(s.term))
    for tape in tapes(MAX_LEN):
        a, b = run_tape(s, tape, 2000), run_tape(s0, tape, 2000)
        assert isinstance(a, AcceptZero) == isinstance(b, AcceptZero)
        if isinstance(a, AcceptZero):
            assert a.weight == b.weight


@pytest.mark.parametrize("s", LC_STATES, ids=range(len(LC_STATES)))
def test_lc_runs_factor_through_the_shuffle(s):
    flat = State.initial(strip(s.term))
    seen = {}
    for acc in enumerate_lc_domain(s, 2000, MAX_LEN, MAX_LEN):
        out = run_lc(s, acc.tape, acc.mtape_dict(), 2000)
        assert isinstance(out, AcceptZero) and out.weight == acc.weight
        merged = run_lc_shuffle(s, acc.tape, acc.mtape_dict(), 2000)
        assert merged is not None
        again = run_tape(flat, merged, 2000)
        assert isinstance(again, AcceptZero) and again.weight == out.weight
        # injective
        assert merged not in seen
        seen[merged] = acc
    for acc in enumerate_domain(flat, 2000, MAX_LEN):
        assert acc.tape in seen


@pytest.mark.parametrize("src", LABELED[:8])
def test_lcof_accepts_only_zero_label_tapes(src):
    t = parse(src)
    s = State.initial(lcof(t, {L: Fraction(1, 3)}))
    for acc in enumerate_lc_domain(s, 2000, MAX_LEN, MAX_LEN):
        for _, bits in acc.mtapes:
            assert set(bits) <= {0}

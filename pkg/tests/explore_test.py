from fractions import Fraction

import pytest

from corpus import ADEQUACY, LABELED, LOOP, mq_source
from ppcfkit.ast import Label
from ppcfkit.errors import PreconditionError
from ppcfkit.explore import (
    enumerate, enumerate_domain, expect_label_operational, summarize,
)
from ppcfkit.machine import LabelMultiset, State
from ppcfkit.parse import parse

L = Label("l")
FUEL, MAX_TAPE = 2000, 30


def enum(src, fuel=FUEL, max_tape=MAX_TAPE):
    return enumerate(State.initial(parse(src)), fuel, max_tape)


def test_examples():
    res = enum("0")
    assert res.accept_total == 1 and res.residual == 0
    res = enum(f"ifz coin(1/2) then 0 else {LOOP}")
    assert res.accept_total == Fraction(1, 2)
    assert res.residual == Fraction(1, 2)
    assert res.reject_total == 0


@pytest.mark.parametrize("src", ADEQUACY + LABELED)
def test_mass_is_conserved(src):
    assert enum(src).conserved()


def test_tables_by_label_multiset():
    res = enum("ifz coin(1/2) then #l{0} else #l{#l{0}}")
    assert res.table == {
        LabelMultiset.of(L): Fraction(1, 2),
        LabelMultiset.of(L, L): Fraction(1, 2),
    }
    assert res.count_distribution(L) == {1: Fraction(1, 2), 2: Fraction(1, 2)}
    assert res.label_lower(L) == Fraction(3, 2)


def test_terminals_and_outcomes():
    res = enum("let x = coin(1/2) in let y = coin(1/2) in ifz x then y else succ y")
    assert res.terminals == {0: Fraction(1, 4), 1: Fraction(1, 2), 2: Fraction(1, 4)}
    assert res.support() == {0, 1, 2}
    assert sum(res.outcomes.values()) == 1


def test_fuel_and_tape_bounds_feed_the_residual():
    src = "(fix (fun f: nat -> nat => fun n: nat => ifz coin(1/2) then n else f (succ n))) 0"
    short = enum(src, max_tape=3)
    assert short.accept_total == Fraction(1, 2)
    assert short.residual == Fraction(1, 8)
    assert enum(LOOP, fuel=100).residual == 1


def test_lower_bounds_grow_with_fuel():
    src = mq_source("3/4")
    last = Fraction(0)
    for fuel in (50, 150, 400):
        res = enum(src, fuel=fuel, max_tape=10)
        assert res.accept_total >= last
        assert res.accept_total <= Fraction(1, 3)
        last = res.accept_total


def test_domain_keeps_zero_weight_tapes():
    accs = enumerate_domain(State.initial(parse("coin(0)")), 10, 4)
    assert [a.tape for a in accs] == [(0,)]
    assert accs[0].weight == 0
    assert enum("coin(0)").accept_total == 0


def test_labeled_coins_need_the_lc_enumerator():
    with pytest.raises(PreconditionError):
        enum("coin[l](1/2)")


# ---------- call summaries ----------

@pytest.mark.parametrize("src", ADEQUACY + LABELED)
def test_summaries_match_paths_when_both_finish(src):
    paths = enum(src)
    if paths.residual != 0:
        pytest.skip("paths leave residual mass")
    sums = summarize(parse(src), segment_fuel=FUEL)
    assert sums.table == paths.table
    assert sums.terminals == paths.terminals
    assert sums.conserved()


@pytest.mark.parametrize("q, prob", [("1/4", 1.0), ("3/4", 1 / 3)])
def test_summaries_resolve_mq(q, prob):
    res = summarize(parse(mq_source(q)), segment_fuel=500)
    assert res.accept_total <= 1
    assert float(res.accept_total) == pytest.approx(prob, abs=1e-6)
    assert res.conserved()


def test_operational_expectation_examples():
    assert expect_label_operational(parse("#l{0}"), L) == (1, 1, 0)
    lower, acc, residual = expect_label_operational(parse("0"), L)
    assert (lower, acc) == (0, 1)


@pytest.mark.parametrize("q, prob", [("1/4", 1.0), ("3/4", 1 / 3)])
def test_operational_expectation_of_mq(q, prob):
    lower, acc, residual = expect_label_operational(
        parse(mq_source(q, "#l{0}")), L, fuel=500, strategy="summaries", prune=Fraction(1, 10**9),
    )
    # the diverging share stays residual, it is not a shortfall
    assert float(acc) == pytest.approx(prob, abs=1e-4)
    assert float(acc + residual) == pytest.approx(1.0, abs=1e-12)
    assert float(lower / acc) == pytest.approx(3.0, abs=1e-2)


def test_summaries_stop_at_the_critical_bias(capsys):
    res = summarize(parse(mq_source("1/2", "#l{0}")), segment_fuel=500)
    assert "converge too slowly" in capsys.readouterr().err
    assert 0 < res.accept_total <= 1
    assert res.conserved()


def test_summaries_keep_the_heaviest_outcomes():
    src = mq_source("1/4", "#l{0}")
    full = summarize(parse(src), segment_fuel=500)
    capped = summarize(parse(src), segment_fuel=500, max_outcomes=4)
    assert len(capped.outcomes) <= 4
    assert capped.accept_total <= full.accept_total
    assert capped.residual > full.residual
    assert capped.conserved()
    with pytest.raises(PreconditionError):
        summarize(parse("0"), max_outcomes=0)


def test_unknown_strategy():
    with pytest.raises(PreconditionError):
        expect_label_operational(parse("#l{0}"), L, strategy="bfs")

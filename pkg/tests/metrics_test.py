from fractions import Fraction

import numpy as np
import pytest

from ppcfkit.contexts import NamedContext, builtin_contexts
from ppcfkit.errors import PreconditionError
from ppcfkit.metrics import (
    amplifier_context, dist_ground, exits_ball, glb, lipschitz_check, lub, max_grid_slope,
    norm_ground, tamed_distance_estimate, untamed_gap,
)
from ppcfkit.parse import parse
from ppcfkit.semantics import SemParams, interp
from ppcfkit.series import phi_prefix, random_series


def _sub_probability(rng, k=6):
    v = rng.random(k)
    return v / v.sum() * rng.random()


def test_lattice_identities():
    rng = np.random.default_rng(5)
    for _ in range(10**4):
        u, v, w = (_sub_probability(rng) for _ in range(3))
        m, j = glb(u, v), lub(u, v)
        assert np.all(m <= u + 1e-15) and np.all(u <= j + 1e-15)
        assert np.allclose(m + j, u + v)
        assert dist_ground(u, v) == pytest.approx(np.abs(u - v).sum())
        assert dist_ground(u, w) <= dist_ground(u, v) + dist_ground(v, w) + 1e-12
        assert norm_ground(m) <= min(norm_ground(u), norm_ground(v)) + 1e-12


def test_lattice_laws():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        u, v, w = (_sub_probability(rng, k) for k in (4, 6, 5))
        for op in (glb, lub):
            assert np.allclose(op(u, u), u)
            assert np.allclose(op(u, v), op(v, u))
            assert np.allclose(op(op(u, v), w), op(u, op(v, w)))


def test_norm_axioms():
    rng = np.random.default_rng(13)
    assert norm_ground([0.0, 0.0]) == 0.0
    assert norm_ground([]) == 0.0
    for _ in range(1000):
        u, v = _sub_probability(rng), _sub_probability(rng, 3)
        a = rng.random()
        assert norm_ground(u) >= 0.0
        assert norm_ground(u) <= 1.0 + 1e-12
        assert norm_ground(a * u) == pytest.approx(a * norm_ground(u))
        padded = np.pad(v, (0, u.size - v.size))
        assert norm_ground(u + padded) == pytest.approx(norm_ground(u) + norm_ground(v))
        assert norm_ground(lub(u, v)) <= norm_ground(u) + norm_ground(v) + 1e-12


def test_lub_can_leave_the_ball():
    u, v = [0.9, 0.0], [0.0, 0.9]
    assert norm_ground(lub(u, v)) == pytest.approx(1.8)
    assert exits_ball(lub(u, v))
    assert not exits_ball(glb(u, v))
    assert dist_ground([0.5], [0.5, 0.25]) == pytest.approx(0.25)


def test_ground_values_are_accepted():
    params = SemParams(K=4)
    a = interp(parse("coin(1/4)"), {}, params)
    b = interp(parse("coin(3/4)"), {}, params)
    assert dist_ground(a, b) == pytest.approx(1.0)


def test_lipschitz_on_random_series():
    rng = np.random.default_rng(9)
    for i in range(1000):
        s = random_series(rng)
        for p in np.linspace(0.1, 0.9, 9):
            rep = lipschitz_check(s, float(p), 100, seed=i)
            assert rep.ok, rep.violations[:3]
            assert rep.max_ratio <= rep.constant + 1e-12


def test_lipschitz_radius_must_stay_inside():
    with pytest.raises(PreconditionError):
        lipschitz_check(phi_prefix(0.5, 10), 1.0, 10)


def test_critical_phi_is_steep_near_one():
    assert max_grid_slope(phi_prefix(0.5, 40000), 0.999) > 10
    assert max_grid_slope(phi_prefix(0.25, 200), 0.999) < 4


@pytest.mark.parametrize("eps", [Fraction(1, 100), Fraction(1, 20), Fraction(1, 10)])
@pytest.mark.parametrize("p", [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)])
def test_tamed_distance_bound(eps, p):
    m1, m2 = parse("coin(0)"), parse(f"coin({eps})")
    rep = tamed_distance_estimate(m1, m2, p, params=SemParams(K=8))
    assert rep.distance == pytest.approx(float(2 * eps))
    assert rep.bound == pytest.approx(float(p / (1 - p) * 2 * eps))
    assert [r.context for r in rep.rows] == [c.name for c in builtin_contexts()]
    assert rep.empirical <= rep.bound + 1e-6
    assert rep.holds


def test_amplifier_without_taming():
    amp = amplifier_context()
    params = SemParams(K=8)
    assert untamed_gap(amp, parse("coin(0)"), parse("coin(1/20)"), params) > 0.99
    rep = tamed_distance_estimate(
        parse("coin(0)"), parse("coin(1/20)"), Fraction(1, 2),
        contexts=[NamedContext("amplifier", amp)], params=params,
    )
    assert rep.rows[0].prob1 == pytest.approx(0.0, abs=1e-9)
    # tamed at 1/2 the amplifier gives (1/40) / (1 - 19/40)
    assert rep.rows[0].prob2 == pytest.approx(1 / 21, abs=1e-6)


def test_distance_preconditions():
    with pytest.raises(PreconditionError):
        tamed_distance_estimate(parse("0"), parse("1"), 1)
    with pytest.raises(PreconditionError):
        tamed_distance_estimate(parse("fun x: nat => x"), parse("1"), Fraction(1, 2))


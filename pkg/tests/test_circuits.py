import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acpoly.circuits import (EXHAUSTIVE_MAX, Builder, Circuit, Gate, TruthTable, accept_prob_uniform,
                             and_n, approx_majority, approx_majority_size_bound, cube_points,
                             majority_n, negate, or_n, parity_n, substitute, verify_approx_majority)
from acpoly.poly import CapExceeded


def test_eval_examples():
    assert or_n(4).eval((0, 0, 0, 0)) == 0
    assert parity_n(3).eval((1, 1, 0)) == 0
    assert majority_n(5)[0b00111] == 1


def test_majority_is_strict():
    assert majority_n(4)[0b0011] == 0
    assert majority_n(4)[0b0111] == 1


@pytest.mark.parametrize("n", range(1, 13))
def test_or_n_exhaustive(n):
    tt = or_n(n).truth_table()
    assert tt[0] == 0 and all(tt[j] == 1 for j in range(1, 1 << n))


@pytest.mark.parametrize("n", range(1, 9))
def test_builders_match_reference(n):
    pts = cube_points(n)
    w = pts.sum(axis=1)
    assert np.array_equal(or_n(n).eval_batch(pts), w > 0)
    assert np.array_equal(and_n(n).eval_batch(pts), w == n)
    assert np.array_equal(parity_n(n).eval_batch(pts), w % 2 == 1)
    assert np.array_equal(negate(or_n(n)).eval_batch(pts), w == 0)
    assert list(majority_n(n)) == [int(2 * x > n) for x in w]


def test_parity_depth_is_logarithmic():
    for n in (2, 4, 8, 16):
        # each fan-in-2 XOR layer expands to AND then OR
        assert parity_n(n).depth() == 2 * (n - 1).bit_length()


def test_accept_prob_examples():
    assert accept_prob_uniform(or_n(2)) == Fraction(3, 4)
    assert accept_prob_uniform(parity_n(4)) == Fraction(1, 2)
    assert accept_prob_uniform(and_n(3)) == Fraction(1, 8)


def test_size_and_depth_conventions():
    b = Builder(3)
    x = b.inputs
    out = b.NOT(b.OR([b.AND([x[0], b.NOT(x[1])]), x[2]]))
    c = b.build(out)
    assert c.size() == 2 and c.depth() == 2
    # unreachable gates do not count
    c2 = Circuit(2, list(c.gates[:2]) + [Gate("AND", (0, 1)), Gate("OR", (0, 1))], 3)
    assert c2.size() == 1


def test_empty_gates():
    c = Circuit(1, [Gate("IN", (0,)), Gate("AND", ())], 1)
    assert c.eval((0,)) == 1
    c = Circuit(1, [Gate("IN", (0,)), Gate("OR", ())], 1)
    assert c.eval((1,)) == 0


def test_bad_wires_rejected():
    with pytest.raises(ValueError):
        Circuit(1, [Gate("IN", (0,)), Gate("AND", (2,))], 1)
    with pytest.raises(ValueError):
        Circuit(1, [Gate("IN", (3,))], 0)
    with pytest.raises(ValueError):
        Circuit(1, [Gate("XOR", ())], 0)


def test_json_round_trip():
    c = parity_n(5)
    d = Circuit.from_json(c.to_json())
    assert d.to_json() == c.to_json()
    assert d.truth_table() == c.truth_table()


def test_substitute():
    outer = or_n(2)
    inner = [and_n(3), parity_n(3)]
    c = substitute(outer, inner)
    for j in range(8):
        a = tuple((j >> i) & 1 for i in range(3))
        assert c.eval(a) == (and_n(3).eval(a) | parity_n(3).eval(a))


@settings(max_examples=40)
@given(st.integers(1, 6), st.data())
def test_eval_batch_matches_eval(n, data):
    b = Builder(n)
    wires = list(b.inputs)
    for _ in range(data.draw(st.integers(1, 8))):
        op = data.draw(st.sampled_from(["AND", "OR", "NOT"]))
        if op == "NOT":
            wires.append(b.NOT(data.draw(st.sampled_from(wires))))
        else:
            args = data.draw(st.lists(st.sampled_from(wires), min_size=1, max_size=4))
            wires.append(b.gate(op, args))
    c = b.build(wires[-1])
    pts = cube_points(n)
    batch = c.eval_batch(pts)
    assert [int(v) for v in batch] == [c.eval(tuple(int(x) for x in p)) for p in pts]


def test_truth_table_validation():
    with pytest.raises(ValueError):
        TruthTable(2, [0, 1, 1])
    with pytest.raises(ValueError):
        TruthTable(1, [0, 2])


# -- approximate majority -------------------------------------------------------


def test_approx_majority_examples():
    c = approx_majority(8, Fraction(1, 4), Fraction(2, 5))
    assert c.eval((1, 1, 0, 0, 0, 0, 0, 0)) == 0
    for s in itertools.combinations(range(8), 4):
        assert c.eval(tuple(int(i in s) for i in range(8))) == 1


def test_or_is_degenerate_approx_majority():
    for n in range(1, 7):
        assert verify_approx_majority(or_n(n), n, 0, Fraction(1, n))[0]


def test_verifier_finds_counterexample():
    ok, cex = verify_approx_majority(and_n(5), 5, Fraction(1, 4), Fraction(2, 5))
    assert not ok and sum(cex) >= 2


@pytest.mark.parametrize("ell", [1, 2, 3, 5, 8, 11, 14, 16])
def test_approx_majority_verified_small(ell):
    c = approx_majority(ell)
    assert verify_approx_majority(c, ell, Fraction(1, 4), Fraction(2, 5))[0]
    assert c.depth() <= 3
    assert c.size() <= approx_majority_size_bound(ell)


def test_approx_majority_boundary_mode():
    ell = 18
    c = approx_majority(ell)
    assert c.meta.get("verified", True)
    assert verify_approx_majority(c, ell, Fraction(1, 4), Fraction(2, 5))[0]
    assert c.depth() <= 3


def test_approx_majority_fallback_flagged():
    c = approx_majority(EXHAUSTIVE_MAX + 1)
    assert c.meta["verified"] is False


def test_approx_majority_deterministic():
    assert approx_majority(10, seed=4).to_json() == approx_majority(10, seed=4).to_json()


def test_truth_table_cap():
    with pytest.raises(CapExceeded):
        or_n(30).truth_table()

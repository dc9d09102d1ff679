import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acpoly.circuits import Builder, and_n, or_n, parity_n
from acpoly.kwise import (IRREDUCIBLE, Design, build_kwise, design_bound_applies, design_bound_check,
                          even_parity_family, field_bits, fooling_gap_exact, fooling_gap_mc,
                          fooling_sweep, gf_mul, greedy_design, poly_eval_family, sweep_csv,
                          uniform_family, verify_kwise)
from acpoly.poly import CapExceeded

from oracles import gf2_rank, gf2m_mul, poly_eval_strings


# -- field ------------------------------------------------------------------------


@pytest.mark.parametrize("m", sorted(IRREDUCIBLE))
def test_gf_mul_matches_oracle(m):
    rng = random.Random(m)
    for _ in range(200):
        a, b = rng.randrange(1 << m), rng.randrange(1 << m)
        assert gf_mul(a, b, m) == gf2m_mul(a, b, m, IRREDUCIBLE[m])


@pytest.mark.parametrize("m", range(1, 7))
def test_field_has_inverses(m):
    # irreducible modulus: every nonzero element is invertible
    for a in range(1, 1 << m):
        assert any(gf_mul(a, b, m) == 1 for b in range(1, 1 << m))


# -- families ------------------------------------------------------------------------


def test_build_examples():
    fam = build_kwise(3, 3)
    assert fam.seed_count == 8 and verify_kwise(fam)[0]
    assert list(fam.histogram()) == [1] * 8
    fam = build_kwise(2, 1)
    assert verify_kwise(fam)[0]
    fam = even_parity_family(4)
    assert fam.k == 3 and verify_kwise(fam)[0]
    assert sorted(np.flatnonzero(fam.histogram())) == [x for x in range(16) if bin(x).count("1") % 2 == 0]


def test_even_parity_not_fully_independent():
    ok, (T, b) = verify_kwise(even_parity_family(4), 4)
    assert not ok and T == (0, 1, 2, 3)


@pytest.mark.parametrize("n,k", [(n, k) for n in range(1, 9) for k in range(1, n + 1)])
def test_built_families_verify(n, k):
    fam = build_kwise(n, k)
    assert verify_kwise(fam)[0]


@pytest.mark.parametrize("n,k", [(5, 2), (6, 3), (8, 2), (7, 4)])
def test_poly_eval_matches_oracle(n, k):
    fam = poly_eval_family(n, k)
    m = field_bits(n)
    strings = poly_eval_strings(n, k, m, IRREDUCIBLE[m])
    outs = fam.outputs()
    for idx, coeffs in enumerate(itertools.product(range(1 << m), repeat=k)):
        seed = sum(c << (j * m) for j, c in enumerate(coeffs))
        assert int(outs[seed]) == strings[idx]


def test_build_rejects():
    with pytest.raises(ValueError):
        build_kwise(3, 4)
    with pytest.raises(CapExceeded):
        build_kwise(40, 6)


def test_table_export():
    rows = uniform_family(2).table()
    assert rows == [(0, "00"), (1, "10"), (2, "01"), (3, "11")]


# -- fooling --------------------------------------------------------------------------


def test_fooling_examples():
    assert fooling_gap_exact(parity_n(4), even_parity_family(4)) == Fraction(1, 2)
    assert fooling_gap_exact(or_n(4), even_parity_family(4)) == Fraction(1, 16)
    for c in (or_n(5), parity_n(5), and_n(5)):
        assert fooling_gap_exact(c, build_kwise(5, 5)) == 0


@pytest.mark.parametrize("n", [3, 4, 5])
def test_parity_separation(n):
    assert fooling_gap_exact(parity_n(n), even_parity_family(n)) == Fraction(1, 2)


@settings(max_examples=40)
@given(st.integers(1, 6), st.data())
def test_uniform_family_fools_everything(n, data):
    b = Builder(n)
    wires = list(b.inputs)
    for _ in range(data.draw(st.integers(1, 6))):
        op = data.draw(st.sampled_from(["AND", "OR", "NOT"]))
        if op == "NOT":
            wires.append(b.NOT(data.draw(st.sampled_from(wires))))
        else:
            wires.append(b.gate(op, data.draw(st.lists(st.sampled_from(wires), min_size=1, max_size=3))))
    assert fooling_gap_exact(b.build(wires[-1]), uniform_family(n)) == 0


def _forms_oracle(n, k, m, mod):
    forms = []
    for i in range(n):
        w = 0
        for j in range(k):
            beta = 1
            for _ in range(j):
                beta = gf2m_mul(beta, i, m, mod)
            for t in range(m):
                if gf2m_mul(1 << t, beta, m, mod) & 1:
                    w |= 1 << (j * m + t)
        forms.append(w)
    return forms


def test_or8_sweep_matches_oracle():
    n = 8
    m = field_bits(n)
    rows = fooling_sweep(or_n(n), range(1, n + 1))
    assert all(r.exact for r in rows)
    for r in rows:
        if r.k == n:
            want = Fraction(0)
        elif r.k * m <= 12:
            strings = poly_eval_strings(n, r.k, m, IRREDUCIBLE[m])
            zeros = sum(1 for s in strings if s == 0)
            want = abs(Fraction(255, 256) - (1 - Fraction(zeros, len(strings))))
        else:
            # outputs are linear in the seed: Pr[all zero] = 2^-rank
            rank = gf2_rank(_forms_oracle(n, r.k, m, IRREDUCIBLE[m]))
            want = abs(Fraction(1, 256) - Fraction(1, 2**rank))
        assert r.gap == want, r.k
        assert r.gap >= 0


def test_sweep_csv():
    rows = fooling_sweep(parity_n(4), [3, 4], family=lambda n, k: even_parity_family(n) if k < n else uniform_family(n))
    assert sweep_csv(rows) == "k,gap_num,gap_den,exact\n3,1,2,1\n4,0,1,1\n"


def test_mc_gap_close_to_exact():
    fam = poly_eval_family(6, 2)
    exact = fooling_gap_exact(or_n(6), fam)
    est = fooling_gap_mc(or_n(6), fam, 20000, seed=1)
    assert abs(float(est.gap) - float(exact)) <= 4 * est.sigma + 1e-9


def test_accept_prob_arity_checked():
    with pytest.raises(ValueError):
        fooling_gap_exact(or_n(3), uniform_family(4))


# -- designs --------------------------------------------------------------------------


def test_design_example():
    d = greedy_design(9, 3, 1, 12)
    assert len(d.sets) >= 9 and d.verify()[0]
    assert design_bound_applies(d) and design_bound_check(d)


def test_design_zero_ell_skipped():
    d = greedy_design(6, 3, 0, 5)
    assert len(d.sets) == 2 and d.verify()[0]
    assert not design_bound_applies(d) and design_bound_check(d)


def test_design_infeasible_reported():
    with pytest.raises(ValueError):
        greedy_design(3, 4, 1, 2)
    with pytest.raises(ValueError):
        greedy_design(5, 2, 3, 2)


def test_design_verify_catches_overlap():
    d = Design(5, 3, 1, ((0, 1, 2), (0, 1, 3)))
    assert d.verify() == (False, ((0, 1, 2), (0, 1, 3)))
    assert not Design(5, 3, 1, ((0, 1, 7),)).verify()[0]


def test_checker_fires_on_bad_design():
    # synthetic family violating the bound: m too small for its size
    d = Design(4, 4, 1, tuple([(0, 1, 2, 3)] * 8))
    assert design_bound_applies(d) and not design_bound_check(d)


GRID = [(m, r, ell, s) for m, r, ell, s in itertools.product((6, 8, 10, 12, 14), (2, 3, 4, 5, 6), (1, 2), (6, 20))
        if r <= m and ell < r][:50]


@pytest.mark.parametrize("m,r,ell,s", GRID)
def test_greedy_outputs_satisfy_bound(m, r, ell, s):
    d = greedy_design(m, r, ell, s, restarts=4)
    assert d.verify()[0] and len(d.sets) <= s
    assert design_bound_check(d)


def test_design_deterministic():
    assert greedy_design(10, 4, 1, 20, seed=3) == greedy_design(10, 4, 1, 20, seed=3)

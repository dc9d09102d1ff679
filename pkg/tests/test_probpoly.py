import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acpoly import seeding
from acpoly.circuits import Builder, and_n, or_n
from acpoly.poly import CapExceeded, Polynomial, multilinear_extension
from acpoly.probpoly import (ProbPoly, amplification_length, amplify_general, amplify_onesided_or,
                             build_pseudo_majority, circuit_to_probpoly, copies_for, deterministic,
                             error_exact, majority_threshold, onesided_normalize, or_base,
                             or_base_sets, or_scales, sigma, verify_pseudo_majority)

from oracles import point

X = [Polynomial.var(i) for i in range(3)]


# -- pseudo-majority ------------------------------------------------------------


def test_pseudo_majority_examples():
    pm = build_pseudo_majority(1)
    assert pm.poly == X[0] and pm.r == 1
    pm = build_pseudo_majority(3)
    assert pm.poly == Polynomial({(0, 1): 1, (0, 2): 1, (1, 2): 1, (0, 1, 2): -2}) and pm.r == 2
    assert pm.poly.restrict({0: 0, 2: 0}).is_formally_constant(0)


def test_threshold_is_strict_half():
    for ell in range(1, 30):
        r = majority_threshold(ell)
        assert 2 * r > ell and 2 * (r - 1) <= ell


def test_verify_examples():
    assert verify_pseudo_majority(build_pseudo_majority(3).poly, 3) == (True, None)
    ok, (S, b) = verify_pseudo_majority(X[0] + X[1] + X[2], 3)
    assert not ok and b == 0
    # fixing two inputs to 1 also leaves a non-constant
    r = (X[0] + X[1] + X[2]).restrict({0: 1, 1: 1})
    assert not r.is_formally_constant(1)
    assert verify_pseudo_majority(X[0], 1)[0]


def test_verify_reports_b1_violation():
    # AND3 with two inputs fixed to 1 leaves the third variable
    q = X[0] * X[1] * X[2]
    ok, (S, b) = verify_pseudo_majority(q, 3)
    assert not ok and (S, b) == ((0, 1), 1)


@pytest.mark.parametrize("ell", range(1, 12))
def test_pseudo_majority_exhaustive(ell):
    pm = build_pseudo_majority(ell)
    assert pm.verified and pm.poly.degree <= ell
    for method in ("symbolic", "dense"):
        assert verify_pseudo_majority(pm.poly, ell, method=method)[0]


@pytest.mark.parametrize("ell", range(1, 15))
def test_pseudo_majority_weight(ell):
    assert build_pseudo_majority(ell).poly.weight() <= 4**ell


@pytest.mark.parametrize("ell", range(1, 8))
def test_pseudo_majority_real_inputs(ell):
    pm = build_pseudo_majority(ell)
    rng = random.Random(ell)
    for _ in range(1000 // 7 + 1):
        S = rng.sample(range(ell), pm.r)
        b = rng.randint(0, 1)
        a = [Fraction(rng.randint(-50, 50), 10) for _ in range(ell)]
        for i in S:
            a[i] = b
        assert pm.poly.evaluate(a) == b


def test_pseudo_majority_caps():
    with pytest.raises(CapExceeded):
        build_pseudo_majority(21)
    with pytest.raises(CapExceeded):
        verify_pseudo_majority(X[0], 17)
    with pytest.raises(ValueError):
        build_pseudo_majority(0)


# -- OR base ----------------------------------------------------------------------


def test_or_base_certificate():
    pp = or_base(8)
    assert pp.one_sided_zero and pp.eps_claim == Fraction(3, 4)
    assert pp.degree_bound == math.ceil(math.log2(8)) + 1
    assert or_base(1).sample(5) == X[0].with_universe([0])


@settings(max_examples=30)
@given(st.integers(1, 10), st.integers(0, 2**32))
def test_or_base_one_sided_and_degree(n, seed):
    p = or_base(n).sample(seed)
    assert p.evaluate([0] * n) == 0
    assert p.formal_degree <= or_scales(n)
    assert p.linf_norm_exact() <= or_base(n).linf_bound


def _base_value(sets, a):
    # 1 - prod_j (1 - |S_j cap A|) at a Boolean point
    prod = 1
    for s in sets:
        prod *= 1 - sum(a[i] for i in s)
    return 1 - prod


def test_set_oracle_matches_polynomial():
    for seed in range(30):
        p = or_base(5).sample(seed)
        sets = or_base_sets(5, seed)
        for j in range(32):
            assert p.evaluate(point(j, 5)) == _base_value(sets, point(j, 5))


def test_or_base_success_rate_weight_one():
    n, trials = 8, 10**5
    hits = [0] * n
    for seed in range(trials):
        sets = or_base_sets(n, seed)
        for i in range(n):
            hits[i] += any(i in s for s in sets)
    assert min(hits) / trials >= 0.25


@pytest.mark.parametrize("w", [1, 2, 3, 5, 8])
def test_or_base_success_rate_by_weight(w):
    n, trials = 8, 4000
    a = [1] * w + [0] * (n - w)
    ok = sum(_base_value(or_base_sets(n, s), a) == 1 for s in range(trials))
    assert ok / trials >= 0.25 - 3 * sigma(0.25, trials)


def test_amplify_examples():
    base = or_base(4)
    assert amplify_onesided_or(base, 1).sample(9) == base.sample(seeding.derive(9, "copy", 0))
    for t in (1, 3):
        pp = amplify_onesided_or(base, t)
        assert pp.degree_bound == t * base.degree_bound
        assert pp.linf_bound == (1 + base.linf_bound) ** t
        for seed in range(10):
            assert pp.sample(seed).evaluate([0] * 4) == 0


def test_amplify_rejects_two_sided():
    pp = deterministic(Polynomial.const(1, range(2)), 2)
    with pytest.raises(ValueError):
        amplify_onesided_or(pp, 2)


def _amplified_value(n, t, seed, a):
    prod = 1
    for k in range(t):
        prod *= 1 - _base_value(or_base_sets(n, seeding.derive(seed, "copy", k)), a)
    return 1 - prod


def _amplified_correct(n, t, seed, a):
    # the product vanishes iff some factor does
    return any(_base_value(or_base_sets(n, seeding.derive(seed, "copy", k)), a) == 1 for k in range(t))


def test_amplified_oracle_matches_polynomial():
    pp = amplify_onesided_or(or_base(4), 3)
    for seed in range(5):
        p = pp.sample(seed)
        for j in range(16):
            assert p.evaluate(point(j, 4)) == _amplified_value(4, 3, seed, point(j, 4))


def test_amplified_error_t10():
    n, t, trials = 8, 10, 10**5
    bound = Fraction(3, 4) ** t
    margin = 3 * sigma(float(bound), trials)
    errs = [0] * n
    for s in range(trials):
        missing = set(range(n))
        for k in range(t):
            sets = or_base_sets(n, seeding.derive(s, "copy", k))
            missing -= {i for i in missing if any(i in S for S in sets)}
            if not missing:
                break
        for i in missing:
            errs[i] += 1
    assert max(errs) / trials <= bound + margin
    # the heavy input is where the coarser scales matter
    a = [1] * n
    err = sum(not _amplified_correct(n, t, s, a) for s in range(2000))
    assert err / 2000 <= bound + 3 * sigma(float(bound), 2000)


def test_error_decreases_with_t():
    n, trials = 6, 1500
    a = [1] * n
    rates = []
    for t in (1, 2, 3, 4):
        rates.append(sum(_amplified_value(n, t, s, a) != 1 for s in range(trials)) / trials)
    for x, y in zip(rates, rates[1:]):
        assert y <= x + 3 * sigma(x, trials)


def test_normalize():
    p = Polynomial({(): 1, (0,): -1}, universe=[0, 1])
    pp = onesided_normalize(deterministic(p, 2))
    assert pp.sample(0).is_zero() and pp.one_sided_zero


def test_copies_for():
    assert copies_for(Fraction(1, 8)) == 8
    assert Fraction(3, 4) ** 7 > Fraction(1, 8) >= Fraction(3, 4) ** 8
    assert copies_for(1) == 1


# -- general amplification --------------------------------------------------------


def test_amplification_length():
    assert amplification_length(Fraction(1, 6), Fraction(1, 64), Fraction(3, 50)) == 9
    with pytest.raises(ValueError):
        amplification_length(0, Fraction(1, 2))


def test_amplify_general_bookkeeping():
    base = amplify_onesided_or(or_base(6), 4)
    pp = amplify_general(base, Fraction(1, 6), Fraction(1, 64), A=Fraction(3, 50))
    assert pp.meta["ell"] == 9 and pp.meta["r"] == 5
    assert pp.degree_bound == 9 * base.degree_bound
    assert pp.one_sided_zero
    for seed in range(3):
        p = pp.sample(seed)
        assert p.formal_degree <= pp.degree_bound
        assert p.linf_norm_exact() <= pp.linf_bound
        assert p.evaluate([0] * 6) == 0


def test_amplify_general_degree_arithmetic():
    base = ProbPoly(lambda s: Polynomial.var(0), 1, Fraction(1, 10), 4, Fraction(1))
    pp = amplify_general(base, Fraction(2, 5), Fraction(1, 100), A=Fraction(3, 10))
    assert pp.meta["ell"] == 9 and pp.degree_bound == 36


def test_amplify_general_all_correct_inner():
    # every inner draw exact: the composite is exact
    ext = multilinear_extension(or_n(3).truth_table())
    pp = amplify_general(deterministic(ext, 3), Fraction(1, 4), Fraction(1, 8), A=Fraction(1, 8))
    assert pp.sample(0) == ext


def test_amplify_general_preconditions():
    base = or_base(4)
    with pytest.raises(ValueError):
        amplify_general(base, Fraction(1, 10), Fraction(1, 8))
    ok = amplify_onesided_or(base, 4)
    with pytest.raises(CapExceeded) as e:
        amplify_general(ok, Fraction(1, 10), Fraction(1, 64))
    assert e.value.required > 20


def test_amplify_general_error_small():
    base = amplify_onesided_or(or_base(6), 4)
    pp = amplify_general(base, Fraction(1, 6), Fraction(1, 64), A=Fraction(3, 50))
    table = error_exact(pp, or_n(6).truth_table(), range(150))
    assert table.counts[0] == 0
    assert float(table.max_rate()) <= 1 / 64 + 3 * sigma(1 / 64, 150)


# -- circuits ---------------------------------------------------------------------


def test_compile_not():
    b = Builder(1)
    c = b.build(b.NOT(b.inputs[0]))
    pp = circuit_to_probpoly(c, Fraction(1, 8))
    assert pp.sample(3) == Polynomial({(): 1, (0,): -1}) and pp.eps_claim == 0


def test_compile_single_or_gate():
    pp = circuit_to_probpoly(or_n(4), Fraction(1, 8))
    gate = amplify_onesided_or(or_base(4), copies_for(Fraction(1, 8)))
    gid = or_n(4).out
    assert pp.sample(7) == gate.sample(seeding.derive(7, "gate", gid))


def test_compile_and_of_ors():
    b = Builder(4)
    x = b.inputs
    c = b.build(b.AND([b.OR([x[0], x[1]]), b.OR([x[2], x[3]])]))
    pp = circuit_to_probpoly(c, Fraction(1, 16))
    trials = 300
    table = error_exact(pp, c.truth_table(), range(trials))
    assert float(table.max_rate()) <= 1 / 16 + 3 * sigma(1 / 16, trials)
    for seed in range(5):
        p = pp.sample(seed)
        assert p.formal_degree <= pp.degree_bound
        assert p.linf_norm_exact() <= pp.linf_bound


def test_compile_amplify_route():
    pp = circuit_to_probpoly(and_n(2), Fraction(1, 4), route="amplify", A=Fraction(1, 20))
    assert pp.eps_claim == Fraction(1, 4) and "ell" in pp.meta


def test_copies_are_seeded_and_distinct():
    pp = or_base(8)
    a = pp.copies(1, 4)
    assert a == pp.copies(1, 4)
    assert len({p.to_json() for p in a}) > 1


# -- error tables -----------------------------------------------------------------


def test_error_exact_examples():
    f = or_n(3).truth_table()
    det = deterministic(multilinear_extension(f), 3)
    assert list(error_exact(det, f, range(5)).counts) == [0] * 8
    t = error_exact(or_base(4), or_n(4).truth_table(), range(1000))
    assert t.counts[0] == 0 and t.seeds_used == 1000
    assert float(t.max_rate()) <= 0.75 + 3 * sigma(0.75, 1000)


def test_error_exact_cap():
    with pytest.raises(CapExceeded):
        error_exact(or_base(5), or_n(5).truth_table(), range(1), cap=4)


def test_certificate_shape():
    cert = amplify_onesided_or(or_base(3), 2).certificate()
    assert set(cert) == {"construction", "n", "degree_bound", "linf_bound", "eps_claim", "one_sided_zero"}
    assert cert["eps_claim"] == "9/16"

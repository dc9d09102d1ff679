"""k-wise independent families, exact fooling gaps, and combinatorial designs.

A family maps each seed of an enumerable seed space to a string in
``{0,1}^n`` (an int, bit ``i`` = coordinate ``i``).  All probabilities are
exact counts over the whole seed space.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import seeding
from .circuits import Circuit, accept_prob_uniform
from .poly import ENUM_CAP, CapExceeded

SEED_CAP = int(os.environ.get("ACPOLY_SEED_CAP", 1 << 24))
DESIGN_ENUM_CAP = int(os.environ.get("ACPOLY_DESIGN_CAP", 2_000_000))

# x^m + (low terms), all irreducible over GF(2)
IRREDUCIBLE = {
    1: 0b11, 2: 0b111, 3: 0b1011, 4: 0b10011, 5: 0b100101, 6: 0b1000011,
    7: 0b10000011, 8: 0b100011011, 9: 0b1000010001, 10: 0b10000001001,
    11: 0b100000000101, 12: 0b1000001010011,
}


def gf_mul(a: int, b: int, m: int) -> int:
    """Product in GF(2^m) by shift-and-add with reduction."""
    mod = IRREDUCIBLE[m]
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= mod
    return out


def gf_pow(a: int, e: int, m: int) -> int:
    out = 1
    for _ in range(e):
        out = gf_mul(out, a, m)
    return out


def _parity64(x: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(x) & 1).astype(np.uint64)


@dataclass(frozen=True)
class KWiseFamily:
    """Seeds ``0..seed_count-1`` mapped to strings of ``n`` bits."""

    n: int
    k: int
    seed_count: int
    outputs_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    name: str = ""
    forms: tuple = field(default=(), repr=False)

    def outputs(self, seeds: np.ndarray | None = None) -> np.ndarray:
        if seeds is None:
            if self.seed_count > SEED_CAP:
                raise CapExceeded("family seed space", self.seed_count, SEED_CAP)
            seeds = np.arange(self.seed_count, dtype=np.uint64)
        return self.outputs_fn(np.asarray(seeds, dtype=np.uint64))

    def __call__(self, seed: int) -> int:
        return int(self.outputs(np.array([seed], dtype=np.uint64))[0])

    def histogram(self) -> np.ndarray:
        """Number of seeds producing each of the ``2^n`` strings."""
        if self.n > ENUM_CAP:
            raise CapExceeded("family output histogram", self.n, ENUM_CAP)
        return np.bincount(self.outputs().astype(np.int64), minlength=1 << self.n).astype(np.int64)

    def table(self) -> list[tuple[int, str]]:
        """(seed, string) rows; the string lists coordinate 0 first."""
        outs = self.outputs()
        return [(s, "".join(str((int(x) >> i) & 1) for i in range(self.n))) for s, x in enumerate(outs)]


def uniform_family(n: int) -> KWiseFamily:
    return KWiseFamily(n, n, 1 << n, lambda s: s.copy(), name=f"uniform({n})")


def even_parity_family(n: int) -> KWiseFamily:
    """Uniform over even-weight strings: the last bit is the parity of the rest."""
    if n < 1:
        raise ValueError("n must be positive")

    def fn(s):
        return s | (_parity64(s) << np.uint64(n - 1))

    return KWiseFamily(n, n - 1, 1 << (n - 1), fn, name=f"even_parity({n})")


def field_bits(n: int) -> int:
    return max(1, (n - 1).bit_length())


def poly_eval_family(n: int, k: int) -> KWiseFamily:
    """Low bit of ``f(alpha_i)`` for a random ``f`` of degree ``< k`` over GF(2^m).

    ``alpha_i = i`` as a field element, ``2^m >= n``.  The seed packs the ``k``
    coefficients, coefficient ``j`` in bits ``j*m .. j*m+m-1``.  Each output
    bit is a GF(2)-linear form in the seed; the forms are precomputed.
    """
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    m = field_bits(n)
    if m not in IRREDUCIBLE:
        raise CapExceeded("field degree", m, max(IRREDUCIBLE))
    forms = []
    for i in range(n):
        w = 0
        for j in range(k):
            beta = gf_pow(i, j, m)
            for t in range(m):
                if gf_mul(1 << t, beta, m) & 1:
                    w |= 1 << (j * m + t)
        forms.append(w)
    forms_arr = [np.uint64(w) for w in forms]

    def fn(s):
        out = np.zeros(s.shape, dtype=np.uint64)
        for i, w in enumerate(forms_arr):
            out |= _parity64(s & w) << np.uint64(i)
        return out

    return KWiseFamily(n, k, 1 << (k * m), fn, name=f"poly_eval(n={n},k={k},m={m})", forms=tuple(forms))


def build_kwise(n: int, k: int) -> KWiseFamily:
    if not 1 <= n:
        raise ValueError("n must be positive")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    if k == n:
        fam = uniform_family(n)
    else:
        fam = poly_eval_family(n, k)
    if fam.seed_count > SEED_CAP:
        raise CapExceeded(f"seed space of {fam.name}", fam.seed_count, SEED_CAP)
    return fam


def _marginal_checks(n: int, k: int) -> int:
    return sum(math.comb(n, j) << j for j in range(k + 1))


def verify_kwise(fam: KWiseFamily, k: int | None = None):
    """Exact check of every marginal on at most ``k`` coordinates.

    Returns ``(True, None)`` or ``(False, (T, b))`` with ``b`` the pattern
    (coordinate ``T[i]`` takes bit ``i`` of ``b``) whose count is off.
    """
    k = fam.k if k is None else k
    checks = _marginal_checks(fam.n, k)
    if checks > SEED_CAP:
        raise CapExceeded("marginal checks", checks, SEED_CAP)
    hist = fam.histogram()
    strings = np.arange(1 << fam.n, dtype=np.int64)
    total = int(hist.sum())
    for size in range(1, k + 1):
        want, rem = divmod(total, 1 << size)
        for T in itertools.combinations(range(fam.n), size):
            idx = np.zeros_like(strings)
            for pos, v in enumerate(T):
                idx |= ((strings >> v) & 1) << pos
            counts = np.zeros(1 << size, dtype=np.int64)
            np.add.at(counts, idx, hist)
            bad = np.flatnonzero(counts != want) if rem == 0 else np.arange(1 << size)
            if bad.size:
                return False, (T, int(bad[0]))
    return True, None


# ---------------------------------------------------------------------------
# fooling
# ---------------------------------------------------------------------------


def accept_prob_family(c: Circuit, fam: KWiseFamily) -> Fraction:
    if c.n != fam.n:
        raise ValueError(f"circuit has {c.n} inputs, family has {fam.n} bits")
    hist = fam.histogram()
    support = np.flatnonzero(hist)
    pts = ((support[:, None] >> np.arange(fam.n)) & 1).astype(bool)
    acc = c.eval_batch(pts)
    return Fraction(int(hist[support][acc].sum()), fam.seed_count)


def fooling_gap_exact(c: Circuit, fam: KWiseFamily) -> Fraction:
    """``|Pr_uniform[C=1] - Pr_family[C=1]|`` as an exact rational."""
    return abs(accept_prob_uniform(c) - accept_prob_family(c, fam))


@dataclass(frozen=True)
class GapEstimate:
    k: int
    gap: Fraction
    exact: bool
    sigma: float = 0.0


def fooling_gap_mc(c: Circuit, fam: KWiseFamily, trials: int, seed: int) -> GapEstimate:
    """Exact uniform side, Monte Carlo over family seeds."""
    rng = seeding.np_rng(seed, "fool-mc", fam.name)
    seeds = rng.integers(0, fam.seed_count, size=trials, dtype=np.uint64)
    outs = fam.outputs(seeds).astype(np.int64)
    pts = ((outs[:, None] >> np.arange(fam.n)) & 1).astype(bool)
    hits = int(c.eval_batch(pts).sum())
    est = Fraction(hits, trials)
    p = float(est)
    return GapEstimate(fam.k, abs(accept_prob_uniform(c) - est), False,
                       math.sqrt(max(p * (1 - p), 0.0) / trials))


def fooling_sweep(c: Circuit, k_values, family: Callable[[int, int], KWiseFamily] | None = None,
                  mc_trials: int = 100_000, seed: int = 0) -> list[GapEstimate]:
    """Gap per ``k``; exact whenever the seed space is enumerable."""
    family = family or _family_uncapped
    rows = []
    for k in k_values:
        fam = family(c.n, k)
        if fam.seed_count <= SEED_CAP:
            rows.append(GapEstimate(k, fooling_gap_exact(c, fam), True))
        else:
            rows.append(fooling_gap_mc(c, fam, mc_trials, seeding.derive(seed, "k", k)))
    return rows


def _family_uncapped(n: int, k: int) -> KWiseFamily:
    return uniform_family(n) if k >= n else poly_eval_family(n, k)


def sweep_csv(rows: list[GapEstimate]) -> str:
    lines = ["k,gap_num,gap_den,exact"]
    for r in rows:
        lines.append(f"{r.k},{r.gap.numerator},{r.gap.denominator},{int(r.exact)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# designs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Design:
    m: int
    r: int
    ell: int
    sets: tuple[tuple[int, ...], ...]

    def verify(self):
        """Sizes, ranges and pairwise intersections; ``(ok, offending pair)``."""
        for s in self.sets:
            if len(s) != self.r or len(set(s)) != self.r or not all(0 <= v < self.m for v in s):
                return False, (s,)
        fs = [frozenset(s) for s in self.sets]
        for i, j in itertools.combinations(range(len(fs)), 2):
            if len(fs[i] & fs[j]) > self.ell:
                return False, (self.sets[i], self.sets[j])
        return True, None

    def to_dict(self) -> dict:
        return {"m": self.m, "r": self.r, "ell": self.ell, "sets": [list(s) for s in self.sets]}


def _greedy_pass(order, r: int, ell: int, s_target: int) -> list[tuple[int, ...]]:
    chosen: list[tuple[int, ...]] = []
    masks: list[int] = []
    for combo in order:
        if len(chosen) >= s_target:
            break
        mk = sum(1 << v for v in combo)
        if all((mk & o).bit_count() <= ell for o in masks):
            chosen.append(combo)
            masks.append(mk)
    return chosen


def greedy_design(m: int, r: int, ell: int, s_target: int, restarts: int = 32, seed: int = 0) -> Design:
    """Greedy packing of ``r``-subsets of ``range(m)``.

    A candidate is kept when it meets every kept set in at most ``ell``
    points.  The first pass scans in lex order; ``restarts`` further passes
    scan seeded shuffles, and the largest packing (earliest on ties) wins.
    Stops early once ``s_target`` sets are found.
    """
    if not (m >= r >= 1 and r >= ell >= 0):
        raise ValueError(f"infeasible design parameters m={m}, r={r}, ell={ell}: need m >= r >= ell >= 0, r >= 1")
    if s_target < 0:
        raise ValueError("s_target must be non-negative")
    total = math.comb(m, r)
    if total * (1 + restarts) > DESIGN_ENUM_CAP:
        raise CapExceeded("r-subsets to scan", total * (1 + restarts), DESIGN_ENUM_CAP)
    combos = list(itertools.combinations(range(m), r))
    best = _greedy_pass(combos, r, ell, s_target)
    rng = seeding.py_rng(seed, "design", m, r, ell)
    for _ in range(restarts):
        if len(best) >= s_target:
            break
        order = combos[:]
        rng.shuffle(order)
        cand = _greedy_pass(order, r, ell, s_target)
        if len(cand) > len(best):
            best = cand
    return Design(m, r, ell, tuple(best))


def design_bound_applies(d: Design) -> bool:
    return d.ell >= 1 and len(d.sets) * d.ell >= d.r


def design_bound_check(d: Design) -> bool:
    """``m >= min(r^2 / (2 ell), s)`` for designs with at least ``r/ell`` sets.

    Designs with ``ell = 0`` or fewer than ``r/ell`` sets are outside the
    statement and pass vacuously.
    """
    if not design_bound_applies(d):
        return True
    return d.m >= min(Fraction(d.r * d.r, 2 * d.ell), len(d.sets))

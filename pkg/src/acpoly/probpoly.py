"""Probabilistic polynomials as seeded samplers.

A :class:`ProbPoly` is a pure function ``seed -> Polynomial`` together with
the certified metadata of the distribution it samples: error bound, degree
bound and an L-infinity bound over the Boolean cube.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from . import seeding
from .circuits import Circuit, TruthTable, majority_n
from .poly import (ENUM_CAP, CapExceeded, Polynomial, compose, fmt_fraction,
                   multilinear_extension, product)

PSEUDO_MAJ_CAP = 20
PSEUDO_MAJ_VERIFY_MAX = 14

# constant in ell = (A / delta^2) * ln(1/eps)
DEFAULT_A = Fraction(8)


@dataclass(frozen=True)
class ProbPoly:
    sampler: Callable[[int], Polynomial] = field(repr=False)
    n: int
    eps_claim: Fraction
    degree_bound: int
    linf_bound: Fraction | None  # None: no bound claimed
    one_sided_zero: bool = False
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def sample(self, seed: int) -> Polynomial:
        return self.sampler(seed)

    def copies(self, seed: int, count: int) -> list[Polynomial]:
        """``count`` independent draws derived from ``seed``."""
        return [self.sampler(seeding.derive(seed, "copy", i)) for i in range(count)]

    def certificate(self) -> dict:
        return {
            "construction": self.name,
            "n": self.n,
            "degree_bound": self.degree_bound,
            "linf_bound": None if self.linf_bound is None else fmt_fraction(self.linf_bound),
            "eps_claim": fmt_fraction(self.eps_claim),
            "one_sided_zero": self.one_sided_zero,
        }


def deterministic(p: Polynomial, n: int, name: str = "deterministic") -> ProbPoly:
    """Point-mass distribution on a single polynomial."""
    p = p.with_universe(set(range(n)) | p.universe)
    return ProbPoly(lambda seed: p, n, Fraction(0), p.formal_degree, p.linf_norm_exact(),
                    one_sided_zero=p.evaluate([0] * (max(p.universe, default=-1) + 1)) == 0,
                    name=name)


# ---------------------------------------------------------------------------
# pseudo-majority
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PseudoMajority:
    poly: Polynomial
    ell: int
    r: int
    verified: bool  # False means verification was deferred (ell too large)


def majority_threshold(ell: int) -> int:
    """Least integer strictly greater than ``ell / 2``."""
    return ell // 2 + 1


def verify_pseudo_majority(q: Polynomial, ell: int, method: str = "auto"):
    """Check that fixing any ``r`` inputs to ``b`` leaves formally ``b``.

    Returns ``(True, None)`` or ``(False, (S, b))`` for the first violating
    restriction in lexicographic order of ``S`` (with ``b = 0`` first).
    ``method="symbolic"`` runs :meth:`Polynomial.restrict` on each of the
    ``2*C(ell, r)`` restrictions; ``"dense"`` does the same bookkeeping on an
    integer coefficient array and is only available for integral ``q``.
    """
    if ell > 16:
        raise CapExceeded("pseudo-majority verification", ell, 16)
    if q.universe_mask >> ell:
        return False, (None, None)
    r = majority_threshold(ell)
    if method == "auto":
        method = "dense" if _dense_ok(q) and ell > 8 else "symbolic"
    if method == "dense":
        return _verify_dense(q, ell, r)
    universe = set(q.universe)
    for S in itertools.combinations(range(ell), r):
        for b in (0, 1):
            sigma = {i: b for i in S if i in universe}
            if not q.restrict(sigma).is_formally_constant(b):
                return False, (S, b)
    return True, None


def _dense_ok(q: Polynomial) -> bool:
    return all(isinstance(c, int) for c in q._terms.values()) and sum(abs(c) for c in q._terms.values()) < 2**62


def _verify_dense(q: Polynomial, ell: int, r: int):
    masks = np.array(list(q._terms), dtype=np.int64)
    coefs = np.array(list(q._terms.values()), dtype=np.int64)
    full = (1 << ell) - 1
    for S in itertools.combinations(range(ell), r):
        s = sum(1 << i for i in S)
        # b = 0: a term survives iff it avoids S
        alive = (masks & s) == 0
        if np.any(alive & (masks != 0)):
            return False, (S, 0)
        if int(coefs[masks == 0].sum()) != 0:
            return False, (S, 0)
        # b = 1: terms collapse onto their part outside S
        rest = masks & (full ^ s)
        acc = np.zeros(1 << ell, dtype=np.int64)
        np.add.at(acc, rest, coefs)
        if acc[0] != 1 or np.any(acc[1:]):
            return False, (S, 1)
    return True, None


@lru_cache(maxsize=None)
def build_pseudo_majority(ell: int) -> PseudoMajority:
    """Multilinear extension of strict majority on ``ell`` inputs."""
    if ell < 1:
        raise ValueError("ell must be at least 1")
    if ell > PSEUDO_MAJ_CAP:
        raise CapExceeded("pseudo-majority size", ell, PSEUDO_MAJ_CAP)
    poly = multilinear_extension(majority_n(ell))
    verified = False
    if ell <= PSEUDO_MAJ_VERIFY_MAX:
        ok, bad = verify_pseudo_majority(poly, ell)
        if not ok:
            raise AssertionError(f"majority extension on {ell} inputs fails at {bad}")
        verified = True
    return PseudoMajority(poly, ell, majority_threshold(ell), verified)


# ---------------------------------------------------------------------------
# OR constructions
# ---------------------------------------------------------------------------


def or_scales(n: int) -> int:
    """Number of sampling scales, ``ceil(log2 n) + 1``."""
    return (n - 1).bit_length() + 1


def or_base_sets(n: int, seed: int) -> list[tuple[int, ...]]:
    """The random sets ``S_0..S_J``; ``S_j`` keeps each variable w.p. ``2^-j``."""
    rng = seeding.py_rng(seed, "or-base", n)
    return [tuple(i for i in range(n) if seeding.bernoulli_pow2(rng, j))
            for j in range(or_scales(n))]


def or_poly_from_sets(n: int, sets: Sequence[Sequence[int]]) -> Polynomial:
    """``1 - prod_j (1 - sum_{x in S_j} x)``."""
    one = Polynomial.const(1, range(n))
    factors = [one - Polynomial({(i,): 1 for i in s}, universe=range(n), formal_degree=1) for s in sets]
    return one - product(factors)


def or_base(n: int) -> ProbPoly:
    """One-sided OR sampler with success probability at least 1/4 on 1-inputs.

    On an input of weight ``w`` the scale ``j`` with ``2^j <= 2w < 2^(j+1)``
    makes its linear form exactly 1 with probability at least 1/4, which
    zeroes the product.  At the all-zeros input every linear form is 0.
    """
    if n < 1:
        raise ValueError("n must be positive")
    scales = or_scales(n)

    def sampler(seed: int) -> Polynomial:
        return or_poly_from_sets(n, or_base_sets(n, seed))

    linf = 1 + max(1, n - 1) ** scales
    return ProbPoly(sampler, n, Fraction(3, 4), scales, Fraction(linf), one_sided_zero=True,
                    name=f"or_base({n})")


def amplify_onesided_or(pp: ProbPoly, t: int) -> ProbPoly:
    """``1 - prod_{k<t} (1 - P_k)`` over independent one-sided draws."""
    if not pp.one_sided_zero:
        raise ValueError("amplify_onesided_or needs a one-sided sampler")
    if t < 1:
        raise ValueError("t must be positive")

    def sampler(seed: int) -> Polynomial:
        one = Polynomial.const(1, range(pp.n))
        return one - product(one - p for p in pp.copies(seed, t))

    linf = None if pp.linf_bound is None else (1 + pp.linf_bound) ** t
    return ProbPoly(sampler, pp.n, pp.eps_claim**t, pp.degree_bound * t, linf, one_sided_zero=True,
                    name=f"onesided({pp.name},t={t})", meta={"t": t})


def onesided_normalize(pp: ProbPoly) -> ProbPoly:
    """Replace every draw that is nonzero at the all-zeros input by 0.

    For an OR sampler with error ``e`` this gives a one-sided sampler with
    error at most ``2e``.
    """
    def sampler(seed: int) -> Polynomial:
        p = pp.sample(seed)
        if p.evaluate([0] * pp.n) != 0:
            return Polynomial.zero(range(pp.n))
        return p

    return ProbPoly(sampler, pp.n, min(Fraction(1), 2 * pp.eps_claim), pp.degree_bound,
                    pp.linf_bound, one_sided_zero=True, name=f"normalized({pp.name})")


def copies_for(eps: Fraction, base_eps: Fraction = Fraction(3, 4)) -> int:
    """Least ``t`` with ``base_eps ** t <= eps``."""
    eps = Fraction(eps)
    if eps >= 1:
        return 1
    t = 1
    while base_eps**t > eps:
        t += 1
    return t


# ---------------------------------------------------------------------------
# general error reduction
# ---------------------------------------------------------------------------


def amplification_length(delta, eps, A=DEFAULT_A) -> int:
    """``ceil((A / delta^2) * ln(1/eps))``, at least 1."""
    delta, eps, A = Fraction(delta), Fraction(eps), Fraction(A)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if delta <= 0:
        raise ValueError("delta must be positive")
    return max(1, math.ceil(float(A / delta**2) * math.log(1 / eps)))


def amplify_general(pp: ProbPoly, delta, eps, A=DEFAULT_A) -> ProbPoly:
    """Pseudo-majority of ``ell`` independent draws of ``pp``.

    ``ell = ceil((A/delta^2) ln(1/eps))``.  On input ``a`` the composite
    equals ``f(a)`` whenever at least ``r`` of the inner draws are correct
    there, whatever real values the others take.
    """
    delta, eps = Fraction(delta), Fraction(eps)
    if pp.eps_claim > Fraction(1, 2) - delta:
        raise ValueError(f"inner error {pp.eps_claim} exceeds 1/2 - delta = {Fraction(1, 2) - delta}")
    ell = amplification_length(delta, eps, A)
    if ell > PSEUDO_MAJ_CAP:
        raise CapExceeded("pseudo-majority size for amplification", ell, PSEUDO_MAJ_CAP)
    pm = build_pseudo_majority(ell)
    Q = pm.poly

    def sampler(seed: int) -> Polynomial:
        return compose(Q, pp.copies(seed, ell))

    linf = None
    if pp.linf_bound is not None:
        linf = Q.weight() * max(Fraction(1), pp.linf_bound) ** ell
    one_sided = pp.one_sided_zero and Q.coefficient(()) == 0
    return ProbPoly(sampler, pp.n, eps, ell * pp.degree_bound, linf, one_sided_zero=one_sided,
                    name=f"amplified({pp.name},ell={ell})",
                    meta={"ell": ell, "A": str(Fraction(A)), "delta": str(delta), "r": pm.r})


# ---------------------------------------------------------------------------
# circuits
# ---------------------------------------------------------------------------


def _gate_sampler(fanin: int, eps: Fraction) -> ProbPoly:
    if fanin == 1:
        return deterministic(Polynomial.var(0), 1, "wire")
    return amplify_onesided_or(or_base(fanin), copies_for(eps))


def circuit_to_probpoly(c: Circuit, eps, route: str = "union", A=DEFAULT_A) -> ProbPoly:
    """Probabilistic polynomial for a circuit by gate replacement.

    ``route="union"``: each OR gate gets an (eps/s)-error one-sided OR
    polynomial (AND via De Morgan), so the union bound over the ``s`` gates
    gives error ``eps``.  ``route="amplify"``: compile at error 1/10 that way,
    then apply :func:`amplify_general` with ``delta = 2/5``.
    """
    eps = Fraction(eps)
    if route == "amplify":
        base = circuit_to_probpoly(c, Fraction(1, 10), "union")
        return amplify_general(base, Fraction(2, 5), eps, A)
    if route != "union":
        raise ValueError(f"unknown route {route!r}")
    s = max(1, c.size())
    per_gate = eps / s
    live = c._reachable()
    gate_pp = {}
    for gid in live:
        g = c.gates[gid]
        if g.op in ("AND", "OR") and len(g.args) > 0:
            gate_pp[gid] = _gate_sampler(len(g.args), per_gate)

    # a priori bounds, gate by gate
    deg: dict[int, int] = {}
    lin: dict[int, Fraction] = {}
    for gid in live:
        g = c.gates[gid]
        if g.op == "IN":
            deg[gid], lin[gid] = 1, Fraction(1)
        elif g.op == "NOT":
            deg[gid], lin[gid] = deg[g.args[0]], 1 + lin[g.args[0]]
        elif not g.args:
            deg[gid], lin[gid] = 0, Fraction(1)
        else:
            gp = gate_pp[gid]
            cd = max(deg[a] for a in g.args)
            cl = max(lin[a] for a in g.args)
            if g.op == "AND":
                cl = 1 + cl
            w = _weight_bound(gp)
            v = w * max(Fraction(1), cl) ** gp.degree_bound
            deg[gid] = gp.degree_bound * cd
            lin[gid] = v if g.op == "OR" else 1 + v

    n = c.n

    def sampler(seed: int) -> Polynomial:
        val: dict[int, Polynomial] = {}
        for gid in live:
            g = c.gates[gid]
            if g.op == "IN":
                val[gid] = Polynomial.var(g.args[0], range(n))
            elif g.op == "NOT":
                val[gid] = 1 - val[g.args[0]]
            elif not g.args:
                val[gid] = Polynomial.const(1 if g.op == "AND" else 0, range(n))
            else:
                q = gate_pp[gid].sample(seeding.derive(seed, "gate", gid))
                kids = [val[a] for a in g.args]
                if g.op == "OR":
                    val[gid] = compose(q, kids)
                else:
                    val[gid] = 1 - compose(q, [1 - k for k in kids])
        return val[c.out].with_universe(range(n))

    return ProbPoly(sampler, n, eps if gate_pp else Fraction(0), deg[c.out], lin[c.out],
                    one_sided_zero=False, name=f"circuit(size={c.size()},depth={c.depth()})",
                    meta={"route": "union", "per_gate_eps": str(per_gate)})


def _weight_bound(gp: ProbPoly) -> Fraction:
    """A priori bound on the coefficient weight of any draw of a gate sampler."""
    if gp.name == "wire":
        return Fraction(1)
    t = gp.meta["t"]
    k = gp.n
    w_base = 1 + (1 + k) ** or_scales(k)
    return Fraction(1 + (1 + w_base) ** t)


# ---------------------------------------------------------------------------
# error measurement
# ---------------------------------------------------------------------------


@dataclass
class ErrorTable:
    """Per-input disagreement counts over an explicit list of seeds."""

    counts: np.ndarray
    seeds_used: int

    def rate(self, j: int) -> Fraction:
        return Fraction(int(self.counts[j]), self.seeds_used)

    def rates(self) -> list[Fraction]:
        return [self.rate(j) for j in range(len(self.counts))]

    def max_rate(self) -> Fraction:
        return Fraction(int(self.counts.max()), self.seeds_used) if len(self.counts) else Fraction(0)

    def rows(self):
        for j, c in enumerate(self.counts):
            yield j, Fraction(int(c), self.seeds_used), self.seeds_used


def error_exact(pp: ProbPoly, f: TruthTable, seeds: Iterable[int], cap: int | None = None) -> ErrorTable:
    """Fraction of the listed seeds whose draw disagrees with ``f``, per input."""
    cap = ENUM_CAP if cap is None else cap
    if pp.n > cap:
        raise CapExceeded("error table", pp.n, cap)
    if f.n != pp.n:
        raise ValueError("truth table arity differs from the sampler's")
    want = np.asarray(f.bits, dtype=object)
    counts = np.zeros(1 << pp.n, dtype=np.int64)
    used = 0
    for seed in seeds:
        vals = pp.sample(seed).with_universe(range(pp.n)).cube_values()
        counts += (vals != want).astype(np.int64)
        used += 1
    return ErrorTable(counts, used)


def sigma(p: float, trials: int) -> float:
    """Binomial standard deviation of an empirical frequency."""
    return math.sqrt(max(p * (1 - p), 0.0) / trials)

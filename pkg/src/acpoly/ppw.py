"""Probabilistic polynomials with witness circuits.

A draw is a pair ``(P, E)``.  Soundness is per draw: on every input ``a``
with ``E(a) = 0`` the polynomial is exact, ``P(a) = C(a)``.  The error of
the pair is the probability that the witness fires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import seeding
from .circuits import Builder, Circuit, approx_majority, cube_points, or_n, substitute
from .poly import ENUM_CAP, CapExceeded, Polynomial, compose, fmt_fraction, product
from .probpoly import (PSEUDO_MAJ_CAP, build_pseudo_majority, circuit_to_probpoly, copies_for,
                       or_base_sets, or_poly_from_sets, or_scales)

DEFAULT_A = Fraction(6)
BASE_EPS = Fraction(1, 8)
C1_ALPHA, C1_BETA = Fraction(1, 4), Fraction(2, 5)


@dataclass(frozen=True)
class PPWSample:
    poly: Polynomial
    witness: Circuit
    seed: int | None = None
    inner: tuple = field(default=(), repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "poly": self.poly.to_dict(), "witness": self.witness.to_dict()}


@dataclass(frozen=True)
class PPW:
    sampler: Callable[[int], PPWSample] = field(repr=False)
    n: int
    eps_claim: Fraction
    degree_bound: int
    linf_bound: Fraction | None
    witness_size_bound: int
    witness_depth_bound: int
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)
    witness_sampler: Callable[[int], Circuit] | None = field(default=None, repr=False, compare=False)

    def sample(self, seed: int) -> PPWSample:
        return self.sampler(seed)

    def sample_witness(self, seed: int) -> Circuit:
        """The witness of ``sample(seed)`` without building the polynomial."""
        if self.witness_sampler is not None:
            return self.witness_sampler(seed)
        return self.sampler(seed).witness

    def copies(self, seed: int, count: int) -> list[PPWSample]:
        return [self.sampler(seeding.derive(seed, "copy", i)) for i in range(count)]

    def certificate(self) -> dict:
        return {
            "construction": self.name,
            "n": self.n,
            "eps_claim": fmt_fraction(self.eps_claim),
            "degree_bound": self.degree_bound,
            "linf_bound": None if self.linf_bound is None else fmt_fraction(self.linf_bound),
            "witness_size_bound": self.witness_size_bound,
            "witness_depth_bound": self.witness_depth_bound,
        }


# ---------------------------------------------------------------------------
# base construction for OR
# ---------------------------------------------------------------------------


def isolation_witness(n: int, sets) -> Circuit:
    """Fires unless ``a = 0`` or some set contains exactly one 1 of ``a``."""
    b = Builder(n)
    x = b.inputs
    ok = [b.AND(b.NOT(v) for v in x)]
    for s in sets:
        for i in s:
            ok.append(b.AND([x[i]] + [b.NOT(x[j]) for j in s if j != i]))
    return b.build(b.NOT(b.OR(ok)))


def _or_draw(n: int, t: int, seed: int):
    sets = []
    polys = []
    for k in range(t):
        s = or_base_sets(n, seeding.derive(seed, "copy", k))
        sets.extend(s)
        polys.append(or_poly_from_sets(n, s))
    one = Polynomial.const(1, range(n))
    return one - product(one - p for p in polys), sets


def ppw_base_or(n: int, eps=BASE_EPS) -> PPW:
    """OR with an isolation-failure witness.

    The polynomial is ``t`` one-sided repeats of the scale-sampling OR
    polynomial, with ``t`` the least integer such that ``(3/4)^t <= eps``.
    The witness is 0 exactly when some sampled linear form equals 1 (then
    ``P(a) = 1 = OR(a)``) or when ``a`` is all zeros (then ``P(a) = 0``).
    """
    if n < 1:
        raise ValueError("n must be positive")
    eps = Fraction(eps)
    t = copies_for(eps)
    scales = or_scales(n)

    def sampler(seed: int) -> PPWSample:
        poly, sets = _or_draw(n, t, seed)
        return PPWSample(poly, isolation_witness(n, sets), seed)

    def witness(seed: int) -> Circuit:
        return _or_witness_for_draw(n, t, seed)

    linf = (2 + max(1, n - 1) ** scales) ** t
    size_bound = 2 + t * scales * n
    return PPW(sampler, n, eps, scales * t, Fraction(linf), size_bound, 2,
               name=f"ppw_or({n},t={t})", meta={"t": t}, witness_sampler=witness)


# ---------------------------------------------------------------------------
# base construction for circuits
# ---------------------------------------------------------------------------


def _or_witness_for_draw(k: int, t: int, seed: int) -> Circuit:
    sets = []
    for i in range(t):
        sets.extend(or_base_sets(k, seeding.derive(seed, "copy", i)))
    return isolation_witness(k, sets)


def ppw_for_circuit(c: Circuit, eps=BASE_EPS) -> PPW:
    """Gate-by-gate PPW for an AND/OR/NOT circuit.

    The polynomial is exactly the draw of :func:`circuit_to_probpoly` at the
    same seed.  Each gate of fan-in ``k >= 2`` carries the isolation witness
    of its own OR draw (AND through De Morgan on negated inputs), driven by
    the true gate inputs.  The composite witness is their OR; when none
    fires, every gate polynomial is exact on its Boolean inputs.
    """
    eps = Fraction(eps)
    pp = circuit_to_probpoly(c, eps, "union")
    per_gate = Fraction(pp.meta["per_gate_eps"])
    t = copies_for(per_gate)
    live = c._reachable()
    noisy = [gid for gid in live if c.gates[gid].op in ("AND", "OR") and len(c.gates[gid].args) >= 2]
    n = c.n

    def witness(seed: int) -> Circuit:
        b = Builder(n)
        wire: dict[int, int] = {}
        fires = []
        for gid in live:
            g = c.gates[gid]
            if g.op == "IN":
                wire[gid] = b.inputs[g.args[0]]
            elif g.op == "NOT":
                wire[gid] = b.NOT(wire[g.args[0]])
            else:
                kids = [wire[a] for a in g.args]
                wire[gid] = b.gate(g.op, kids)
                if gid in noisy:
                    w = _or_witness_for_draw(len(kids), t, seeding.derive(seed, "gate", gid))
                    if g.op == "AND":
                        kids = [b.NOT(x) for x in kids]
                    fires.append(b.embed(w, kids))
        return b.build(b.OR(fires))

    def sampler(seed: int) -> PPWSample:
        return PPWSample(pp.sample(seed), witness(seed), seed)

    size_bound = c.size() + 1 + sum(2 + t * or_scales(len(c.gates[g].args)) * len(c.gates[g].args)
                                    for g in noisy)
    return PPW(sampler, n, pp.eps_claim, pp.degree_bound, pp.linf_bound, size_bound,
               c.depth() + 3, name=f"ppw_{pp.name}", meta={"per_gate_eps": str(per_gate), "t": t},
               witness_sampler=witness)


# ---------------------------------------------------------------------------
# amplification
# ---------------------------------------------------------------------------


def ppw_length(eps, A=DEFAULT_A) -> int:
    """``ceil(A * ln(1/eps))``, at least 1."""
    eps, A = Fraction(eps), Fraction(A)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return max(1, math.ceil(float(A) * math.log(1 / eps)))


def ppw_amplify(base: PPW, eps, A=DEFAULT_A, c1_seed: int = 0) -> PPW:
    """``P = Q(P_1..P_ell)``, ``E = C1(E_1..E_ell)`` over independent draws.

    ``Q`` is the majority pseudo-majority and ``C1`` a verified
    (ell, 1/4, 2/5)-approximate majority.  If ``E(a) = 0`` then fewer than
    ``2*ell/5`` inner witnesses fire, so more than ``3*ell/5 >= r`` inner
    polynomials equal ``C(a)`` and ``Q`` collapses to ``C(a)``.
    """
    eps = Fraction(eps)
    if base.eps_claim > BASE_EPS:
        raise ValueError(f"base error {base.eps_claim} exceeds 1/8")
    ell = ppw_length(eps, A)
    if ell > PSEUDO_MAJ_CAP:
        raise CapExceeded("pseudo-majority size for PPW amplification", ell, PSEUDO_MAJ_CAP)
    pm = build_pseudo_majority(ell)
    c1 = approx_majority(ell, C1_ALPHA, C1_BETA, seed=c1_seed)

    def sampler(seed: int) -> PPWSample:
        parts = base.copies(seed, ell)
        poly = compose(pm.poly, [s.poly for s in parts])
        witness = substitute(c1, [s.witness for s in parts])
        return PPWSample(poly, witness, seed, tuple(parts))

    def witness_only(seed: int) -> Circuit:
        return substitute(c1, [base.sample_witness(seeding.derive(seed, "copy", i)) for i in range(ell)])

    linf = None
    if base.linf_bound is not None:
        linf = pm.poly.weight() * max(Fraction(1), base.linf_bound) ** ell
    return PPW(sampler, base.n, eps, ell * base.degree_bound, linf,
               c1.size() + ell * base.witness_size_bound,
               c1.depth() + base.witness_depth_bound,
               name=f"ppw_amplified({base.name},ell={ell})",
               meta={"ell": ell, "r": pm.r, "A": str(Fraction(A)),
                     "c1_size": c1.size(), "c1_depth": c1.depth()},
               witness_sampler=witness_only)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


def verify_witness_soundness(s: PPWSample, c: Circuit, cap: int | None = None):
    """Exhaustively check ``E(a) = 0 => P(a) = C(a)``.

    Returns ``(True, None)`` or ``(False, a)`` for the first failing input.
    """
    cap = ENUM_CAP if cap is None else cap
    if c.n > cap:
        raise CapExceeded("witness soundness check", c.n, cap)
    if s.witness.n != c.n:
        raise ValueError("witness arity differs from the circuit's")
    pts = cube_points(c.n)
    fires = s.witness.eval_batch(pts)
    want = c.eval_batch(pts).astype(np.int64).astype(object)
    if not s.poly.universe <= frozenset(range(c.n)):
        raise ValueError("polynomial uses variables outside the circuit inputs")
    got = s.poly.with_universe(range(c.n)).cube_values()
    bad = np.flatnonzero(~fires & (got != want))
    if bad.size:
        return False, tuple(int(v) for v in pts[bad[0]])
    return True, None


def witness_fire_counts(ppw: PPW, seeds) -> tuple[np.ndarray, int]:
    """Per-input number of listed seeds whose witness fires."""
    pts = cube_points(ppw.n)
    counts = np.zeros(1 << ppw.n, dtype=np.int64)
    used = 0
    for seed in seeds:
        counts += ppw.sample_witness(seed).eval_batch(pts)
        used += 1
    return counts, used


def ppw_or(n: int, eps, A=DEFAULT_A) -> tuple[PPW, Circuit]:
    """Amplified PPW for ``OR_n`` together with the target circuit."""
    return ppw_amplify(ppw_base_or(n), eps, A), or_n(n)

"""Unbounded fan-in AND/OR/NOT circuits.

Conventions used for the size/depth bookkeeping:

* ``size`` counts the AND and OR gates reachable from the output.
* ``depth`` is the largest number of AND/OR gates on an input-to-output
  path.  NOT gates are free.
* An AND with no arguments is the constant 1, an OR with none is 0.

Inputs are indexed ``0..n-1``.  Truth tables use the standard binary order:
entry ``j`` is the value at the point whose input ``i`` is bit ``i`` of ``j``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .poly import ENUM_CAP, CapExceeded
from .seeding import py_rng

OPS = ("IN", "NOT", "AND", "OR")


class ApproxMajorityError(RuntimeError):
    pass


@dataclass(frozen=True)
class Gate:
    op: str
    args: tuple[int, ...]


class Circuit:
    """A topologically ordered gate list with a designated output."""

    def __init__(self, n: int, gates: Sequence[Gate | tuple], out: int, meta: dict | None = None):
        self.n = n
        self.gates = tuple(g if isinstance(g, Gate) else Gate(g[0], tuple(g[1])) for g in gates)
        self.out = out
        self.meta = dict(meta or {})
        self._check()

    def _check(self):
        if not 0 <= self.out < len(self.gates):
            raise ValueError(f"output gate {self.out} does not exist")
        for gid, g in enumerate(self.gates):
            if g.op not in OPS:
                raise ValueError(f"gate {gid}: unknown op {g.op!r}")
            if g.op == "IN":
                if len(g.args) != 1 or not 0 <= g.args[0] < self.n:
                    raise ValueError(f"gate {gid}: bad input index {g.args}")
                continue
            if g.op == "NOT" and len(g.args) != 1:
                raise ValueError(f"gate {gid}: NOT takes one argument")
            for a in g.args:
                if not 0 <= a < gid:
                    raise ValueError(f"gate {gid}: wire to {a} is not an earlier gate")

    def _reachable(self) -> list[int]:
        seen = {self.out}
        stack = [self.out]
        while stack:
            g = self.gates[stack.pop()]
            if g.op == "IN":
                continue
            for a in g.args:
                if a not in seen:
                    seen.add(a)
                    stack.append(a)
        return sorted(seen)

    def size(self) -> int:
        return sum(1 for gid in self._reachable() if self.gates[gid].op in ("AND", "OR"))

    def depth(self) -> int:
        d: dict[int, int] = {}
        for gid in self._reachable():
            g = self.gates[gid]
            if g.op == "IN":
                d[gid] = 0
            elif g.op == "NOT":
                d[gid] = d[g.args[0]]
            else:
                d[gid] = 1 + max((d[a] for a in g.args), default=0)
        return d[self.out]

    def eval(self, a: Sequence[int]) -> int:
        if len(a) != self.n:
            raise ValueError(f"expected {self.n} inputs, got {len(a)}")
        val: dict[int, int] = {}
        for gid in self._reachable():
            g = self.gates[gid]
            if g.op == "IN":
                val[gid] = 1 if a[g.args[0]] else 0
            elif g.op == "NOT":
                val[gid] = 1 - val[g.args[0]]
            elif g.op == "AND":
                val[gid] = int(all(val[x] for x in g.args))
            else:
                val[gid] = int(any(val[x] for x in g.args))
        return val[self.out]

    __call__ = eval

    def eval_batch(self, points: np.ndarray) -> np.ndarray:
        """Evaluate on every row of an ``(N, n)`` 0/1 array (bit-parallel)."""
        pts = np.asarray(points, dtype=bool)
        if pts.ndim != 2 or pts.shape[1] != self.n:
            raise ValueError(f"points must have shape (N, {self.n})")
        val: dict[int, np.ndarray] = {}
        count = pts.shape[0]
        for gid in self._reachable():
            g = self.gates[gid]
            if g.op == "IN":
                val[gid] = pts[:, g.args[0]]
            elif g.op == "NOT":
                val[gid] = ~val[g.args[0]]
            elif g.op == "AND":
                acc = np.ones(count, dtype=bool)
                for x in g.args:
                    acc &= val[x]
                val[gid] = acc
            else:
                acc = np.zeros(count, dtype=bool)
                for x in g.args:
                    acc |= val[x]
                val[gid] = acc
        return val[self.out]

    def truth_table(self, cap: int | None = None) -> "TruthTable":
        cap = ENUM_CAP if cap is None else cap
        if self.n > cap:
            raise CapExceeded("circuit truth table", self.n, cap)
        return TruthTable(self.n, self.eval_batch(cube_points(self.n)).astype(np.uint8))

    def to_dict(self) -> dict:
        return {"n": self.n,
                "gates": [{"op": g.op, "args": list(g.args)} for g in self.gates],
                "out": self.out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "Circuit":
        return cls(d["n"], [Gate(g["op"], tuple(g["args"])) for g in d["gates"]], d["out"])

    @classmethod
    def from_json(cls, s: str) -> "Circuit":
        return cls.from_dict(json.loads(s))

    def __repr__(self):
        return f"Circuit(n={self.n}, size={self.size()}, depth={self.depth()})"


class Builder:
    """Incremental circuit construction with structural hashing."""

    def __init__(self, n: int):
        self.n = n
        self.gates: list[Gate] = []
        self._index: dict[Gate, int] = {}
        self.inputs = [self.gate("IN", (i,)) for i in range(n)]

    def gate(self, op: str, args: Iterable[int]) -> int:
        args = tuple(args)
        if op in ("AND", "OR"):
            args = tuple(sorted(set(args)))
        g = Gate(op, args)
        if g in self._index:
            return self._index[g]
        self.gates.append(g)
        self._index[g] = len(self.gates) - 1
        return len(self.gates) - 1

    def NOT(self, a: int) -> int:
        g = self.gates[a]
        if g.op == "NOT":
            return g.args[0]
        return self.gate("NOT", (a,))

    def AND(self, args: Iterable[int]) -> int:
        return self.gate("AND", args)

    def OR(self, args: Iterable[int]) -> int:
        return self.gate("OR", args)

    def XOR(self, a: int, b: int) -> int:
        return self.OR([self.AND([a, self.NOT(b)]), self.AND([self.NOT(a), b])])

    def embed(self, c: Circuit, wires: Sequence[int]) -> int:
        """Copy ``c`` into this builder with its inputs driven by ``wires``."""
        if len(wires) != c.n:
            raise ValueError(f"circuit needs {c.n} input wires, got {len(wires)}")
        remap: dict[int, int] = {}
        for gid in c._reachable():
            g = c.gates[gid]
            if g.op == "IN":
                remap[gid] = wires[g.args[0]]
            elif g.op == "NOT":
                remap[gid] = self.NOT(remap[g.args[0]])
            else:
                remap[gid] = self.gate(g.op, (remap[a] for a in g.args))
        return remap[c.out]

    def build(self, out: int, meta: dict | None = None) -> Circuit:
        return Circuit(self.n, self.gates, out, meta)


def substitute(outer: Circuit, inner: Sequence[Circuit]) -> Circuit:
    """The circuit ``x -> outer(inner[0](x), ..., inner[k-1](x))``."""
    if len(inner) != outer.n:
        raise ValueError(f"outer circuit has {outer.n} inputs, got {len(inner)} inner circuits")
    ns = {c.n for c in inner}
    if len(ns) > 1:
        raise ValueError("inner circuits must share an input arity")
    n = ns.pop() if ns else 0
    b = Builder(n)
    wires = [b.embed(c, b.inputs) for c in inner]
    return b.build(b.embed(outer, wires))


@dataclass(frozen=True)
class TruthTable:
    n: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8).reshape(-1)
        if bits.size != 1 << self.n:
            raise ValueError(f"truth table on {self.n} inputs needs {1 << self.n} entries, got {bits.size}")
        if np.any(bits > 1):
            raise ValueError("truth table entries must be 0 or 1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_function(cls, n: int, f: Callable[[tuple[int, ...]], int]) -> "TruthTable":
        return cls(n, [int(f(point_of(j, n))) for j in range(1 << n)])

    def __getitem__(self, j: int) -> int:
        return int(self.bits[j])

    def __len__(self):
        return len(self.bits)

    def __iter__(self):
        return (int(b) for b in self.bits)

    def __eq__(self, other):
        return isinstance(other, TruthTable) and self.n == other.n and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.n, self.bits.tobytes()))


def point_of(j: int, n: int) -> tuple[int, ...]:
    return tuple((j >> i) & 1 for i in range(n))


def cube_points(n: int) -> np.ndarray:
    """All ``2**n`` Boolean points as rows, in standard binary order."""
    idx = np.arange(1 << n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(bool)


def hamming_weights(n: int) -> np.ndarray:
    return cube_points(n).sum(axis=1)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def or_n(n: int) -> Circuit:
    b = Builder(n)
    return b.build(b.OR(b.inputs))


def and_n(n: int) -> Circuit:
    b = Builder(n)
    return b.build(b.AND(b.inputs))


def negate(c: Circuit) -> Circuit:
    b = Builder(c.n)
    return b.build(b.NOT(b.embed(c, b.inputs)))


def parity_n(n: int) -> Circuit:
    """Balanced tree of fan-in-2 XORs, each expanded to OR(AND, AND)."""
    if n < 1:
        raise ValueError("parity needs at least one input")
    b = Builder(n)
    layer = list(b.inputs)
    while len(layer) > 1:
        nxt = [b.XOR(layer[i], layer[i + 1]) for i in range(0, len(layer) - 1, 2)]
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    return b.build(layer[0])


def majority_n(n: int) -> TruthTable:
    """Strict majority: 1 iff the Hamming weight exceeds ``n/2``."""
    return TruthTable(n, (2 * hamming_weights(n) > n).astype(np.uint8))


def accept_prob_uniform(c: Circuit, cap: int | None = None) -> Fraction:
    tt = c.truth_table(cap)
    return Fraction(int(tt.bits.sum()), 1 << c.n)


# ---------------------------------------------------------------------------
# approximate majority
# ---------------------------------------------------------------------------

EXHAUSTIVE_MAX = 20


def approx_majority_size_bound(ell: int) -> int:
    """Size budget treated as the ``poly(ell)`` bound at desk scale."""
    return ell**4 + ell + 2


def approx_thresholds(ell: int, alpha, beta) -> tuple[int, int]:
    """(largest weight forced to 0, smallest weight forced to 1)."""
    alpha, beta = Fraction(alpha), Fraction(beta)
    return math.floor(alpha * ell), math.ceil(beta * ell)


def verify_approx_majority(c: Circuit, ell: int, alpha, beta) -> tuple[bool, tuple[int, ...] | None]:
    """Check the (ell, alpha, beta) guarantee on every constrained input.

    Returns ``(ok, counterexample)``.  Up to 16 inputs the whole cube is
    swept.  Beyond that, a NOT-free (monotone) circuit is checked on the two
    boundary weights, which by monotonicity covers every constrained input.
    """
    lo, hi = approx_thresholds(ell, alpha, beta)
    if c.n != ell:
        raise ValueError(f"circuit has {c.n} inputs, expected {ell}")
    if ell <= 16:
        pts = cube_points(ell)
        w = pts.sum(axis=1)
        vals = c.eval_batch(pts)
        bad = np.flatnonzero(((w <= lo) & vals) | ((w >= hi) & ~vals))
        if bad.size:
            return False, tuple(int(x) for x in pts[bad[0]])
        return True, None
    if ell > EXHAUSTIVE_MAX:
        raise CapExceeded("approximate-majority verification", ell, EXHAUSTIVE_MAX)
    if any(g.op == "NOT" for g in c.gates):
        raise CapExceeded("exhaustive verification of a non-monotone circuit", ell, 16)
    for weight, want in ((lo, False), (hi, True)):
        if not 0 <= weight <= ell:
            continue
        rows = [[1 if i in s else 0 for i in range(ell)] for s in itertools.combinations(range(ell), weight)]
        pts = np.array(rows, dtype=bool).reshape(-1, ell)
        vals = c.eval_batch(pts)
        bad = np.flatnonzero(vals != want)
        if bad.size:
            return False, tuple(int(x) for x in pts[bad[0]])
    return True, None


def _random_dnf(ell: int, width: int, cover: int, seed: int, attempt: int) -> Circuit:
    # number of random width-sets so that each cover-set is hit with
    # probability about 1 - e^-2 / C(ell, cover)
    p_hit = Fraction(math.comb(cover, width), math.comb(ell, width))
    m = math.ceil((math.log(math.comb(ell, cover)) + 2) / float(p_hit))
    rng = py_rng(seed, "approx-majority", ell, attempt)
    sets = set()
    for _ in range(m):
        sets.add(tuple(sorted(rng.sample(range(ell), width))))
    b = Builder(ell)
    ands = [b.AND(b.inputs[i] for i in s) for s in sorted(sets)]
    return b.build(b.OR(ands))


def _threshold_dnf(ell: int, k: int) -> Circuit:
    b = Builder(ell)
    return b.build(b.OR(b.AND(b.inputs[i] for i in s) for s in itertools.combinations(range(ell), k)))


def approx_majority(ell: int, alpha=Fraction(1, 4), beta=Fraction(2, 5), seed: int = 0,
                    retries: int = 20) -> Circuit:
    """A verified (ell, alpha, beta)-approximate majority.

    Random monotone DNF: each term is an AND of ``floor(alpha*ell)+1`` random
    distinct inputs (so no input of weight at most ``alpha*ell`` can satisfy
    it), with enough terms that every set of ``ceil(beta*ell)`` inputs
    contains one.  Every draw is verified; failures are resampled.  This is
    the DNF-of-CNFs shape with single-literal clauses, depth 2.

    Above ``EXHAUSTIVE_MAX`` inputs the exact threshold DNF is returned and
    ``meta["verified"]`` is False.
    """
    alpha, beta = Fraction(alpha), Fraction(beta)
    if not (0 <= alpha < beta <= 1):
        raise ValueError("need 0 <= alpha < beta <= 1")
    if ell < 1:
        raise ValueError("ell must be positive")
    lo, hi = approx_thresholds(ell, alpha, beta)
    width = lo + 1
    if ell > EXHAUSTIVE_MAX:
        c = _threshold_dnf(ell, hi)
        c.meta.update(construction="threshold-dnf", verified=False, alpha=str(alpha), beta=str(beta))
        return c
    for attempt in range(retries):
        c = _random_dnf(ell, width, hi, seed, attempt)
        ok, _ = verify_approx_majority(c, ell, alpha, beta)
        if ok:
            c.meta.update(construction="random-dnf", verified=True, attempts=attempt + 1,
                          and_width=width, alpha=str(alpha), beta=str(beta))
            return c
    raise ApproxMajorityError(f"no verified ({ell},{alpha},{beta})-approximate majority after {retries} draws")

"""Exact multilinear polynomials over the rationals.

Monomials are sets of variable indices, stored internally as integer
bitmasks (bit ``i`` <-> variable ``x_i``), so the product of two monomials is
their bitwise OR.  This is the multilinear reduction ``x*x -> x``, which is
value-preserving on the Boolean cube.  The *formal* degree of a polynomial is
tracked separately and follows the composed-degree accounting (products add
formal degrees, substitution multiplies them).

Coefficients are exact rationals.  Integral coefficients are held as ``int``
internally; every public accessor hands out :class:`fractions.Fraction`.

Term order is graded-lexicographic: first by degree, then by the sorted
tuple of variable indices.  Anything that scans terms greedily relies on it.
"""

from __future__ import annotations

import json
import math
import os
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

ENUM_CAP = int(os.environ.get("ACPOLY_ENUM_CAP", "24"))

# Universes up to this size may use the cube (evaluate/interpolate) route
# for products and composition.  Both routes give identical terms.
CUBE_ROUTE_MAX = 14


class CapExceeded(ValueError):
    """An exhaustive enumeration would exceed a configured cap."""

    def __init__(self, what: str, required: int, cap: int):
        self.what = what
        self.required = required
        self.cap = cap
        super().__init__(f"{what}: requires {required}, cap is {cap}")


class MissingAssignment(KeyError):
    def __init__(self, var: int):
        self.var = var
        super().__init__(f"variable x{var} is not assigned")


class ArityMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# scalars and bitmask helpers
# ---------------------------------------------------------------------------


def scalar(x) -> int | Fraction:
    """Normalize ``x`` to an exact rational (``int`` when integral).

    Accepts ints, Fractions and ``"num/den"`` strings.  Floats are refused.
    """
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else x
    if isinstance(x, str):
        return scalar(Fraction(x))
    if isinstance(x, np.integer):
        return int(x)
    raise TypeError(f"not an exact rational: {x!r}")


def _norm(c):
    return c if c.__class__ is int else scalar(c)


def to_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def fmt_fraction(x) -> str:
    f = to_fraction(x)
    return f"{f.numerator}/{f.denominator}"


def mask_of(vars: Iterable[int]) -> int:
    m = 0
    for v in vars:
        if v < 0:
            raise ValueError(f"variable indices must be non-negative, got {v}")
        m |= 1 << v
    return m


def vars_of(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def glex_key(mask: int):
    return (mask.bit_count(), vars_of(mask))


def _compress(mask: int, positions: Sequence[int]) -> int:
    """Map a mask over universe variables to a mask over compact positions."""
    out = 0
    for j, v in enumerate(positions):
        if mask >> v & 1:
            out |= 1 << j
    return out


def _expand(cmask: int, positions: Sequence[int]) -> int:
    out = 0
    j = 0
    while cmask:
        if cmask & 1:
            out |= 1 << positions[j]
        cmask >>= 1
        j += 1
    return out


def zeta_transform(values: Sequence, k: int) -> np.ndarray:
    """Subset sums: ``out[T] = sum(values[S] for S subset of T)``."""
    a = np.array(values, dtype=object).reshape(-1)
    if a.size != 1 << k:
        raise ValueError(f"expected {1 << k} values, got {a.size}")
    for i in range(k):
        a = a.reshape(-1, 2, 1 << i)
        a[:, 1, :] += a[:, 0, :]
    return a.reshape(-1)


def mobius_transform(values: Sequence, k: int) -> np.ndarray:
    """Inverse of :func:`zeta_transform` (signed subset sums)."""
    a = np.array(values, dtype=object).reshape(-1)
    if a.size != 1 << k:
        raise ValueError(f"expected {1 << k} values, got {a.size}")
    for i in range(k):
        a = a.reshape(-1, 2, 1 << i)
        a[:, 1, :] -= a[:, 0, :]
    return a.reshape(-1)


# ---------------------------------------------------------------------------
# Polynomial
# ---------------------------------------------------------------------------


class Polynomial:
    """Sparse multilinear polynomial with exact rational coefficients.

    Instances are immutable.  ``universe`` is the variable set the polynomial
    lives over (it may contain variables that appear in no term).
    """

    __slots__ = ("_umask", "_terms", "formal_degree", "_universe")

    def __init__(self, terms: Mapping | None = None, universe: Iterable[int] = (),
                 formal_degree: int | None = None):
        umask = mask_of(universe)
        acc: dict[int, int | Fraction] = {}
        for mono, c in (terms or {}).items():
            m = mono if isinstance(mono, int) else mask_of(mono)
            umask |= m
            acc[m] = acc.get(m, 0) + scalar(c)
        clean = {m: scalar(c) for m, c in acc.items() if c != 0}
        deg = max((m.bit_count() for m in clean), default=0)
        if formal_degree is None:
            formal_degree = deg
        elif formal_degree < deg:
            raise ValueError(f"formal_degree {formal_degree} below stored degree {deg}")
        self._init(umask, clean, formal_degree)

    def _init(self, umask, terms, formal_degree):
        self._umask = umask
        self._terms = terms
        self.formal_degree = formal_degree
        self._universe = None

    @classmethod
    def _raw(cls, umask: int, terms: dict, formal_degree: int) -> "Polynomial":
        # trusted constructor: terms already nonzero, normalized, inside umask
        p = cls.__new__(cls)
        p._init(umask, terms, formal_degree)
        return p

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, universe: Iterable[int] = ()) -> "Polynomial":
        return cls._raw(mask_of(universe), {}, 0)

    @classmethod
    def const(cls, c, universe: Iterable[int] = ()) -> "Polynomial":
        c = scalar(c)
        return cls._raw(mask_of(universe), {0: c} if c != 0 else {}, 0)

    @classmethod
    def var(cls, i: int, universe: Iterable[int] = ()) -> "Polynomial":
        return cls._raw(mask_of(universe) | (1 << i), {1 << i: 1}, 1)

    # -- basic accessors ----------------------------------------------------

    @property
    def universe(self) -> frozenset[int]:
        if self._universe is None:
            self._universe = frozenset(vars_of(self._umask))
        return self._universe

    @property
    def universe_mask(self) -> int:
        return self._umask

    def masks(self) -> list[int]:
        """Monomial bitmasks in graded-lex order."""
        return sorted(self._terms, key=glex_key)

    def items(self) -> Iterator[tuple[tuple[int, ...], Fraction]]:
        for m in self.masks():
            yield vars_of(m), to_fraction(self._terms[m])

    @property
    def terms(self) -> dict[tuple[int, ...], Fraction]:
        return dict(self.items())

    def coefficient(self, vars: Iterable[int] = ()) -> Fraction:
        return to_fraction(self._terms.get(mask_of(vars), 0))

    def __len__(self) -> int:
        return len(self._terms)

    @property
    def degree(self) -> int:
        return max((m.bit_count() for m in self._terms), default=0)

    def weight(self) -> Fraction:
        return to_fraction(sum(abs(c) for c in self._terms.values()))

    def is_zero(self) -> bool:
        return not self._terms

    def constant_value(self) -> Fraction | None:
        """The value ``b`` if the polynomial is formally the constant ``b``."""
        if not self._terms:
            return Fraction(0)
        if len(self._terms) == 1 and 0 in self._terms:
            return to_fraction(self._terms[0])
        return None

    def is_formally_constant(self, b=None) -> bool:
        v = self.constant_value()
        if v is None:
            return False
        return b is None or v == scalar(b)

    def with_universe(self, universe: Iterable[int]) -> "Polynomial":
        um = mask_of(universe)
        if any(m & ~um for m in self._terms):
            raise ValueError("new universe does not contain all term variables")
        return Polynomial._raw(um, self._terms, self.formal_degree)

    def with_formal_degree(self, d: int) -> "Polynomial":
        if d < self.degree:
            raise ValueError("formal degree below stored degree")
        return Polynomial._raw(self._umask, self._terms, d)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, a) -> Fraction:
        """Exact value at ``a`` (a mapping or a sequence indexed by variable)."""
        vals: dict[int, int | Fraction] = {}
        for v in vars_of(self._umask):
            try:
                vals[v] = scalar(a[v])
            except (KeyError, IndexError):
                raise MissingAssignment(v) from None
        total = 0
        for m, c in self._terms.items():
            t = c
            while m and t:
                low = m & -m
                t *= vals[low.bit_length() - 1]
                m ^= low
            total += t
        return to_fraction(total)

    __call__ = evaluate

    def restrict(self, sigma: Mapping[int, object]) -> "Polynomial":
        """Formal substitution of the partial assignment ``sigma``.

        The result lives over ``universe - domain(sigma)``.
        """
        dom = 0
        vals = {}
        for v, x in sigma.items():
            if not (self._umask >> v) & 1:
                raise ValueError(f"x{v} is not in the universe")
            dom |= 1 << v
            vals[v] = scalar(x)
        keep = ~dom
        out: dict[int, int | Fraction] = {}
        for m, c in self._terms.items():
            hit = m & dom
            t = c
            while hit and t:
                low = hit & -hit
                t *= vals[low.bit_length() - 1]
                hit ^= low
            if t:
                r = m & keep
                out[r] = out.get(r, 0) + t
        out = {m: scalar(c) for m, c in out.items() if c != 0}
        return Polynomial._raw(self._umask & keep, out, self.formal_degree)

    def cube_values(self, cap: int | None = None) -> np.ndarray:
        """Values on every Boolean point of the universe.

        Point ``j`` sets the ``i``-th smallest universe variable to bit ``i``
        of ``j``.
        """
        pos = vars_of(self._umask)
        k = len(pos)
        cap = ENUM_CAP if cap is None else cap
        if k > cap:
            raise CapExceeded("Boolean cube sweep", k, cap)
        dense = np.zeros(1 << k, dtype=object)
        dense[:] = 0
        for m, c in self._terms.items():
            dense[_compress(m, pos)] = c
        return zeta_transform(dense, k)

    @classmethod
    def from_cube_values(cls, universe: Iterable[int], values: Sequence,
                         formal_degree: int | None = None) -> "Polynomial":
        """The unique multilinear polynomial with the given cube values."""
        pos = sorted(set(universe))
        k = len(pos)
        coeffs = mobius_transform(values, k)
        terms = {}
        for j in np.flatnonzero(coeffs != 0):
            terms[_expand(int(j), pos)] = _norm(coeffs[j])
        deg = max((m.bit_count() for m in terms), default=0)
        fd = deg if formal_degree is None else max(formal_degree, deg)
        return cls._raw(mask_of(pos), terms, fd)

    def linf_norm_exact(self, cap: int | None = None) -> Fraction:
        vals = self.cube_values(cap)
        return to_fraction(max((abs(v) for v in vals), default=0))

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        return Polynomial.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = _norm(s)
            else:
                out.pop(m, None)
        return Polynomial._raw(self._umask | other._umask, out,
                               max(self.formal_degree, other.formal_degree))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self._umask, {m: -c for m, c in self._terms.items()},
                               self.formal_degree)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = scalar(other)
            if c == 0:
                return Polynomial._raw(self._umask, {}, self.formal_degree)
            return Polynomial._raw(self._umask, {m: scalar(v * c) for m, v in self._terms.items()},
                                   self.formal_degree)
        return multiply(self, other)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self._umask == other._umask and self._terms == other._terms
        return NotImplemented

    def __hash__(self):
        return hash((self._umask, frozenset(self._terms.items())))

    def __repr__(self):
        return f"Polynomial({self!s}, universe={sorted(self.universe)}, formal_degree={self.formal_degree})"

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for vars, c in self.items():
            mono = "*".join(f"x{v}" for v in vars)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "universe": sorted(self.universe),
            "formal_degree": self.formal_degree,
            "terms": [{"vars": list(v), "coef": fmt_fraction(c)} for v, c in self.items()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: Mapping) -> "Polynomial":
        terms = {}
        for t in d["terms"]:
            m = mask_of(t["vars"])
            if m in terms:
                raise ValueError(f"duplicate monomial {t['vars']}")
            terms[m] = Fraction(t["coef"])
        p = cls(terms, universe=d.get("universe", ()), formal_degree=d.get("formal_degree"))
        if "universe" in d and p.universe != frozenset(d["universe"]):
            raise ValueError("a term uses a variable outside the declared universe")
        return p

    @classmethod
    def from_json(cls, s: str) -> "Polynomial":
        return cls.from_dict(json.loads(s))


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def evaluate(p: Polynomial, a) -> Fraction:
    return p.evaluate(a)


def restrict(p: Polynomial, sigma: Mapping[int, object]) -> Polynomial:
    return p.restrict(sigma)


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    return p + q


def weight(p: Polynomial) -> Fraction:
    return p.weight()


def degree(p: Polynomial) -> int:
    return p.degree


def linf_norm_exact(p: Polynomial, cap: int | None = None) -> Fraction:
    return p.linf_norm_exact(cap)


def _multiply_symbolic(p: Polynomial, q: Polynomial) -> dict:
    out: dict[int, int | Fraction] = {}
    for m1, c1 in p._terms.items():
        for m2, c2 in q._terms.items():
            m = m1 | m2
            out[m] = out.get(m, 0) + c1 * c2
    return {m: _norm(c) for m, c in out.items() if c}


def multiply(p: Polynomial, q: Polynomial, route: str = "auto") -> Polynomial:
    """Exact product with multilinear reduction; formal degrees add."""
    umask = p._umask | q._umask
    fd = p.formal_degree + q.formal_degree
    k = umask.bit_count()
    if route == "auto":
        cube_cost = (1 << k) * (k + 1) * 3
        route = "cube" if k <= CUBE_ROUTE_MAX and len(p) * len(q) > cube_cost else "symbolic"
    if route == "symbolic":
        return Polynomial._raw(umask, _multiply_symbolic(p, q), fd)
    u = vars_of(umask)
    vp = p.with_universe(u).cube_values()
    vq = q.with_universe(u).cube_values()
    return Polynomial.from_cube_values(u, vp * vq, fd)


def product(polys: Iterable[Polynomial]) -> Polynomial:
    out = Polynomial.const(1)
    for p in polys:
        out = multiply(out, p)
    return out


def evaluate_many(q: Polynomial, columns: Mapping[int, np.ndarray]) -> np.ndarray:
    """Evaluate ``q`` at many points at once.

    ``columns[v]`` is an object (or integer) array holding the value of
    ``x_v`` at every point.  Products over shared monomial prefixes are
    memoized, so dense polynomials cost about one vector product per term.
    """
    size = None
    for v in vars_of(q._umask):
        if v not in columns:
            raise MissingAssignment(v)
        size = len(columns[v])
    if size is None:
        size = len(next(iter(columns.values()))) if columns else 1
    cols = {v: np.asarray(columns[v], dtype=object) for v in vars_of(q._umask)}
    memo: dict[int, np.ndarray] = {}

    def prod(m: int) -> np.ndarray:
        hit = memo.get(m)
        if hit is not None:
            return hit
        high = 1 << (m.bit_length() - 1)
        rest = m ^ high
        col = cols[high.bit_length() - 1]
        r = col if rest == 0 else prod(rest) * col
        memo[m] = r
        return r

    total = np.zeros(size, dtype=object)
    total[:] = 0
    for m in sorted(q._terms, key=glex_key):
        c = q._terms[m]
        total = total + c if m == 0 else total + prod(m) * c
    return total


def compose(q: Polynomial, inner: Sequence[Polynomial], route: str = "auto") -> Polynomial:
    """Substitute ``inner[i]`` for ``x_i`` in ``q`` and expand exactly.

    ``formal_degree = q.formal_degree * max(inner formal degrees)``.
    """
    ell = len(inner)
    if q._umask >> ell:
        raise ArityMismatch(f"outer polynomial uses x{q._umask.bit_length() - 1} but only {ell} inner polynomials given")
    inner = [p if isinstance(p, Polynomial) else Polynomial.const(p) for p in inner]
    umask = 0
    for p in inner:
        umask |= p._umask
    fd = q.formal_degree * max((p.formal_degree for p in inner), default=0)
    k = umask.bit_count()
    if route == "auto":
        route = "cube" if k <= CUBE_ROUTE_MAX else "symbolic"
    if route == "cube":
        u = vars_of(umask)
        cols = {i: inner[i].with_universe(u).cube_values() for i in vars_of(q._umask)}
        if not cols:
            vals = np.full(1 << k, q.coefficient(), dtype=object)
        else:
            vals = evaluate_many(q, cols)
        return Polynomial.from_cube_values(u, vals, fd)
    memo: dict[int, Polynomial] = {0: Polynomial.const(1)}

    def prod(m: int) -> Polynomial:
        hit = memo.get(m)
        if hit is not None:
            return hit
        high = 1 << (m.bit_length() - 1)
        r = multiply(prod(m ^ high), inner[high.bit_length() - 1])
        memo[m] = r
        return r

    acc: dict[int, int | Fraction] = {}
    for m in sorted(q._terms, key=glex_key):
        c = q._terms[m]
        for mm, cc in prod(m)._terms.items():
            acc[mm] = acc.get(mm, 0) + c * cc
    acc = {m: scalar(c) for m, c in acc.items() if c != 0}
    return Polynomial._raw(umask, acc, fd)


def multilinear_extension(table, universe: Sequence[int] | None = None) -> Polynomial:
    """Unique multilinear polynomial agreeing with a Boolean table.

    ``table[j]`` is the value at the point whose bit ``i`` is the value of
    the ``i``-th variable.  Coefficients come from the Mobius transform.
    """
    bits = list(getattr(table, "bits", table))
    size = len(bits)
    k = size.bit_length() - 1
    if size != 1 << k:
        raise ValueError(f"table length {size} is not a power of two")
    for j, b in enumerate(bits):
        if b not in (0, 1):
            raise ValueError(f"non-Boolean table entry {b!r} at index {j}")
    universe = list(range(k)) if universe is None else list(universe)
    if len(universe) != k:
        raise ValueError("universe size does not match table arity")
    return Polynomial.from_cube_values(universe, [int(b) for b in bits])


def boolean_batch_eval(p: Polynomial, points: np.ndarray, var_order: Sequence[int]) -> tuple[np.ndarray, int]:
    """Exact values at Boolean points, as (numerators, common denominator).

    ``points`` is an ``(N, len(var_order))`` 0/1 array; column ``j`` holds
    variable ``var_order[j]``.  Uses int64 when the coefficient weight allows
    it, Python ints otherwise.
    """
    col = {v: j for j, v in enumerate(var_order)}
    missing = [v for v in vars_of(p._umask) if v not in col]
    if missing:
        raise MissingAssignment(missing[0])
    den = 1
    for c in p._terms.values():
        if isinstance(c, Fraction):
            den = math.lcm(den, c.denominator)
    nums = {m: int(to_fraction(c) * den) for m, c in p._terms.items()}
    bound = sum(abs(v) for v in nums.values())
    dtype = np.int64 if bound < 2**62 else object
    pts = np.asarray(points).astype(bool)
    out = np.zeros(pts.shape[0], dtype=dtype)
    for m, c in nums.items():
        sel = np.ones(pts.shape[0], dtype=bool)
        for v in vars_of(m):
            sel &= pts[:, col[v]]
        if dtype is object:
            out[sel] = out[sel] + c
        else:
            out[sel] += c
    return out, den

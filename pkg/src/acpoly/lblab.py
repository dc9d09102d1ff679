"""Error profiles under biased product distributions, random restrictions,
and the degree-reduction process for OR.

``Err_i^X(q)`` is the probability that ``q(x) != OR_X(x)`` when each
variable of ``X`` is 1 independently with probability ``2^-i``.  Polynomials
are read as functions on ``X``; variables of ``X`` that ``q`` does not
mention are dummies.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from . import seeding
from .poly import ENUM_CAP, CapExceeded, Polynomial, boolean_batch_eval, fmt_fraction, vars_of
from .probpoly import ProbPoly

EXACT_E3_MAX = 12
TRACE_POLY_MAX_TERMS = 256


# ---------------------------------------------------------------------------
# error profiles
# ---------------------------------------------------------------------------


def _domain(q: Polynomial, X) -> list[int]:
    xs = sorted(set(X))
    if not q.universe <= set(xs):
        raise ValueError(f"polynomial mentions variables outside X: {sorted(q.universe - set(xs))}")
    return xs


def disagreement_by_weight(q: Polynomial, X, cap: int | None = None) -> list[int]:
    """``c[w]`` = number of weight-``w`` points of ``{0,1}^X`` where ``q != OR``."""
    xs = _domain(q, X)
    cap = ENUM_CAP if cap is None else cap
    if len(xs) > cap:
        raise CapExceeded("exact error profile", len(xs), cap)
    vals = q.with_universe(xs).cube_values()
    want = np.ones(vals.shape[0], dtype=object)
    want[0] = 0
    bad = vals != want
    w = np.bitwise_count(np.arange(vals.shape[0], dtype=np.uint64))
    return [int(x) for x in np.bincount(w[bad].astype(np.int64), minlength=len(xs) + 1)]


def _profile_value(counts: list[int], m: int, i: int) -> Fraction:
    # sum_w c_w (2^-i)^w (1-2^-i)^(m-w) = sum_w c_w (2^i-1)^(m-w) / 2^(i m)
    a = (1 << i) - 1
    num = sum(c * a ** (m - w) for w, c in enumerate(counts) if c)
    return Fraction(num, 1 << (i * m))


def err_level(q: Polynomial, X, i: int, cap: int | None = None) -> Fraction:
    """Exact ``Err_i^X(q)``."""
    if i < 1:
        raise ValueError("level i must be at least 1")
    counts = disagreement_by_weight(q, X, cap)
    return _profile_value(counts, len(counts) - 1, i)


def err_profile(q: Polynomial, X, levels: Iterable[int], cap: int | None = None) -> dict[int, Fraction]:
    counts = disagreement_by_weight(q, X, cap)
    m = len(counts) - 1
    out = {}
    for i in levels:
        if i < 1:
            raise ValueError("level i must be at least 1")
        out[i] = _profile_value(counts, m, i)
    return out


def err_level_mc(q: Polynomial, X, i: int, trials: int, seed: int) -> tuple[Fraction, float]:
    """Monte Carlo ``Err_i^X(q)``: (estimate, standard error)."""
    xs = _domain(q, X)
    rng = seeding.np_rng(seed, "err-mc", i)
    pts = rng.integers(0, 1 << i, size=(trials, len(xs))) == 0
    nums, den = boolean_batch_eval(q, pts, xs)
    orv = pts.any(axis=1).astype(np.int64)
    bad = int(np.count_nonzero(nums != orv * den))
    est = Fraction(bad, trials)
    p = float(est)
    return est, math.sqrt(max(p * (1 - p), 0.0) / trials)


def avg_err(q: Polynomial, X, ell: int, cap: int | None = None) -> Fraction:
    if ell < 1:
        raise ValueError("ell must be at least 1")
    prof = err_profile(q, X, range(1, ell + 1), cap)
    return sum(prof.values(), Fraction(0)) / ell


def is_good(q: Polynomial, X, ell: int, delta) -> bool:
    """Average of ``Err_1..Err_ell`` is at most ``delta``."""
    return avg_err(q, X, ell) <= Fraction(delta)


def averaging_shift_check(q: Polynomial, X, ell: int, b: int):
    """``avg_{b<i<=ell} Err_i <= avg_{i<=ell} Err_i / (1 - b/ell)``.

    Returns ``(lhs, rhs, holds)``.
    """
    if not 0 <= b < ell:
        raise ValueError("need 0 <= b < ell")
    prof = err_profile(q, X, range(1, ell + 1))
    lhs = sum((prof[i] for i in range(b + 1, ell + 1)), Fraction(0)) / (ell - b)
    rhs = (sum(prof.values(), Fraction(0)) / ell) / (1 - Fraction(b, ell))
    return lhs, rhs, lhs <= rhs


# ---------------------------------------------------------------------------
# restrictions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Restriction:
    """Variables of ``X`` outside ``stars`` are fixed to 0."""

    X: frozenset
    stars: frozenset
    b: int

    def __post_init__(self):
        if not self.stars <= self.X:
            raise ValueError("stars must be a subset of X")
        if self.b < 0:
            raise ValueError("b must be non-negative")

    @property
    def p(self) -> Fraction:
        return Fraction(1, 1 << self.b)


def sample_restriction(X, b: int, seed: int) -> Restriction:
    if b < 1:
        raise ValueError("b must be at least 1 (star probability at most 1/2)")
    xs = sorted(set(X))
    rng = seeding.py_rng(seed, "restriction", b)
    stars = frozenset(v for v in xs if seeding.bernoulli_pow2(rng, b))
    return Restriction(frozenset(xs), stars, b)


def apply(q: Polynomial, rho: Restriction) -> Polynomial:
    """``q|rho``, living over the star set."""
    _domain(q, rho.X)
    zeros = {v: 0 for v in q.universe - rho.stars}
    return q.restrict(zeros).with_universe(rho.stars)


def restriction_counts(q: Polynomial, X, cap: int = EXACT_E3_MAX) -> np.ndarray:
    """``N[t, w]``: pairs ``S <= T <= X`` with ``|T| = t``, ``|S| = w`` and
    ``q(S) != OR(S)`` (``S`` read as the indicator point).

    Ranked subset sums of the disagreement indicator give, for every star
    set ``T``, the weight profile of ``q|T``'s disagreements.
    """
    xs = _domain(q, X)
    m = len(xs)
    if m > cap:
        raise CapExceeded("restriction enumeration", m, cap)
    vals = q.with_universe(xs).cube_values()
    want = np.ones(1 << m, dtype=object)
    want[0] = 0
    bad = vals != want
    weight = np.bitwise_count(np.arange(1 << m, dtype=np.uint64)).astype(np.int64)
    # ranked[w, T] = #{S <= T : |S| = w, q(S) != OR(S)}
    ranked = np.zeros((m + 1, 1 << m), dtype=np.int64)
    ranked[weight[bad], np.flatnonzero(bad)] = 1
    for i in range(m):
        v = ranked.reshape(m + 1, -1, 2, 1 << i)
        v[:, :, 1, :] += v[:, :, 0, :]
    out = np.zeros((m + 1, m + 1), dtype=np.int64)
    for t in range(m + 1):
        out[t] = ranked[:, weight == t].sum(axis=1)
    return out


def verify_restriction_identity(q: Polynomial, X, i: int, b: int, mode: str = "ranked",
                                counts: np.ndarray | None = None):
    """Average of ``Err_i`` over random restrictions against ``Err_{i+b}``.

    ``mode="ranked"`` uses :func:`restriction_counts`; ``mode="literal"``
    restricts ``q`` by every star set and calls :func:`err_level`.
    Returns ``(lhs, rhs, lhs == rhs)``.
    """
    if i < 1 or b < 1:
        raise ValueError("need i >= 1 and b >= 1")
    xs = _domain(q, X)
    m = len(xs)
    if m > EXACT_E3_MAX:
        raise CapExceeded("restriction enumeration", m, EXACT_E3_MAX)
    p = Fraction(1, 1 << b)
    if mode == "ranked":
        N = restriction_counts(q, xs) if counts is None else counts
        a = (1 << i) - 1
        lhs = Fraction(0)
        for t in range(m + 1):
            inner = sum(int(N[t, w]) * a ** (t - w) for w in range(t + 1))
            if inner:
                lhs += p**t * (1 - p) ** (m - t) * Fraction(inner, 1 << (i * t))
    elif mode == "literal":
        lhs = Fraction(0)
        for T in range(1 << m):
            stars = frozenset(xs[j] for j in range(m) if T >> j & 1)
            rho = Restriction(frozenset(xs), stars, b)
            t = len(stars)
            lhs += p**t * (1 - p) ** (m - t) * err_level(apply(q, rho), stars, i)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    rhs = err_level(q, xs, i + b)
    return lhs, rhs, lhs == rhs


# ---------------------------------------------------------------------------
# disjoint terms and anti-concentration
# ---------------------------------------------------------------------------


def disjoint_terms(q: Polynomial, d: int | None = None) -> list[tuple[int, ...]]:
    """Greedy maximal family of pairwise variable-disjoint degree-``d`` terms.

    Terms are scanned in graded-lex order.  Maximality (every degree-``d``
    term meets the chosen ones) is checked before returning.
    """
    d = q.degree if d is None else d
    top = [mk for mk in q.masks() if mk.bit_count() == d and d > 0]
    used = 0
    chosen = []
    for mk in top:
        if not mk & used:
            chosen.append(mk)
            used |= mk
    if any(not mk & used for mk in top):
        raise AssertionError("disjoint term family is not maximal")
    return [vars_of(mk) for mk in chosen]


def nv_bound(d: int, r: int, B=1.0) -> float:
    """``B * d^(4/3) * r^(-1/(4d+1)) * sqrt(log2 r)``."""
    if d < 1 or r < 1:
        return float("nan")
    return float(B) * d ** (4 / 3) * r ** (-1 / (4 * d + 1)) * math.sqrt(math.log2(r))


@dataclass(frozen=True)
class AntiConcentration:
    zeros: int
    trials: int
    estimate: Fraction
    sigma: float
    d: int
    r: int
    bound: float
    B: float

    def interval(self, z: float = 3.0) -> tuple[float, float]:
        e = float(self.estimate)
        return e - z * self.sigma, e + z * self.sigma


def anticoncentration_probe(q: Polynomial, trials: int, seed: int, B=1.0, X=None) -> AntiConcentration:
    """Monte Carlo ``Pr_{x uniform}[q(x) = 0]`` with exact per-sample values."""
    if q.is_zero():
        raise ValueError("q must be nonzero")
    xs = _domain(q, q.universe if X is None else X)
    rng = seeding.np_rng(seed, "anticonc")
    pts = rng.integers(0, 2, size=(trials, len(xs)), dtype=np.int8).astype(bool)
    nums, _ = boolean_batch_eval(q, pts, xs)
    zeros = int(np.count_nonzero(nums == 0))
    est = Fraction(zeros, trials)
    pf = float(est)
    d = q.degree
    r = len(disjoint_terms(q, d))
    return AntiConcentration(zeros, trials, est, math.sqrt(max(pf * (1 - pf), 0.0) / trials),
                             d, r, nv_bound(d, r, B), float(B))


# ---------------------------------------------------------------------------
# the restriction process
# ---------------------------------------------------------------------------


def exp_upper(x: float) -> Fraction:
    """A rational number at least ``exp(x)``: the float value nudged up."""
    if x > 700:
        return Fraction(2) ** math.ceil(x * math.log2(math.e) + 1)
    v = math.exp(x)
    for _ in range(4):
        v = math.nextafter(v, math.inf)
    return Fraction(v)


@dataclass
class ProcessConfig:
    preset: str = "scaled"
    s: int | None = None           # copies in the one-sided product
    b: int | None = None           # star probability 2^-b
    r: int | None = None           # disjoint-term threshold
    ell0: int | None = None
    eps0: Fraction | None = None   # None: measured average error of q0
    C: int = 16
    retry_limit: int = 20_000
    round_budget: int | None = None
    mc_trials: int = 20_000
    B: float = 1.0

    @classmethod
    def from_preset(cls, preset: str, **overrides) -> "ProcessConfig":
        if preset not in ("paper", "scaled"):
            raise ValueError(f"unknown preset {preset!r}")
        return cls(preset=preset, **overrides)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eps0"] = None if self.eps0 is None else fmt_fraction(Fraction(self.eps0))
        return d


@dataclass
class Round:
    index: int
    n: int
    d: int
    ell: int
    eps: Fraction
    eps_closed_form: Fraction
    stars: list[int]
    disjoint: list[tuple[int, ...]]
    retries: int
    rejections: dict[str, int]
    avg_err: Fraction | None
    statistical: bool
    calc: dict[str, bool]
    poly: Polynomial = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "round": self.index, "n": self.n, "d": self.d, "ell": self.ell,
            "eps": fmt_fraction(self.eps), "eps_closed_form": fmt_fraction(self.eps_closed_form),
            "stars": self.stars, "disjoint_terms": [list(t) for t in self.disjoint],
            "retries": self.retries, "rejections": self.rejections,
            "avg_err": None if self.avg_err is None else fmt_fraction(self.avg_err),
            "statistical": self.statistical, "calc": self.calc,
            "poly": poly_record(self.poly),
        }


def poly_record(p: Polynomial):
    if len(p) <= TRACE_POLY_MAX_TERMS:
        return p.to_dict()
    return {"sha256": hashlib.sha256(p.to_json().encode()).hexdigest(), "terms": len(p)}


@dataclass
class RestrictionTrace:
    params: dict
    q0: Polynomial
    X0: list[int]
    d0: int
    eps0: Fraction
    ell0: int
    initial_good: bool
    rounds: list[Round]
    status: str
    dominant_event: str | None
    rejections: dict[str, int]
    terminal: dict | None
    flags: list[str]

    @property
    def t(self) -> int:
        return len(self.rounds)

    def final_poly(self) -> Polynomial:
        return self.rounds[-1].poly if self.rounds else self.q0

    def to_dict(self) -> dict:
        return {
            "params": self.params, "X0": self.X0, "d0": self.d0, "ell0": self.ell0,
            "eps0": fmt_fraction(self.eps0), "initial_good": self.initial_good,
            "q0": poly_record(self.q0), "rounds": [r.to_dict() for r in self.rounds],
            "t": self.t, "status": self.status, "dominant_event": self.dominant_event,
            "rejections": self.rejections, "terminal": self.terminal, "flags": self.flags,
        }

    def csv(self) -> str:
        lines = ["round,n_i,d_i,ell_i,eps_i_num,eps_i_den,retries"]
        lines.append(f"0,{len(self.X0)},{self.d0},{self.ell0},{self.eps0.numerator},{self.eps0.denominator},0")
        for r in self.rounds:
            lines.append(f"{r.index},{r.n},{r.d},{r.ell},{r.eps.numerator},{r.eps.denominator},{r.retries}")
        return "\n".join(lines) + "\n"


def build_q0(pp: ProbPoly, s: int, seed: int) -> Polynomial:
    """``1 - prod (1 - P'_k)`` over ``s`` draws; draws nonzero at 0 become 0."""
    n = pp.n
    one = Polynomial.const(1, range(n))
    zero = [0] * n
    acc = one
    for k in range(s):
        p = pp.sample(seeding.derive(seed, "q0", k)).with_universe(range(n))
        if p.evaluate(zero) != 0:
            p = Polynomial.zero(range(n))
        acc = acc * (one - p)
    return one - acc


def _log2(n: int) -> float:
    return math.log2(n) if n > 1 else 1.0


def _good_after(q: Polynomial, stars, ell: int, eps: Fraction, cfg: ProcessConfig, seed: int):
    """(avg error or estimate, passes, statistical)."""
    if len(stars) <= EXACT_E3_MAX:
        a = avg_err(q, stars, ell)
        return a, a <= eps, False
    est = Fraction(0)
    var = 0.0
    for i in range(1, ell + 1):
        e, sd = err_level_mc(q, stars, i, cfg.mc_trials, seeding.derive(seed, "e3", i))
        est += e
        var += sd * sd
    est /= ell
    margin = 3 * math.sqrt(var) / ell
    return est, float(est) + margin <= float(eps), True


def run_restriction_process(source, config: ProcessConfig | None = None, seed: int = 0,
                            n: int | None = None) -> RestrictionTrace:
    """Repeatedly restrict a low-error OR polynomial until it is constant.

    ``source`` is a :class:`ProbPoly` for ``OR_n`` (``q0`` is then built by
    :func:`build_q0`) or a polynomial used directly as ``q0``.
    """
    cfg = config or ProcessConfig()
    if isinstance(source, ProbPoly):
        n = source.n
        logn = _log2(n)
        s = cfg.s if cfg.s is not None else (1 if cfg.preset == "scaled" else max(1, math.ceil(math.log2(logn))))
        q0 = build_q0(source, s, seed)
    else:
        q0 = source
        s = None
        n = n if n is not None else (max(q0.universe) + 1 if q0.universe else 1)
        logn = _log2(n)
    X0 = list(range(n))
    _domain(q0, X0)
    d0 = q0.degree
    flags: list[str] = []

    if cfg.preset == "paper":
        r = cfg.r if cfg.r is not None else math.ceil((max(d0, 1) * logn**2) ** (10 * max(d0, 1)))
        b = cfg.b if cfg.b is not None else max(1, math.ceil(math.log2(2 * r * r)) - 1)
        ell0 = cfg.ell0 if cfg.ell0 is not None else max(1, math.floor(logn / 2))
        eps0 = Fraction(cfg.eps0) if cfg.eps0 is not None else 1 / Fraction(logn**2)
    else:
        r = cfg.r
        b = cfg.b if cfg.b is not None else 1
        ell0 = cfg.ell0 if cfg.ell0 is not None else d0 + 1
        eps0 = None if cfg.eps0 is None else Fraction(cfg.eps0)
    if eps0 is None:
        eps0 = avg_err(q0, X0, ell0)
    eps0 = Fraction(eps0)
    initial_good = avg_err(q0, X0, ell0) <= eps0 if n <= ENUM_CAP else False
    if not initial_good:
        flags.append("q0 is not (X0, ell0, eps0)-good")
    p = Fraction(1, 1 << b)
    growth = exp_upper(cfg.C * b / logn)
    budget = cfg.round_budget if cfg.round_budget is not None else d0 + 1

    params = {"config": cfg.to_dict(), "n": n, "s": s, "r": r, "b": b, "p": fmt_fraction(p),
              "ell0": ell0, "eps0": fmt_fraction(eps0), "growth": fmt_fraction(growth),
              "seed": seed, "round_budget": budget}

    q, X, ell, eps = q0, X0, ell0, eps0
    rounds: list[Round] = []
    totals = {"E1": 0, "E2": 0, "E3": 0}
    status = "constant" if q.degree == 0 else None
    dominant = None
    while status is None:
        if len(rounds) >= budget:
            status = "round_budget"
            break
        d = q.degree
        S = disjoint_terms(q, d)
        svars = frozenset(v for t in S for v in t)
        if r is not None and len(S) > r:
            flags.append(f"round {len(rounds) + 1}: {len(S)} disjoint terms exceed r={r}")
        ell_new = ell - b
        if ell_new < 1:
            status = "ell_exhausted"
            break
        eps_new = eps * growth
        m = len(X)
        lo, hi = p * m / 2, 3 * p * m / 2
        free = m - len(svars & set(X))
        if math.ceil(lo) > min(math.floor(hi), free):
            # no star set of admissible size avoids every variable of S
            status = "infeasible"
            dominant = "E1" if math.ceil(lo) > math.floor(hi) else "E1+E2"
            break
        rej = {"E1": 0, "E2": 0, "E3": 0}
        accepted = None
        for attempt in range(cfg.retry_limit):
            rseed = seeding.derive(seed, "round", len(rounds) + 1, "try", attempt)
            rho = sample_restriction(X, b, rseed)
            k = len(rho.stars)
            if not lo <= k <= hi:
                rej["E1"] += 1
                continue
            if rho.stars & svars:
                rej["E2"] += 1
                continue
            q_new = apply(q, rho)
            a, ok, stat = _good_after(q_new, sorted(rho.stars), ell_new, eps_new, cfg, rseed)
            if not ok:
                rej["E3"] += 1
                continue
            accepted = (rho, q_new, a, stat, attempt)
            break
        for key in totals:
            totals[key] += rej[key]
        if accepted is None:
            status = "retry_exhausted"
            dominant = max(rej, key=lambda e: (rej[e], e))
            break
        rho, q_new, a, stat, attempt = accepted
        if q_new.degree >= d:
            status = "degree_stuck"
            flags.append(f"round {len(rounds) + 1}: degree {q_new.degree} did not drop below {d}")
            break
        idx = len(rounds) + 1
        n_i = len(rho.stars)
        calc = {
            "n_i >= sqrt(n)": n_i * n_i >= n,
            "ell_i >= log n / 4": ell_new >= logn / 4,
            "eps_i < 1 / log n": eps_new * Fraction(logn) < 1,
        }
        rounds.append(Round(idx, n_i, q_new.degree, ell_new, eps_new, eps0 * growth**idx,
                            sorted(rho.stars), S, attempt, rej, a, stat, calc, q_new))
        q, X, ell, eps = q_new, sorted(rho.stars), ell_new, eps_new
        if q.degree == 0:
            status = "constant"

    c = q.constant_value()
    q0_zero = Fraction(q0.evaluate({v: 0 for v in q0.universe}))
    err1 = err_level(q, X, 1) if len(X) <= ENUM_CAP else None
    premise = ell * eps < Fraction(1, 2)
    terminal = {
        "reached_constant": c is not None,
        "value": None if c is None else fmt_fraction(c),
        "q0_at_zero": fmt_fraction(q0_zero),
        "matches_q0_at_zero": None if c is None else c == q0_zero,
        "n_t": len(X),
        "err1": None if err1 is None else fmt_fraction(err1),
        "ell_t_eps_t": fmt_fraction(ell * eps),
        "premise_ell_eps_below_half": premise,
        "err1_below_half": None if err1 is None else err1 < Fraction(1, 2),
        # a constant restriction of q0 equals q0(0); with Err_1 < 1/2 on a
        # large enough X_t the constant would have to be 1
        "contradiction": bool(c is not None and premise and err1 is not None
                              and err1 < Fraction(1, 2) and c != q0_zero),
    }
    if any(rd.statistical for rd in rounds):
        flags.append("statistical")
    return RestrictionTrace(params, q0, X0, d0, eps0, ell0, initial_good, rounds, status,
                            dominant, totals, terminal, flags)


def check_trace(trace: RestrictionTrace) -> list[str]:
    """Invariant violations of a trace (empty when all hold)."""
    bad = []
    prev_d, prev_n, prev_ell, prev_eps = trace.d0, len(trace.X0), trace.ell0, trace.eps0
    p = Fraction(trace.params["p"])
    b = trace.params["b"]
    growth = Fraction(trace.params["growth"])
    if trace.t > max(trace.d0, 0):
        bad.append(f"t={trace.t} exceeds d0={trace.d0}")
    for rd in trace.rounds:
        if not rd.d < prev_d:
            bad.append(f"round {rd.index}: degree {rd.d} not below {prev_d}")
        if not p * prev_n / 2 <= rd.n <= 3 * p * prev_n / 2:
            bad.append(f"round {rd.index}: n={rd.n} outside the window")
        if rd.ell != prev_ell - b:
            bad.append(f"round {rd.index}: ell step")
        if rd.eps != prev_eps * growth or rd.eps > rd.eps_closed_form:
            bad.append(f"round {rd.index}: eps ledger")
        if not rd.statistical and rd.avg_err is not None and rd.avg_err > rd.eps:
            bad.append(f"round {rd.index}: goodness")
        prev_d, prev_n, prev_ell, prev_eps = rd.d, rd.n, rd.ell, rd.eps
    return bad

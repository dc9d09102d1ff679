"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error (including cap violations),
2 validation failure.  Artifacts go to ``--out`` (written atomically) or to
stdout; the one-line summary goes to stdout when ``--out`` is given and to
stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

from . import circuits, kwise, lblab, ppw, probpoly
from .circuits import Circuit
from .poly import CapExceeded, Polynomial, fmt_fraction, multilinear_extension

EXIT_OK, EXIT_USAGE, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


def _frac(s: str) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as e:
        raise argparse.ArgumentTypeError(f"not a rational number: {s!r}") from e


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_json(path: str, what: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise UsageError(f"cannot read {what} file {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise UsageError(f"malformed {what} file {path}: {e}") from e


def _load_circuit(path: str) -> Circuit:
    d = _load_json(path, "circuit")
    try:
        return Circuit.from_dict(d)
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"malformed circuit file {path}: {e}") from e


def _load_poly(path: str) -> Polynomial:
    d = _load_json(path, "polynomial")
    try:
        return Polynomial.from_dict(d)
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"malformed polynomial file {path}: {e}") from e


class Result:
    def __init__(self, artifact: str, summary: str, ok: bool = True, extra: dict | None = None):
        self.artifact = artifact
        self.summary = summary
        self.ok = ok
        self.extra = extra or {}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_pseudomaj(a) -> Result:
    if a.ell < 1:
        raise UsageError("--ell must be at least 1")
    if a.ell > probpoly.PSEUDO_MAJ_CAP:
        raise CapExceeded("pseudo-majority size --ell", a.ell, probpoly.PSEUDO_MAJ_CAP)
    pm = probpoly.build_pseudo_majority(a.ell)
    ok, cex = True, None
    if a.verify:
        ok, cex = probpoly.verify_pseudo_majority(pm.poly, a.ell)
    doc = {"ell": a.ell, "r": pm.r, "verified": ok if a.verify else pm.verified,
           "counterexample": None if cex is None else {"set": list(cex[0]), "b": cex[1]},
           "poly": pm.poly.to_dict()}
    return Result(_dumps(doc), f"pseudomaj ell={a.ell} r={pm.r} terms={len(pm.poly)} "
                  f"weight={fmt_fraction(pm.poly.weight())} verified={doc['verified']}", ok)


def _or_sampler(n: int, t: int | None):
    base = probpoly.or_base(n)
    return base if not t or t == 1 else probpoly.amplify_onesided_or(base, t)


def _sample_doc(pp, seed: int) -> tuple[dict, Polynomial]:
    p = pp.sample(seed)
    return {"seed": seed, "certificate": pp.certificate(), "poly": p.to_dict()}, p


def cmd_or_poly(a) -> Result:
    if a.n < 1:
        raise UsageError("--n must be positive")
    pp = _or_sampler(a.n, a.t)
    doc, p = _sample_doc(pp, a.seed)
    return Result(_dumps(doc), f"or-poly n={a.n} t={a.t or 1} terms={len(p)} degree={p.degree} "
                  f"eps_claim={fmt_fraction(pp.eps_claim)}")


def cmd_amplify(a) -> Result:
    if a.n < 1:
        raise UsageError("--n must be positive")
    pp = probpoly.amplify_general(_or_sampler(a.n, a.t), a.delta, a.eps, a.A)
    doc, p = _sample_doc(pp, a.seed)
    return Result(_dumps(doc), f"amplify n={a.n} ell={pp.meta['ell']} terms={len(p)} "
                  f"degree={p.degree} eps_claim={fmt_fraction(pp.eps_claim)}")


def cmd_compile(a) -> Result:
    c = _load_circuit(a.circuit)
    pp = probpoly.circuit_to_probpoly(c, a.eps, a.route, a.A)
    doc, p = _sample_doc(pp, a.seed)
    return Result(_dumps(doc), f"compile size={c.size()} depth={c.depth()} route={a.route} "
                  f"terms={len(p)} eps_claim={fmt_fraction(pp.eps_claim)}")


def cmd_ppw(a) -> Result:
    if a.circuit:
        c = _load_circuit(a.circuit)
        base = ppw.ppw_for_circuit(c)
    else:
        if a.n is None or a.n < 1:
            raise UsageError("ppw needs --n or --circuit")
        c = circuits.or_n(a.n)
        base = ppw.ppw_base_or(a.n)
    w = ppw.ppw_amplify(base, a.eps, a.A) if a.eps is not None else base
    s = w.sample(a.seed)
    doc = {"certificate": w.certificate(), "sample": s.to_dict(),
           "witness_size": s.witness.size(), "witness_depth": s.witness.depth()}
    ok = True
    if a.verify:
        ok, cex = ppw.verify_witness_soundness(s, c)
        doc["soundness"] = {"ok": ok, "counterexample": None if cex is None else list(cex)}
    return Result(_dumps(doc), f"ppw {w.name} terms={len(s.poly)} witness_size={s.witness.size()} "
                  f"witness_depth={s.witness.depth()}" + (f" sound={ok}" if a.verify else ""), ok)


FAMILIES = {
    "poly-eval": lambda n, k: kwise.build_kwise(n, k),
    "even-parity": lambda n, k: kwise.even_parity_family(n),
    "uniform": lambda n, k: kwise.uniform_family(n),
}


def cmd_fool(a) -> Result:
    c = _load_circuit(a.circuit)
    if a.n is not None and a.n != c.n:
        raise UsageError(f"--n {a.n} differs from the circuit's {c.n} inputs")
    n = c.n
    if a.sweep:
        ks = range(1, n + 1)
    elif a.k is not None:
        ks = [a.k]
    else:
        ks = [n - 1 if a.family == "even-parity" else n]
    for k in ks:
        if not 1 <= k <= n:
            raise UsageError(f"--k must lie in 1..{n}")
    if a.family == "poly-eval":
        rows = kwise.fooling_sweep(c, ks, seed=a.seed, mc_trials=a.trials)
    else:
        rows = []
        for k in ks:
            fam = FAMILIES[a.family](n, k)
            rows.append(kwise.GapEstimate(fam.k, kwise.fooling_gap_exact(c, fam), True))
    last = rows[-1]
    return Result(kwise.sweep_csv(rows), f"fool family={a.family} n={n} rows={len(rows)} "
                  f"last_gap={fmt_fraction(last.gap)}")


def _poly_arg(a) -> Polynomial:
    if a.poly:
        return _load_poly(a.poly)
    if a.pairs:
        return Polynomial({(2 * j, 2 * j + 1): 1 for j in range(a.pairs)}, universe=range(2 * a.pairs))
    raise UsageError("give --poly FILE or --pairs M")


def cmd_err_profile(a) -> Result:
    q = _poly_arg(a)
    X = range(a.n) if a.n is not None else sorted(q.universe)
    prof = lblab.err_profile(q, X, range(1, a.levels + 1))
    lines = ["i,err_num,err_den"] + [f"{i},{e.numerator},{e.denominator}" for i, e in prof.items()]
    avg = sum(prof.values(), Fraction(0)) / a.levels
    return Result("\n".join(lines) + "\n", f"err-profile |X|={len(list(X))} levels={a.levels} "
                  f"avg={fmt_fraction(avg)}")


def cmd_restrict_id(a) -> Result:
    q = _poly_arg(a)
    X = range(a.n) if a.n is not None else sorted(q.universe)
    lhs, rhs, eq = lblab.verify_restriction_identity(q, X, a.i, a.b, mode=a.mode)
    doc = {"i": a.i, "b": a.b, "lhs": fmt_fraction(lhs), "rhs": fmt_fraction(rhs), "equal": eq}
    return Result(_dumps(doc), f"restrict-id i={a.i} b={a.b} lhs={fmt_fraction(lhs)} "
                  f"rhs={fmt_fraction(rhs)} equal={eq}", eq)


def cmd_anticonc(a) -> Result:
    q = _poly_arg(a)
    res = lblab.anticoncentration_probe(q, a.trials, a.seed, a.B)
    lo, hi = res.interval()
    doc = {"zeros": res.zeros, "trials": res.trials, "estimate": fmt_fraction(res.estimate),
           "sigma_float": res.sigma, "ci3_float": [lo, hi], "d": res.d, "r": res.r,
           "B_float": res.B, "bound_float": res.bound}
    return Result(_dumps(doc), f"anticonc d={res.d} r={res.r} estimate={fmt_fraction(res.estimate)} "
                  f"bound_float={res.bound:.6g}")


def cmd_lbd_sim(a) -> Result:
    if a.n < 2:
        raise UsageError("--n must be at least 2")
    overrides = {k: getattr(a, k) for k in ("s", "b", "r", "retry_limit") if getattr(a, k) is not None}
    if a.eps0 is not None:
        overrides["eps0"] = a.eps0
    cfg = lblab.ProcessConfig.from_preset(a.preset, **overrides)
    tr = lblab.run_restriction_process(probpoly.or_base(a.n), cfg, seed=a.seed)
    violations = lblab.check_trace(tr)
    doc = tr.to_dict()
    doc["invariant_violations"] = violations
    if a.csv:
        write_atomic(a.csv, tr.csv())
    return Result(_dumps(doc), f"lbd-sim n={a.n} preset={a.preset} d0={tr.d0} t={tr.t} "
                  f"status={tr.status} dominant={tr.dominant_event}", not violations)


def cmd_design_check(a) -> Result:
    try:
        d = kwise.greedy_design(a.m, a.r, a.ell, a.s)
    except ValueError as e:
        raise UsageError(str(e)) from e
    ok_sets, pair = d.verify()
    applies = kwise.design_bound_applies(d)
    holds = kwise.design_bound_check(d)
    doc = {"design": d.to_dict(), "sets": len(d.sets), "intersections_ok": ok_sets,
           "bound_applies": applies, "bound_holds": holds,
           "bound": None if not applies else fmt_fraction(min(Fraction(a.r * a.r, 2 * a.ell), len(d.sets)))}
    return Result(_dumps(doc), f"design-check m={a.m} r={a.r} ell={a.ell} sets={len(d.sets)} "
                  f"applies={applies} holds={holds}", ok_sets and holds)


# ---------------------------------------------------------------------------
# self tests
# ---------------------------------------------------------------------------


def _selftest_pseudomaj():
    for ell in range(1, 8):
        pm = probpoly.build_pseudo_majority(ell)
        ok, _ = probpoly.verify_pseudo_majority(pm.poly, ell, method="symbolic")
        if not ok:
            return False, f"ell={ell}"
    return True, "pseudo-majority ell=1..7"


def _selftest_or():
    f = circuits.or_n(4).truth_table()
    for seed in range(20):
        p = probpoly.or_base(4).sample(seed)
        if p.evaluate([0] * 4) != 0 or p.formal_degree > probpoly.or_scales(4):
            return False, f"seed {seed}"
    tab = probpoly.error_exact(probpoly.amplify_onesided_or(probpoly.or_base(4), 2), f, range(50))
    return int(tab.counts[0]) == 0, "or_base one-sided at 0, degree bound"


def _selftest_amplify():
    pp = probpoly.amplify_general(probpoly.amplify_onesided_or(probpoly.or_base(3), 4),
                                  Fraction(1, 6), Fraction(1, 8), Fraction(3, 50))
    for seed in range(5):
        p = pp.sample(seed)
        if p.linf_norm_exact() > pp.linf_bound or p.formal_degree > pp.degree_bound:
            return False, f"seed {seed}"
    return True, "certificates on 5 draws"


def _selftest_compile():
    c = circuits.parity_n(3)
    pp = probpoly.circuit_to_probpoly(c, Fraction(1, 4))
    for seed in range(5):
        if pp.sample(seed).formal_degree > pp.degree_bound:
            return False, f"seed {seed}"
    return True, "parity_3 compile degree bound"


def _selftest_ppw():
    w, c = ppw.ppw_or(4, Fraction(1, 8), A=2)
    for seed in range(10):
        ok, cex = ppw.verify_witness_soundness(w.sample(seed), c)
        if not ok:
            return False, f"seed {seed} input {cex}"
    return True, "witness soundness OR_4 on 10 draws"


def _selftest_fool():
    fam = kwise.even_parity_family(4)
    ok = (kwise.verify_kwise(fam)[0]
          and kwise.fooling_gap_exact(circuits.parity_n(4), fam) == Fraction(1, 2)
          and kwise.fooling_gap_exact(circuits.or_n(4), fam) == Fraction(1, 16)
          and kwise.verify_kwise(kwise.build_kwise(6, 3))[0])
    return ok, "even-parity facts and poly-eval marginals"


def _selftest_err():
    x = Polynomial.var(0, [0, 1])
    return lblab.err_level(x, [0, 1], 2) == Fraction(3, 16), "Err_2(x0) on 2 variables"


def _selftest_restrict():
    x = Polynomial.var(0, [0, 1])
    q = multilinear_extension(circuits.or_n(3).truth_table())
    ok = all(lblab.verify_restriction_identity(p, range(3), i, b)[2]
             for p in (x.with_universe(range(3)), q) for i in (1, 2) for b in (1, 2))
    return ok, "restriction identity on small cases"


def _selftest_anticonc():
    q = Polynomial({(0, 1): 1, (2, 3): 1})
    res = lblab.anticoncentration_probe(q, 20000, 0)
    lo, hi = res.interval()
    return lo <= 9 / 16 <= hi and res.r == 2, "Pr[q=0] for x0x1+x2x3"


def _selftest_lbd():
    tr = lblab.run_restriction_process(Polynomial.var(0, range(8)), lblab.ProcessConfig(), seed=1, n=8)
    return tr.status == "constant" and not lblab.check_trace(tr), "single-variable process"


def _selftest_design():
    d = kwise.greedy_design(9, 3, 1, 100)
    return d.verify()[0] and len(d.sets) >= 9 and kwise.design_bound_check(d), "m=9 r=3 ell=1"


SELFTESTS = {
    "pseudomaj": _selftest_pseudomaj, "or-poly": _selftest_or, "amplify": _selftest_amplify,
    "compile": _selftest_compile, "ppw": _selftest_ppw, "fool": _selftest_fool,
    "err-profile": _selftest_err, "restrict-id": _selftest_restrict, "anticonc": _selftest_anticonc,
    "lbd-sim": _selftest_lbd, "design-check": _selftest_design,
}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acpoly", description="Probabilistic polynomial experiments.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--out", help="artifact path; stdout when omitted")
        p.add_argument("--config", help="JSON file of option defaults (keys as flag names)")
        p.add_argument("--selftest", action="store_true", help="run small exhaustive checks and exit")
        p.set_defaults(func=fn)
        return p

    p = add("pseudomaj", cmd_pseudomaj, "build the majority pseudo-majority polynomial")
    p.add_argument("--ell", type=int, default=3)
    p.add_argument("--verify", action="store_true", help="exhaustive restriction check")

    p = add("or-poly", cmd_or_poly, "sample the one-sided OR polynomial")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--t", type=int, default=None, help="one-sided repetitions")

    p = add("amplify", cmd_amplify, "sample a pseudo-majority amplified OR polynomial")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--t", type=int, default=4, help="one-sided repetitions of the base")
    p.add_argument("--eps", type=_frac, default=Fraction(1, 64))
    p.add_argument("--delta", type=_frac, default=Fraction(1, 6))
    p.add_argument("--A", type=_frac, default=Fraction(3, 50))

    p = add("compile", cmd_compile, "compile a circuit file into a probabilistic polynomial")
    p.add_argument("--circuit", required=False)
    p.add_argument("--eps", type=_frac, default=Fraction(1, 4))
    p.add_argument("--route", choices=("union", "amplify"), default="union")
    p.add_argument("--A", type=_frac, default=probpoly.DEFAULT_A)

    p = add("ppw", cmd_ppw, "sample a probabilistic polynomial with witness")
    p.add_argument("--n", type=int, default=None, help="OR arity (when no --circuit)")
    p.add_argument("--circuit", default=None)
    p.add_argument("--eps", type=_frac, default=None, help="amplify to this error")
    p.add_argument("--A", type=_frac, default=Fraction(3))
    p.add_argument("--verify", action="store_true")

    p = add("fool", cmd_fool, "exact fooling gaps of k-wise families (CSV)")
    p.add_argument("--circuit", required=False)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--sweep", action="store_true", help="all k = 1..n")
    p.add_argument("--family", choices=sorted(FAMILIES), default="poly-eval")
    p.add_argument("--trials", type=int, default=100_000, help="Monte Carlo seeds above the seed cap")

    for name, fn, help_ in (("err-profile", cmd_err_profile, "exact Err_i profile (CSV)"),
                            ("restrict-id", cmd_restrict_id, "check the restriction averaging identity"),
                            ("anticonc", cmd_anticonc, "Monte Carlo Pr[q = 0] probe")):
        p = add(name, fn, help_)
        p.add_argument("--poly", default=None, help="polynomial JSON file")
        p.add_argument("--pairs", type=int, default=None, help="use x0x1 + x2x3 + ... with M pairs")
        if name != "anticonc":
            p.add_argument("--n", type=int, default=None, help="X = 0..n-1 (default: poly universe)")
        if name == "err-profile":
            p.add_argument("--levels", type=int, default=4)
        if name == "restrict-id":
            p.add_argument("--i", type=int, default=1)
            p.add_argument("--b", type=int, default=1)
            p.add_argument("--mode", choices=("ranked", "literal"), default="ranked")
        if name == "anticonc":
            p.add_argument("--trials", type=int, default=100_000)
            p.add_argument("--B", type=float, default=1.0)

    p = add("lbd-sim", cmd_lbd_sim, "run the restriction process on a sampled OR polynomial")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--preset", choices=("paper", "scaled"), default="scaled")
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--b", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--eps0", type=_frac, default=None)
    p.add_argument("--retry-limit", dest="retry_limit", type=int, default=None)
    p.add_argument("--csv", default=None, help="also write the per-round CSV summary here")

    p = add("design-check", cmd_design_check, "greedy design and its size bound")
    p.add_argument("--m", type=int, default=9)
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--s", type=int, default=100)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = _load_json(args.config, "config")
        if not isinstance(cfg, dict):
            raise UsageError(f"config file {args.config} must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        defaults = {}
        for key, val in cfg.items():
            dest = key.lstrip("-").replace("-", "_")
            if dest not in known or dest in ("config", "func"):
                raise UsageError(f"config key {key!r} is not an option of {args.command}")
            defaults[dest] = val
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
        for a in sub._actions:
            if a.type is not None and isinstance(getattr(args, a.dest, None), str) and a.dest in defaults:
                setattr(args, a.dest, a.type(getattr(args, a.dest)))
    return args


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    if args.selftest:
        ok, what = SELFTESTS[args.command]()
        print(f"selftest {args.command}: {'pass' if ok else 'FAIL'} ({what})")
        return EXIT_OK if ok else EXIT_INVALID
    for req in ("circuit",):
        if args.command in ("compile", "fool") and not getattr(args, req, None):
            print(f"error: {args.command} needs --{req}", file=sys.stderr)
            return EXIT_USAGE
    try:
        res = args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except CapExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        write_atomic(args.out, res.artifact)
        print(res.summary)
    else:
        sys.stdout.write(res.artifact)
        print(res.summary, file=sys.stderr)
    return EXIT_OK if res.ok else EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

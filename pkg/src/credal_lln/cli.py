"""Command-line front end: ``credal-lln {bound,simulate,verify,example1,check}``.

Exit codes: 0 success / every check passed, 1 a mathematical check failed,
2 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .bounds import FORMULA_IDS, LOWER, UPPER, make_report
from .credal import CredalSet, upper_probability
from .errors import CapacityError, CredalError, InputError
from .examples import Example1Config, example1_coverage, example1_demonstrate_gap
from .martingale import (
    build_y_matrix,
    check_disintegrability,
    check_khr_exact,
    check_martingale_exact,
    check_second_moment_identity,
)
from .process import events as ev
from .process.exact import lower_upper_event_probability_dp, nodewise_brute_force
from .process.sampling import sample
from .process.spec import CredalStep, MomentStep, ProcessSpec
from .process.strategies import builtin_strategies, strategy_from_name
from .process.verify import records_to_csv, records_to_json, verify_bound

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

TRAJECTORY_COLUMNS = ("strategy", "trial", "step", "x", "m", "y")
EXAMPLE1_COLUMNS = ("n", "P1", "P2", "P3", "lower")

NAMED_SPECS = {
    "pm1-fair": lambda: CredalStep(CredalSet.from_extremes((-1, 1), [[0.5, 0.5]])),
    "binary-credal": lambda: CredalStep(
        CredalSet.from_extremes((0, 1), [[0.5, 0.5], [0.3, 0.7]])
    ),
    "ternary-credal": lambda: CredalStep(
        CredalSet.from_extremes(
            (-1, 0, 1), [[0.2, 0.5, 0.3], [0.4, 0.4, 0.2], [0.1, 0.3, 0.6]]
        )
    ),
    "moment": lambda: MomentStep(-0.25, 0.25, 1.0),
}
NAMED_DEFAULT_N = {"pm1-fair": 6, "binary-credal": 6, "ternary-credal": 4, "moment": 100}


def provenance(args):
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {"package": "credal_lln", "version": __version__,
            "generator": kernels.GENERATOR, "config": config}


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


def load_spec(args):
    if getattr(args, "spec", None):
        path = Path(args.spec)
        if path.exists():
            try:
                data = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: not valid JSON ({exc})") from exc
            if args.n is not None:
                data = dict(data, n=args.n)
            return ProcessSpec.from_dict(data)
        if args.spec not in NAMED_SPECS:
            raise InputError(
                f"{args.spec!r} is neither a file nor a named spec ({', '.join(NAMED_SPECS)})"
            )
        n = args.n if args.n is not None else NAMED_DEFAULT_N[args.spec]
        return ProcessSpec.homogeneous(NAMED_SPECS[args.spec](), n)
    raise InputError("--spec is required (a JSON file or a named spec)")


def load_strategies(args, spec):
    if not getattr(args, "strategy", None):
        return builtin_strategies(spec)
    return [strategy_from_name(name, spec) for name in _split_names(args.strategy)]


def _split_names(text):
    """Split on commas that are not inside parentheses."""
    out, depth, cur = [], 0, ""
    for ch in text:
        depth += ch == "("
        depth -= ch == ")"
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return [s.strip() for s in out if s.strip()]


def _emit(payload, args, out=None):
    out = out or sys.stdout
    if getattr(args, "json", False):
        out.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        out.write(json.dumps(payload, sort_keys=True) + "\n")


def cmd_bound(args):
    report = make_report(
        args.formula,
        n=args.n, eps=args.eps, bmax=args.bmax,
        B=_floats(args.B) if args.B else None,
        sigma2=args.sigma2, delta=args.delta,
        side={"upper": UPPER, "lower": LOWER}.get(args.side),
        expectation=args.expectation, s=args.s, a=args.a, b=args.b,
        moments=_floats(args.moments) if args.moments else None,
        eps_list=_floats(args.eps_list) if args.eps_list else None,
        window=args.window,
    )
    payload = dict(report.to_dict(), provenance=provenance(args))
    _emit(payload, args)
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_simulate(args):
    spec = load_spec(args)
    rows, summary = [], []
    for strat in load_strategies(args, spec):
        batch = sample(spec, strat, args.trials, args.seed, workers=args.workers)
        Y = build_y_matrix(batch)
        S = batch.draws.sum(axis=1)
        summary.append({
            "strategy": strat.name,
            "trials": batch.trials,
            "mean_of_means": float(np.mean(S / spec.n)),
            "mean_Y_n": float(Y[:, -1].mean()),
            "mean_Y_n_squared": float((Y[:, -1] ** 2).mean()),
        })
        if args.out:
            for r in range(batch.trials):
                for t in range(spec.n):
                    rows.append((strat.name, batch.trial0 + r, t + 1, repr(float(batch.draws[r, t])),
                                 repr(float(batch.realized_conditional_means[r, t])),
                                 repr(float(Y[r, t]))))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_COLUMNS)
            w.writerows(rows)
    _emit({"spec": spec.to_dict(), "strategies": summary, "provenance": provenance(args)}, args)
    return EXIT_OK


def _verify_reports(args, spec):
    """(report, event) pairs implied by the formula and the process."""
    fid = args.formula
    if fid in ("markov", "hoeffding-mgf"):
        raise InputError(f"{fid!r} bounds no trajectory event; use `bound` instead")
    if fid not in FORMULA_IDS:
        raise InputError(f"unknown formula_id {fid!r}")
    rs, ms = spec.range_spec(), spec.moment_spec()
    sigma2 = args.sigma2 if args.sigma2 is not None else ms.sigma2
    delta = args.delta if args.delta is not None else ms.delta
    if fid in ("thm1", "thm2"):
        if rs is None:
            raise InputError("tail bounds need a positive range bound at every step")
        sides = [args.side] if args.side else ["upper", "lower"]
        out = []
        for side in sides:
            rep = make_report(fid, eps=args.eps, B=list(rs.B),
                              side=UPPER if side == "upper" else LOWER)
            e = ev.SumUpperDev(args.eps) if side == "upper" else ev.SumLowerDev(args.eps)
            out.append((rep, e))
        return out
    if fid in ("thm3-wlln", "dcm-wlln"):
        if rs is None:
            raise InputError("bounded coverage needs a positive range bound at every step")
        return [(make_report(fid, n=spec.n, eps=args.eps, bmax=rs.b_max), ev.MeanBand(args.eps))]
    if fid == "thm4-wlln":
        rep = make_report(fid, n=spec.n, eps=args.eps, sigma2=sigma2, delta=delta)
        return [(rep, ev.MeanBand(args.eps))]
    if fid in ("thm3-slln-N", "thm4-slln-N"):
        if fid == "thm3-slln-N":
            if rs is None:
                raise InputError("the bounded threshold needs a positive range bound")
            rep = make_report(fid, eps=args.eps, bmax=rs.b_max, window=args.window)
        else:
            rep = make_report(fid, eps=args.eps, sigma2=sigma2, delta=delta, window=args.window)
        N = rep.threshold
        window = args.window if args.window is not None else spec.n - N
        if window < 0 or N + window > spec.n:
            raise InputError(f"window [N={N}, N+N'={N + max(window, 0)}] exceeds n={spec.n}")
        if args.window is None:
            rep = make_report(fid, eps=args.eps, bmax=rs.b_max if rs else None,
                              sigma2=sigma2, delta=delta, window=window)
        return [(rep, ev.WindowBand(N, window, args.eps))]
    # khr: per-step variance caps bound the increment second moments
    eps = _floats(args.eps_list) if args.eps_list else None
    if not eps:
        raise InputError("khr needs --eps-list")
    moments = _floats(args.moments) if args.moments else [s.variance_cap for s in spec.steps[: len(eps)]]
    rep = make_report("khr", moments=moments, eps_list=eps)
    return [(rep, ev.MaxBand(tuple(eps)))]


def cmd_verify(args):
    spec = load_spec(args)
    strategies = load_strategies(args, spec)
    exact = {"auto": "auto", "on": True, "off": False}[args.exact]
    records = [
        verify_bound(spec, strategies, e, rep, args.trials, args.seed, exact=exact,
                     workers=args.workers)
        for rep, e in _verify_reports(args, spec)
    ]
    if args.out:
        out = Path(args.out)
        out.write_text(records_to_csv(records))
        out.with_suffix(".json").write_text(records_to_json(records, provenance(args)["config"]) + "\n")
    verdict = "FAIL" if any(r.verdict == "FAIL" for r in records) else "PASS"
    _emit({"verdict": verdict, "records": [r.to_dict() for r in records],
           "provenance": provenance(args)}, args)
    return EXIT_OK if verdict == "PASS" else EXIT_FAIL


def cmd_example1(args):
    cfg = Example1Config(args.delta, max(args.n_grid))
    gap = example1_demonstrate_gap(cfg, args.eps, tolerance=args.tolerance,
                                   n_grid=args.n_grid, truncation=args.truncation)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EXAMPLE1_COLUMNS)
            for n in args.n_grid:
                c = example1_coverage(Example1Config(args.delta, n), args.eps)
                w.writerow([n, *(repr(p) for p in c.per_extreme), repr(c.lower)])
    _emit(dict(gap, provenance=provenance(args)), args)
    return EXIT_OK if gap["verdict"] == "PASS" else EXIT_FAIL


def _factorization(spec):
    """Upper probability of a product event: DP, brute force, and product of marginal uppers."""
    sets = []
    for step in spec.steps:
        sup = step.support
        sets.append(tuple(sup[sup >= np.median(sup)]))
    event = ev.ProductSets(tuple(sets))
    lo, hi = lower_upper_event_probability_dp(spec, event)
    product = float(np.prod([
        upper_probability(step.marginal, [lab for lab in step.marginal.space.labels if lab in s])
        for step, s in zip(spec.steps, sets)
    ]))
    out = {"check": "factorization", "dp_upper": hi, "product_of_uppers": product}
    try:
        _, bf_hi = nodewise_brute_force(spec, event)
        out["brute_force_upper"] = bf_hi
    except CapacityError:
        out["brute_force_upper"] = None
    dev = abs(hi - product)
    if out["brute_force_upper"] is not None:
        dev = max(dev, abs(out["brute_force_upper"] - hi))
    out.update(max_deviation=dev, lhs=hi, rhs=product,
               verdict="PASS" if dev <= 1e-10 else "FAIL")
    return out


def cmd_check(args):
    spec = load_spec(args)
    strategies = load_strategies(args, spec)
    eps = _floats(args.eps_list) if args.eps_list else [1.0 + 0.5 * j for j in range(spec.n)]
    results = []
    for strat in strategies:
        results.append(check_martingale_exact(spec, strat).to_dict())
        results.append(check_second_moment_identity(spec, strat).to_dict())
        results.append(check_khr_exact(spec, strat, eps[: spec.n]).to_dict())
        results.append(check_disintegrability(spec, strat, seed=args.seed).to_dict())
    if spec.all_credal:
        results.append(_factorization(spec))
    verdict = "FAIL" if any(r["verdict"] == "FAIL" for r in results) else "PASS"
    payload = {"verdict": verdict, "checks": results, "provenance": provenance(args)}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _emit(payload, args)
    return EXIT_OK if verdict == "PASS" else EXIT_FAIL


def _common(p, trials=True):
    p.add_argument("--spec", help="process spec: JSON path or one of " + ", ".join(NAMED_SPECS))
    p.add_argument("--n", type=int, help="horizon (overrides the spec)")
    p.add_argument("--strategy", help="comma-separated strategy names (default: built-ins)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    if trials:
        p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--json", action="store_true", help="pretty-print JSON on stdout")
    p.add_argument("--out", help="output path")


def build_parser():
    parser = argparse.ArgumentParser(prog="credal-lln", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="evaluate a closed-form bound")
    b.add_argument("--formula", required=True)
    b.add_argument("--n", type=int)
    b.add_argument("--eps", type=float)
    b.add_argument("--bmax", type=float)
    b.add_argument("--B", help="comma-separated per-step range bounds")
    b.add_argument("--sigma2", type=float)
    b.add_argument("--delta", type=float)
    b.add_argument("--side", choices=("upper", "lower"))
    b.add_argument("--expectation", type=float, help="upper expectation for markov")
    b.add_argument("--s", type=float)
    b.add_argument("--a", type=float)
    b.add_argument("--b", type=float)
    b.add_argument("--moments", help="comma-separated increment second moments (khr)")
    b.add_argument("--eps-list", help="comma-separated non-decreasing epsilons (khr)")
    b.add_argument("--window", type=int)
    b.add_argument("--json", action="store_true")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bound)

    s = sub.add_parser("simulate", help="sample trajectories and the martingale Y")
    _common(s)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="check a bound against simulation and exact oracles")
    _common(v)
    v.add_argument("--formula", required=True)
    v.add_argument("--eps", type=float)
    v.add_argument("--side", choices=("upper", "lower"))
    v.add_argument("--sigma2", type=float)
    v.add_argument("--delta", type=float)
    v.add_argument("--window", type=int)
    v.add_argument("--eps-list")
    v.add_argument("--moments")
    v.add_argument("--exact", choices=("auto", "on", "off"), default="auto")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("example1", help="coverage of the three-process counterexample")
    e.add_argument("--delta", type=float, default=0.3)
    e.add_argument("--eps", "--epsilon", type=float, default=0.1, dest="eps")
    e.add_argument("--n-grid", type=_ints, default=[10, 100, 1000, 10_000])
    e.add_argument("--tolerance", type=float, default=0.005)
    e.add_argument("--truncation", type=int, default=6)
    e.add_argument("--json", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_example1)

    c = sub.add_parser("check", help="exact martingale and factorization checks on a small spec")
    _common(c, trials=False)
    c.add_argument("--eps-list")
    c.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CredalError, ValueError, KeyError) as exc:
        print(f"credal-lln: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

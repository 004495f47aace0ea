"""Check a closed-form bound against simulated and exact event probabilities."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

from scipy.stats import binomtest

from .. import __version__, kernels
from ..bounds import BoundReport
from ..config import node_cap
from ..errors import CapacityError, InputError
from . import events as ev
from .exact import exact_event_probability, lower_upper_event_probability_dp
from .sampling import simulate

CONFIDENCE = 0.99
EXACT_TOL = 1e-12

CSV_COLUMNS = (
    "formula_id", "event", "strategy", "side", "bound", "trials", "seed", "hits",
    "frequency", "ci_low", "ci_high", "verdict", "exact", "exact_verdict",
    "dp_lower", "dp_upper", "dp_verdict",
)

PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"


def clopper_pearson(hits, trials, confidence=CONFIDENCE):
    ci = binomtest(int(hits), int(trials)).proportion_ci(confidence, method="exact")
    return float(ci.low), float(ci.high)


def _same(a, b):
    return math.isclose(float(a), float(b), rel_tol=1e-12, abs_tol=1e-15)


def event_matches(event, report, n):
    """Raise InputError unless ``event`` is the event ``report`` bounds."""
    fid, inp = report.formula_id, report.inputs

    def fail(why):
        raise InputError(f"event {event.name} does not match formula {fid!r}: {why}")

    if fid in ("thm1", "thm2"):
        want = ev.SumUpperDev if report.side == "upper-deviation" else ev.SumLowerDev
        if not isinstance(event, want):
            fail(f"expected {want.__name__}")
        if inp["n"] != n:
            fail(f"bound is for n={inp['n']}, process has n={n}")
        if not _same(event.eps, inp["epsilon"]):
            fail("epsilon differs")
    elif fid in ("thm3-wlln", "dcm-wlln", "thm4-wlln"):
        if not isinstance(event, ev.MeanBand):
            fail("expected MeanBand")
        if inp["n"] != n:
            fail(f"bound is for n={inp['n']}, process has n={n}")
        if not _same(event.eps, inp["epsilon"]):
            fail("epsilon differs")
    elif fid in ("thm3-slln-N", "thm4-slln-N"):
        if not isinstance(event, ev.WindowBand):
            fail("expected WindowBand")
        if event.N != report.threshold:
            fail(f"window must start at the threshold N={report.threshold}")
        if "window" in inp and inp["window"] != event.Nprime:
            fail("window length differs")
        if not _same(event.eps, inp["epsilon"]):
            fail("epsilon differs")
    elif fid == "khr":
        if not isinstance(event, ev.MaxBand):
            fail("expected MaxBand")
        if len(event.eps) != len(inp["epsilons"]) or not all(
            _same(a, b) for a, b in zip(event.eps, inp["epsilons"])
        ):
            fail("epsilons differ")
    else:
        fail("this formula bounds no trajectory event")


def _judge(value, bound, tail, tol=0.0):
    if tail:
        return PASS if value <= bound + tol else FAIL
    return PASS if value >= bound - tol else FAIL


@dataclass
class StrategyResult:
    strategy: str
    hits: int
    trials: int
    frequency: float
    ci_low: float
    ci_high: float
    verdict: str
    exact: float | None = None
    exact_verdict: str = SKIPPED


@dataclass
class VerificationRecord:
    report: BoundReport
    event: dict
    seed: int
    trials: int
    results: list = field(default_factory=list)
    dp_lower: float | None = None
    dp_upper: float | None = None
    dp_verdict: str = SKIPPED
    spec: dict | None = None

    @property
    def verdict(self):
        verdicts = [r.verdict for r in self.results] + [r.exact_verdict for r in self.results]
        verdicts.append(self.dp_verdict)
        return FAIL if FAIL in verdicts else PASS

    @property
    def worst(self):
        """The strategy closest to (or furthest past) the bound."""
        if not self.results:
            return None
        if self.report.is_tail:
            return max(self.results, key=lambda r: r.ci_high)
        return min(self.results, key=lambda r: r.ci_low)

    def rows(self):
        for r in self.results:
            yield {
                "formula_id": self.report.formula_id,
                "event": self.event["event"],
                "strategy": r.strategy,
                "side": self.report.side,
                "bound": self.report.value,
                "trials": r.trials,
                "seed": self.seed,
                "hits": r.hits,
                "frequency": r.frequency,
                "ci_low": r.ci_low,
                "ci_high": r.ci_high,
                "verdict": r.verdict,
                "exact": r.exact,
                "exact_verdict": r.exact_verdict,
                "dp_lower": self.dp_lower,
                "dp_upper": self.dp_upper,
                "dp_verdict": self.dp_verdict,
            }

    def to_dict(self):
        worst = self.worst
        return {
            "report": self.report.to_dict(),
            "event": self.event,
            "seed": self.seed,
            "trials": self.trials,
            "verdict": self.verdict,
            "worst_strategy": None if worst is None else worst.strategy,
            "results": [asdict(r) for r in self.results],
            "dp": {"lower": self.dp_lower, "upper": self.dp_upper, "verdict": self.dp_verdict},
            "spec": self.spec,
            "provenance": provenance({"seed": self.seed, "trials": self.trials}),
        }


def provenance(config):
    return {"package": "credal_lln", "version": __version__,
            "generator": kernels.GENERATOR, "config": config}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        for row in rec.rows():
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def records_to_json(records, config=None):
    return json.dumps(
        {"records": [r.to_dict() for r in records], "provenance": provenance(config or {})},
        indent=2, sort_keys=True,
    )


def _tree_estimate(spec):
    size = 1
    for step in spec.steps:
        values, probs = step.menu(None)
        size *= probs.shape[1]
    return size


def verify_bound(spec, strategies, event, report, trials, seed, exact="auto", cap=None, workers=1):
    """Monte Carlo frequency with a 99% exact binomial CI per strategy.

    Tail bounds PASS when the CI's upper end is at most the bound; coverage
    bounds PASS when its lower end is at least the bound. With ``exact`` set
    (or "auto" and a tree under the node cap) the exact event probability of
    each strategy and, for credal processes, the backward-induction
    lower/upper probabilities are compared as well.
    """
    event_matches(event, report, spec.n)
    tail = report.is_tail
    if tail != (event.kind == ev.TAIL):
        raise InputError("bound side and event kind disagree")
    cap = node_cap(cap)
    run_exact = exact is True or (exact == "auto" and _tree_estimate(spec) <= cap)
    record = VerificationRecord(report, event.to_dict(), int(seed), int(trials), spec=spec.to_dict())
    for strat in strategies:
        res = simulate(spec, strat, trials, seed, events=(event,), workers=workers)
        hits = res.hits[0]
        lo, hi = clopper_pearson(hits, trials)
        verdict = _judge(hi if tail else lo, report.value, tail)
        row = StrategyResult(strat.name, hits, int(trials), hits / trials, lo, hi, verdict)
        if run_exact:
            try:
                p = exact_event_probability(spec, strat, event, cap=cap)
            except CapacityError:
                pass
            else:
                row.exact = p
                row.exact_verdict = _judge(p, report.value, tail, EXACT_TOL)
        record.results.append(row)
    if run_exact and spec.all_credal and not event.uses_martingale:
        try:
            dlo, dhi = lower_upper_event_probability_dp(spec, event, cap=cap)
        except CapacityError:
            pass
        else:
            record.dp_lower, record.dp_upper = dlo, dhi
            record.dp_verdict = _judge(dhi if tail else dlo, report.value, tail, EXACT_TOL)
            for row in record.results:
                if row.exact is not None and not (dlo - 1e-10 <= row.exact <= dhi + 1e-10):
                    row.exact_verdict = FAIL
    return record

"""A credal set of three binary processes on which weak irrelevance holds but the
empirical mean does not concentrate on the mean band.

With 0 < delta < 1 the three processes are:

* P1: all ones;
* P2: all zeros with probability delta, otherwise all ones;
* P3: i.i.d. Bernoulli(1 - delta).

Every marginal has P(X_i = 1) in [1 - delta, 1], and conditioning on any event
of positive lower probability keeps that range. Yet P2 puts mass delta on the
all-zeros path, so the lower probability of the band around [1 - delta, 1]
tends to 1 - delta rather than 1. Sequences are truncated to a horizon n.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import binom

from .credal import CredalSet, ConditioningPolicy, check_weak_irrelevance, conditional_range
from .errors import InputError
from .process.spec import StepChoice, binary_credal_spec
from .process.strategies import Strategy


@dataclass(frozen=True)
class Example1Config:
    delta: float
    n: int
    weights: tuple = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self):
        d = float(self.delta)
        if not 0.0 < d < 1.0:
            raise InputError("delta must lie in (0, 1)")
        if int(self.n) != self.n or self.n < 1:
            raise InputError("n must be an integer >= 1")
        w = tuple(float(x) for x in self.weights)
        if len(w) != 3 or any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
            raise InputError("weights must be three non-negative numbers summing to 1")
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "weights", w)


_ONE = np.array([[0.0, 1.0]])


class _AllOnes(Strategy):
    name = "P1"

    def choose(self, t, history, total, spec):
        return StepChoice(_ONE, (0.0, 1.0))


class _SharedFirst(Strategy):
    """First draw is Bernoulli(1 - delta); every later draw repeats it."""

    name = "P2"

    def __init__(self, delta):
        self.delta = delta

    def choose(self, t, history, total, spec):
        if t == 0:
            return StepChoice([[self.delta, 1.0 - self.delta]], (0.0, 1.0))
        rows = np.array([[1.0, 0.0], [0.0, 1.0]])
        # on this process the running sum is 0 exactly when the first draw was 0
        return StepChoice(rows, (0.0, 1.0), np.where(total > 0, 1, 0))


class _Iid(Strategy):
    name = "P3"

    def __init__(self, delta):
        self.delta = delta

    def choose(self, t, history, total, spec):
        return StepChoice([[self.delta, 1.0 - self.delta]], (0.0, 1.0))


class Example1Mixture(Strategy):
    """The mixture w1 P1 + w2 P2 + w3 P3 written as a sequential rule.

    The next-step probability is the posterior-weighted average of the three
    processes' predictions; the posterior depends on the history only through
    its length and sum.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        self.name = "MIX(" + ",".join(repr(w) for w in cfg.weights) + ")"

    def choose(self, t, history, total, spec):
        d = self.cfg.delta
        w1, w2, w3 = self.cfg.weights
        ones = total == t
        zeros = total == 0
        if t == 0:
            p2 = np.ones_like(total)
        else:
            p2 = np.where(zeros, d, 0.0) + np.where(ones, 1.0 - d, 0.0)
        lik = np.stack([
            w1 * ones.astype(float),
            w2 * p2,
            w3 * (1.0 - d) ** total * d ** (t - total),
        ])
        post = lik / lik.sum(axis=0)
        pred2 = np.where(t == 0, 1.0 - d, np.where(ones, 1.0, 0.0))
        p_one = post[0] + post[1] * pred2 + post[2] * (1.0 - d)
        keys, pick = np.unique(p_one, return_inverse=True)
        return StepChoice(np.stack([1.0 - keys, keys], axis=1), (0.0, 1.0), pick.reshape(-1))


@dataclass(frozen=True, eq=False)
class Example1Processes:
    spec: object
    extremes: tuple
    mixture: Strategy


def example1_extremes(cfg):
    """Sampleable versions of P1, P2, P3 and of their cfg.weights mixture.

    The step constraint is the full simplex on {0, 1}: the three processes are
    not forward irrelevant with respect to their own marginal band.
    """
    spec = binary_credal_spec(cfg.n, [[1.0, 0.0], [0.0, 1.0]])
    return Example1Processes(
        spec, (_AllOnes(), _SharedFirst(cfg.delta), _Iid(cfg.delta)), Example1Mixture(cfg)
    )


def example1_joint(cfg):
    """The truncated credal set: three extremes over {0,1}^n with tuple labels."""
    if cfg.n > 16:
        raise InputError("the joint is enumerated explicitly; keep n <= 16")
    d, n = cfg.delta, cfg.n
    labels = list(itertools.product((0, 1), repeat=n))
    ones = np.array([sum(lab) for lab in labels])
    p1 = (ones == n).astype(float)
    p2 = np.where(ones == n, 1.0 - d, 0.0) + np.where(ones == 0, d, 0.0)
    p3 = (1.0 - d) ** ones * d ** (n - ones)
    return CredalSet.from_extremes(labels, np.vstack([p1, p2, p3]))


@dataclass(frozen=True)
class Example1Coverage:
    n: int
    epsilon: float
    per_extreme: tuple
    lower: float

    @property
    def minimiser(self):
        return 1 + int(np.argmin(self.per_extreme))


def _decimal(x):
    return Fraction(repr(float(x)))


def example1_coverage(cfg, epsilon, enforce_hypothesis=True):
    """Exact P_j(1 - delta - eps <= mean <= 1 + eps) for j = 1, 2, 3, and their minimum.

    The hull minimum sits at an extreme because probability is linear in P.
    ``enforce_hypothesis`` rejects eps outside (0, 1 - delta); turn it off to
    evaluate wider bands.
    """
    eps = float(epsilon)
    d, n = cfg.delta, cfg.n
    if not eps > 0 or not math.isfinite(eps):
        raise InputError("epsilon must be positive")
    if enforce_hypothesis and not eps < 1.0 - d:
        raise InputError(f"epsilon must lie in (0, 1 - delta) = (0, {1 - d!r})")
    # smallest admissible count of ones: ceil(n (1 - delta - eps)), in exact arithmetic
    need = max(0, math.ceil(n * (1 - _decimal(d) - _decimal(eps))))
    p1 = 1.0
    p2 = 1.0 if need == 0 else 1.0 - d
    p3 = float(binom.sf(need - 1, n, 1.0 - d))
    per = (p1, p2, p3)
    return Example1Coverage(n, eps, per, min(per))


def example1_demonstrate_gap(cfg, epsilon, tolerance=0.005, n_grid=None, truncation=6):
    """Conditional check on a finite truncation plus the coverage limit.

    Part (a) is a finite surrogate for the infinite-sequence statement: on the
    truncation to ``truncation`` coordinates, every event with positive lower
    probability leaves P(X_i = 1 | event) inside [1 - delta, 1]. Part (b)
    evaluates the lower coverage along ``n_grid`` and checks that it settles
    at 1 - delta, at least delta/2 away from 1.
    """
    d = cfg.delta
    small = Example1Config(d, truncation, cfg.weights)
    joint = example1_joint(small)
    strict = ConditioningPolicy.STRICT_POSITIVE_LOWER
    indicator = (0.0, 1.0)
    ranges = {}
    ok_a = True
    for i in range(2, truncation + 1):
        lo, hi = conditional_range(joint, i, indicator, strict)
        ranges[i] = (lo, hi)
        ok_a &= (1.0 - d) - 1e-12 <= lo and hi <= 1.0 + 1e-12
    weak = check_weak_irrelevance(joint, 2, strict)
    contrast = check_weak_irrelevance(joint, 2, ConditioningPolicy.REGULAR_EXTENSION)

    grid = tuple(n_grid or (10, 100, 1000, 10_000))
    seq = [example1_coverage(Example1Config(d, m, cfg.weights), epsilon) for m in grid]
    last = seq[-1].lower
    ok_b = abs(last - (1.0 - d)) <= tolerance and 1.0 - last >= d / 2
    return {
        "delta": d,
        "epsilon": float(epsilon),
        "truncation": truncation,
        "surrogate": "finite truncation of the infinite-sequence statement",
        "conditional_ranges": {str(i): list(r) for i, r in ranges.items()},
        "part_a": "PASS" if ok_a and weak.passed else "FAIL",
        "weak_irrelevance_strict": weak.to_dict(),
        "weak_irrelevance_regular": contrast.to_dict(),
        "coverage": [
            {"n": c.n, "P1": c.per_extreme[0], "P2": c.per_extreme[1],
             "P3": c.per_extreme[2], "lower": c.lower}
            for c in seq
        ],
        "limit": 1.0 - d,
        "part_b": "PASS" if ok_b else "FAIL",
        "verdict": "PASS" if ok_a and weak.passed and ok_b else "FAIL",
    }

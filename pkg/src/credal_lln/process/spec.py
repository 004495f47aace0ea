"""Step constraints and process specifications.

A process is a sequence of n steps. Each step constrains the conditional
distribution of X_i given any history: either it must lie in a marginal credal
set (CREDAL) or it must have its mean inside ``[mean_lower, mean_upper]`` and
variance at most ``variance_cap`` (MOMENT). A strategy picks one admissible
distribution per history; every such choice is a forward-irrelevant process.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from ..bounds import MeanBand, MomentSpec, RangeSpec
from ..credal import CredalSet, lower_expectation, upper_expectation
from ..errors import InputError

#: slack for mean, variance and hull-membership checks on emitted distributions
CHECK_TOL = 1e-9

GAUSSIAN_GRID = 21
GAUSSIAN_SPAN = 4.0


@dataclass(frozen=True, eq=False)
class StepChoice:
    """Candidate distributions for one step and the row each trial uses.

    ``probs`` is (m, k); ``values`` is (k,) shared by every row or (m, k).
    ``pick`` holds one row index per trial/node, or None when m == 1.
    ``by_construction`` marks rows built as explicit mixtures of the step's
    credal extremes, which skips the hull-membership solve.
    """

    probs: np.ndarray
    values: np.ndarray
    pick: np.ndarray | None = None
    by_construction: bool = False

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float, ndmin=2)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            if values.shape[0] != probs.shape[1]:
                raise InputError("values and probabilities disagree in length")
        elif values.shape != probs.shape:
            raise InputError("per-row values must match the probability matrix")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "values", values)
        if self.pick is not None:
            object.__setattr__(self, "pick", np.asarray(self.pick, dtype=np.int64))
        elif probs.shape[0] != 1:
            raise InputError("several candidate rows need a pick array")

    @property
    def rows(self):
        return self.probs.shape[0]

    def row_values(self):
        if self.values.ndim == 1:
            return np.broadcast_to(self.values, self.probs.shape)
        return self.values

    def means(self):
        return np.einsum("mk,mk->m", self.row_values(), self.probs)

    def picks(self, count):
        if self.pick is None:
            return np.zeros(count, dtype=np.int64)
        return self.pick


def _cdf(probs):
    """Row-wise CDFs with every entry from the last positive weight on pinned to 1."""
    c = np.cumsum(probs, axis=1)
    c /= c[:, -1:]
    last = probs.shape[1] - 1 - np.argmax((probs > 0)[:, ::-1], axis=1)
    cols = np.arange(probs.shape[1])[None, :]
    c[cols >= last[:, None]] = 1.0
    return np.ascontiguousarray(c)


@dataclass(frozen=True, eq=False)
class CredalStep:
    marginal: CredalSet
    range_bound: float | None = None
    kind: str = field(default="credal", init=False)

    def __post_init__(self):
        if not self.marginal.space.is_numeric():
            raise InputError("a CREDAL step needs real-valued outcome labels")
        if self.range_bound is not None:
            b = float(self.range_bound)
            if not math.isfinite(b) or b < 0:
                raise InputError("range_bound must be finite and non-negative")
            if b + CHECK_TOL < np.ptp(self.support):
                raise InputError("range_bound is smaller than the support's range")
            object.__setattr__(self, "range_bound", b)

    @functools.cached_property
    def support(self):
        return self.marginal.space.values()

    @property
    def lower_mean(self):
        return lower_expectation(self.marginal, self.support)

    @property
    def upper_mean(self):
        return upper_expectation(self.marginal, self.support)

    @property
    def B(self):
        if self.range_bound is not None:
            return self.range_bound
        return float(np.ptp(self.support))

    @property
    def variance_cap(self):
        # Popoviciu: any distribution on a range of width B has variance <= B^2/4
        return self.B**2 / 4.0

    @property
    def delta(self):
        return self.upper_mean - self.lower_mean

    def menu(self, family=None):
        """(values, probs): the extremes of the marginal credal set."""
        return self.support, self.marginal.extremes

    def mixture(self, weights):
        w = np.asarray(weights, dtype=float)
        if w.shape[-1] != self.marginal.m or np.any(w < 0):
            raise InputError(
                f"mixture weights need {self.marginal.m} non-negative entries"
            )
        if np.any(np.abs(w.sum(axis=-1) - 1.0) > CHECK_TOL):
            raise InputError("mixture weights must sum to 1")
        return w @ self.marginal.extremes

    def point_row(self, value):
        hits = np.flatnonzero(self.support == value)
        if hits.size == 0:
            raise InputError(f"{value!r} is not in the step support")
        row = np.zeros(self.support.size)
        row[hits[0]] = 1.0
        return self.support, row[None, :]

    def row_violation(self, values, probs, by_construction=False):
        """Why (values, probs) is inadmissible, or None when it is fine."""
        if values.shape != self.support.shape or not np.array_equal(values, self.support):
            return "values differ from the step support"
        if np.any(probs < -CHECK_TOL) or abs(probs.sum() - 1.0) > CHECK_TOL:
            return "not a probability vector"
        if by_construction:
            return None
        ext = self.marginal.extremes
        if np.any(np.all(np.abs(ext - probs) <= 1e-15, axis=1)):
            return None
        A = np.vstack([ext.T, np.ones(ext.shape[0])])
        b = np.append(probs, 1.0)
        _, resid = nnls(A, b)
        if resid > CHECK_TOL:
            return f"outside the marginal credal set (residual {resid:.3g})"
        return None

    def to_dict(self):
        out = {"type": "credal", **self.marginal.to_dict()}
        if self.range_bound is not None:
            out["range_bound"] = self.range_bound
        return out


MOMENT_FAMILIES = ("two-point", "gaussian")


@dataclass(frozen=True, eq=False)
class MomentStep:
    """Mean band and variance cap, with finite-support distributions for sampling.

    ``support`` fixes the atoms; otherwise ``family`` names the default
    moment-matched family used by the built-in strategies.
    """

    mean_lower: float
    mean_upper: float
    variance_cap: float
    support: tuple | None = None
    family: str = "two-point"
    range_bound: float | None = None
    delta: float | None = None
    kind: str = field(default="moment", init=False)

    def __post_init__(self):
        lo, hi, cap = float(self.mean_lower), float(self.mean_upper), float(self.variance_cap)
        if not all(math.isfinite(v) for v in (lo, hi, cap)):
            raise InputError("moment constraints must be finite")
        if lo > hi:
            raise InputError("mean_lower must not exceed mean_upper")
        if cap < 0:
            raise InputError("variance_cap must be non-negative")
        delta = hi - lo if self.delta is None else float(self.delta)
        if hi - lo > delta + CHECK_TOL:
            raise InputError("mean interval is wider than the declared delta")
        if self.family not in MOMENT_FAMILIES:
            raise InputError(f"unknown moment family {self.family!r}")
        object.__setattr__(self, "mean_lower", lo)
        object.__setattr__(self, "mean_upper", hi)
        object.__setattr__(self, "variance_cap", cap)
        object.__setattr__(self, "delta", delta)
        if self.support is not None:
            sup = tuple(sorted(float(v) for v in self.support))
            if len(set(sup)) != len(sup) or not sup:
                raise InputError("a fixed support needs distinct atoms")
            if sup[0] > lo or sup[-1] < hi:
                raise InputError("the fixed support cannot reach the mean band")
            object.__setattr__(self, "support", sup)
        if self.range_bound is not None:
            object.__setattr__(self, "range_bound", float(self.range_bound))

    @property
    def lower_mean(self):
        return self.mean_lower

    @property
    def upper_mean(self):
        return self.mean_upper

    @property
    def B(self):
        if self.range_bound is not None:
            return self.range_bound
        if self.support is not None:
            return self.support[-1] - self.support[0]
        return None

    def _spread(self):
        s = math.sqrt(self.variance_cap)
        if self.range_bound is not None:
            s = min(s, self.range_bound / 2.0)
        return s

    def distribution(self, mean, family=None, scale=1.0):
        """Admissible (values, probs) with the given mean.

        ``scale`` in [0, 1] shrinks the spread (variance ``scale**2`` times the
        largest allowed).
        """
        family = family or self.family
        if self.support is not None:
            return self._fixed_support(mean)
        s = self._spread() * scale
        if family == "two-point":
            return np.array([mean - s, mean + s]), np.array([0.5, 0.5])
        if family == "gaussian":
            z, w = _standard_grid()
            if self.range_bound is not None:
                s = min(s, self.range_bound / np.ptp(z))
            return mean + s * z, w
        raise InputError(f"unknown moment family {family!r}")

    def _fixed_support(self, mean):
        sup = np.asarray(self.support)
        probs = np.zeros(sup.size)
        j = int(np.searchsorted(sup, mean))
        if j < sup.size and abs(sup[j] - mean) <= 1e-15:
            probs[j] = 1.0
        else:
            a, b = sup[j - 1], sup[j]
            probs[j] = (mean - a) / (b - a)
            probs[j - 1] = 1.0 - probs[j]
            if (mean - a) * (b - mean) > self.variance_cap + CHECK_TOL:
                raise InputError(
                    "the fixed support cannot realise this mean within the variance cap"
                )
        return sup.copy(), probs

    def menu(self, family=None):
        """Rows for the upper mean (row 0) and the lower mean (row 1)."""
        v_hi, p_hi = self.distribution(self.mean_upper, family)
        v_lo, p_lo = self.distribution(self.mean_lower, family)
        return np.vstack([v_hi, v_lo]), np.vstack([p_hi, p_lo])

    def point_row(self, value):
        return np.array([float(value)]), np.array([[1.0]])

    def row_violation(self, values, probs, by_construction=False):
        if np.any(probs < -CHECK_TOL) or abs(probs.sum() - 1.0) > CHECK_TOL:
            return "not a probability vector"
        mean = float(values @ probs)
        if mean < self.mean_lower - CHECK_TOL or mean > self.mean_upper + CHECK_TOL:
            return f"mean {mean!r} outside [{self.mean_lower}, {self.mean_upper}]"
        var = float(((values - mean) ** 2) @ probs)
        if var > self.variance_cap + CHECK_TOL * max(1.0, self.variance_cap):
            return f"variance {var!r} exceeds the cap {self.variance_cap}"
        used = values[probs > 0]
        if self.support is not None and not np.all(np.isin(used, self.support)):
            return "atoms outside the fixed support"
        if self.range_bound is not None and np.ptp(used) > self.range_bound + CHECK_TOL:
            return "atoms span more than the range bound"
        return None

    def to_dict(self):
        return {
            "type": "moment",
            "mean_lower": self.mean_lower,
            "mean_upper": self.mean_upper,
            "variance_cap": self.variance_cap,
            "support": None if self.support is None else list(self.support),
            "family": self.family,
            "range_bound": self.range_bound,
            "delta": self.delta,
        }


@functools.lru_cache(maxsize=None)
def _standard_grid():
    """Discretised standard normal: symmetric grid, exact mean 0 and variance 1."""
    z = np.linspace(-GAUSSIAN_SPAN, GAUSSIAN_SPAN, GAUSSIAN_GRID)
    w = np.exp(-0.5 * z * z)
    w /= w.sum()
    z = z - z @ w
    z /= math.sqrt((z * z) @ w)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def step_from_dict(data):
    kind = data.get("type", "credal")
    if kind == "credal":
        return CredalStep(CredalSet.from_dict(data), data.get("range_bound"))
    if kind == "moment":
        return MomentStep(
            data["mean_lower"],
            data["mean_upper"],
            data["variance_cap"],
            support=data.get("support"),
            family=data.get("family", "two-point"),
            range_bound=data.get("range_bound"),
            delta=data.get("delta"),
        )
    raise InputError(f"unknown step type {kind!r}")


@dataclass(frozen=True, eq=False)
class ProcessSpec:
    steps: tuple

    def __post_init__(self):
        steps = tuple(self.steps)
        if not steps:
            raise InputError("a process needs at least one step")
        for s in steps:
            if not isinstance(s, (CredalStep, MomentStep)):
                raise InputError(f"unsupported step constraint {s!r}")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def homogeneous(cls, step, n):
        if int(n) != n or n < 1:
            raise InputError("horizon n must be an integer >= 1")
        return cls((step,) * int(n))

    @property
    def n(self):
        return len(self.steps)

    @functools.cached_property
    def lower_means(self):
        return np.array([s.lower_mean for s in self.steps])

    @functools.cached_property
    def upper_means(self):
        return np.array([s.upper_mean for s in self.steps])

    @functools.cached_property
    def cum_lower(self):
        return np.concatenate([[0.0], np.cumsum(self.lower_means)])

    @functools.cached_property
    def cum_upper(self):
        return np.concatenate([[0.0], np.cumsum(self.upper_means)])

    @property
    def all_credal(self):
        return all(s.kind == "credal" for s in self.steps)

    def mean_band(self):
        return MeanBand(float(self.lower_means.mean()), float(self.upper_means.mean()))

    def range_spec(self):
        """RangeSpec of the B_i, or None when some step has no positive range bound."""
        bs = [s.B for s in self.steps]
        if any(b is None or b <= 0 for b in bs):
            return None
        return RangeSpec(tuple(bs))

    def moment_spec(self):
        sigma2 = max(s.variance_cap for s in self.steps)
        delta = max(s.delta for s in self.steps)
        return MomentSpec(sigma2, delta)

    def to_dict(self):
        first = self.steps[0]
        if all(s is first for s in self.steps):
            return {"n": self.n, "step": first.to_dict()}
        return {"n": self.n, "steps": [s.to_dict() for s in self.steps]}

    @classmethod
    def from_dict(cls, data):
        if "step" in data:
            if "n" not in data:
                raise InputError("a homogeneous spec needs n")
            return cls.homogeneous(step_from_dict(data["step"]), data["n"])
        if "steps" in data:
            steps = [step_from_dict(s) for s in data["steps"]]
            n = data.get("n", len(steps))
            if len(steps) == 1 and n > 1:
                return cls.homogeneous(steps[0], n)
            if len(steps) != n:
                raise InputError("number of steps disagrees with n")
            return cls(tuple(steps))
        raise InputError("process spec needs 'step' or 'steps'")


def binary_credal_spec(n, extremes, support=(0, 1)):
    """Homogeneous process with the same marginal credal set at every step."""
    return ProcessSpec.homogeneous(
        CredalStep(CredalSet.from_extremes(support, extremes)), n
    )

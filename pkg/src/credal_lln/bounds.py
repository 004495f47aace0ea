"""Closed-form concentration bounds, coverage bounds and sample-size thresholds.

Conventions
-----------
Tail bounds (``thm1``, ``thm2``) take ``epsilon`` as a deviation of the *sum*
``sum_i (X_i - E-upper[X_i])``. Coverage bounds (``thm3-wlln``, ``dcm-wlln``,
``thm4-wlln``) take ``epsilon`` as a deviation of the *empirical mean*; the
two are related by substituting ``n * epsilon`` for the sum deviation.
Every reported probability is clamped to [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InputError

FORMULA_IDS = (
    "thm1",
    "thm2",
    "thm3-wlln",
    "dcm-wlln",
    "thm3-slln-N",
    "thm4-wlln",
    "thm4-slln-N",
    "markov",
    "hoeffding-mgf",
    "khr",
)

UPPER = "upper-deviation"
LOWER = "lower-deviation"
COVERAGE = "two-sided-coverage"


def _clamp(x):
    return min(1.0, max(0.0, float(x)))


def _positive(name, value):
    if not (isinstance(value, (int, float)) or np.isscalar(value)) or not math.isfinite(value):
        raise InputError(f"{name} must be a finite real, got {value!r}")
    if value <= 0:
        raise InputError(f"{name} must be > 0, got {value!r}")
    return float(value)


def _horizon(n):
    if int(n) != n or n < 1:
        raise InputError(f"n must be an integer >= 1, got {n!r}")
    return int(n)


def _exact(x):
    """Exact rational for a float, read through its shortest decimal form."""
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class RangeSpec:
    """Range bounds ``B_i >= sup X_i - inf X_i`` for each of the n variables."""

    B: tuple

    def __post_init__(self):
        b = tuple(float(v) for v in np.atleast_1d(self.B))
        if not b:
            raise InputError("RangeSpec needs at least one B_i")
        if any(not math.isfinite(v) or v <= 0 for v in b):
            raise InputError("every B_i must be a finite positive real")
        object.__setattr__(self, "B", b)

    @classmethod
    def uniform(cls, n, b):
        return cls((float(b),) * _horizon(n))

    @property
    def n(self):
        return len(self.B)

    @property
    def gamma_n(self):
        return math.fsum(v * v for v in self.B)

    @property
    def b_max(self):
        return max(self.B)


@dataclass(frozen=True)
class MomentSpec:
    """Variance cap ``sigma2`` and mean-interval width cap ``delta``."""

    sigma2: float
    delta: float

    def __post_init__(self):
        for name in ("sigma2", "delta"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise InputError(f"{name} must be finite and non-negative")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class MeanBand:
    mu_lower_n: float
    mu_upper_n: float

    def __post_init__(self):
        if self.mu_lower_n > self.mu_upper_n:
            raise InputError("mu_lower_n must not exceed mu_upper_n")


@dataclass(frozen=True)
class BoundReport:
    formula_id: str
    inputs: dict
    value: float
    side: str
    threshold: int | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "formula_id": self.formula_id,
            "inputs": dict(self.inputs),
            "value": self.value,
            "side": self.side,
        }
        if self.threshold is not None:
            out["threshold"] = self.threshold
        if self.extras:
            out["extras"] = dict(self.extras)
        return out

    @property
    def is_tail(self):
        return self.side in (UPPER, LOWER)


def _as_range(r, n=None):
    if isinstance(r, RangeSpec):
        return r
    if n is None:
        return RangeSpec((float(r),))
    return RangeSpec.uniform(n, r)


def _tail_report(formula_id, epsilon, r, side):
    eps = _positive("epsilon", epsilon)
    r = _as_range(r)
    if side not in (UPPER, LOWER):
        raise InputError(f"tail side must be {UPPER!r} or {LOWER!r}")
    value = _clamp(math.exp(-2.0 * eps * eps / r.gamma_n))
    return BoundReport(
        formula_id,
        {"epsilon": eps, "n": r.n, "gamma_n": r.gamma_n, "B": list(r.B)},
        value,
        side,
    )


def hoeffding_tail(epsilon, r, side=UPPER):
    """Upper probability that the summed deviation from E-upper reaches epsilon.

    Valid under epistemic irrelevance (through the product factorisation);
    the same number bounds the lower tail ``sum (X_i - E-lower) <= -epsilon``.
    """
    return _tail_report("thm1", epsilon, r, side)


def azuma_tail(epsilon, r, side=UPPER):
    """Same closed form as :func:`hoeffding_tail`, under weak irrelevance and disintegrability."""
    return _tail_report("thm2", epsilon, r, side)


def _coverage_inputs(n, epsilon, r):
    n = _horizon(n)
    eps = _positive("epsilon", epsilon)
    b = r.b_max if isinstance(r, RangeSpec) else _positive("B_max", r)
    return n, eps, b


def wlln_coverage_bounded(n, epsilon, r):
    """Lower probability that the empirical mean stays in the epsilon-widened band."""
    n, eps, b = _coverage_inputs(n, epsilon, r)
    value = _clamp(1.0 - 2.0 * math.exp(-2.0 * n * eps * eps / (b * b)))
    return BoundReport("thm3-wlln", {"n": n, "epsilon": eps, "B_max": b}, value, COVERAGE)


def dcm_coverage_bounded(n, epsilon, r):
    """The older, looser coverage bound with exponent ``(n eps^2 / 4) / B^2``."""
    n, eps, b = _coverage_inputs(n, epsilon, r)
    value = _clamp(1.0 - 2.0 * math.exp(-(n * eps * eps / 4.0) / (b * b)))
    return BoundReport("dcm-wlln", {"n": n, "epsilon": eps, "B_max": b}, value, COVERAGE)


def bounded_window_tail(N, epsilon, b_max):
    """Geometric-series bound on a one-sided excursion anywhere in ``[N, N+N']``.

    Independent of ``N'``; this is the quantity the threshold makes ``< epsilon``.
    """
    N = _horizon(N)
    eps = _positive("epsilon", epsilon)
    b = _positive("B_max", b_max)
    a = 2.0 * eps * eps / (b * b)
    return math.exp(-N * a) / -math.expm1(-a)


def slln_threshold_bounded(epsilon, b_max):
    """Smallest positive integer N with ``N > -(B^2/(2 eps^2)) ln(eps (1 - e^{-2 eps^2/B^2}))``.

    For ``epsilon >= 1`` the excursion statement is vacuous and 1 is returned;
    :func:`slln_threshold_bounded_report` flags that case.
    """
    eps = _positive("epsilon", epsilon)
    b = _positive("B_max", b_max)
    if eps >= 1.0:
        return 1
    a = 2.0 * eps * eps / (b * b)
    rhs = -math.log(eps * -math.expm1(-a)) / a
    return max(1, math.floor(rhs) + 1)


def slln_threshold_bounded_report(epsilon, b_max, window=None):
    eps = _positive("epsilon", epsilon)
    b = _positive("B_max", b_max)
    N = slln_threshold_bounded(eps, b)
    vacuous = eps >= 1.0
    tail = bounded_window_tail(N, eps, b)
    extras = {"per_tail_excursion_bound": tail, "display_coverage": _clamp(1.0 - 2.0 * eps),
              "vacuous": vacuous}
    if not vacuous:
        a = 2.0 * eps * eps / (b * b)
        extras["rhs"] = -math.log(eps * -math.expm1(-a)) / a
    inputs = {"epsilon": eps, "B_max": b}
    if window is not None:
        inputs["window"] = int(window)
    return BoundReport(
        "thm3-slln-N", inputs, _clamp(1.0 - 2.0 * tail), COVERAGE, threshold=N, extras=extras
    )


def wlln_coverage_unbounded(n, epsilon, m):
    """Chebyshev-type coverage ``1 - (sigma^2 + delta^2) / (eps^2 n)``."""
    n = _horizon(n)
    eps = _positive("epsilon", epsilon)
    value = _clamp(1.0 - (m.sigma2 + m.delta**2) / (eps * eps * n))
    return BoundReport(
        "thm4-wlln",
        {"n": n, "epsilon": eps, "sigma2": m.sigma2, "delta": m.delta},
        value,
        COVERAGE,
    )


def slln_threshold_unbounded(epsilon, m):
    """Smallest integer ``N > (sigma^2 + delta^2) / eps^3``.

    Computed in exact rational arithmetic on the decimal reading of the inputs,
    so boundary cases such as ``1.25 / 0.1**3 = 1250`` land on the integer.
    """
    eps = _positive("epsilon", epsilon)
    rhs = (_exact(m.sigma2) + _exact(m.delta) ** 2) / _exact(eps) ** 3
    return max(1, math.floor(rhs) + 1)


def unbounded_window_coverage(N, epsilon, m):
    """Intermediate window bound ``1 - 2 (sigma^2 + delta^2) / (eps^2 N)``."""
    N = _horizon(N)
    eps = _positive("epsilon", epsilon)
    return _clamp(1.0 - 2.0 * (m.sigma2 + m.delta**2) / (eps * eps * N))


def slln_threshold_unbounded_report(epsilon, m, window=None):
    eps = _positive("epsilon", epsilon)
    N = slln_threshold_unbounded(eps, m)
    inputs = {"epsilon": eps, "sigma2": m.sigma2, "delta": m.delta}
    if window is not None:
        inputs["window"] = int(window)
    return BoundReport(
        "thm4-slln-N",
        inputs,
        unbounded_window_coverage(N, eps, m),
        COVERAGE,
        threshold=N,
        extras={
            "rhs": float((_exact(m.sigma2) + _exact(m.delta) ** 2) / _exact(eps) ** 3),
            "display_coverage": _clamp(1.0 - 2.0 * eps),
        },
    )


def markov_tail(expectation_upper, epsilon):
    eps = _positive("epsilon", epsilon)
    if not math.isfinite(expectation_upper) or expectation_upper < 0:
        raise InputError("Markov's inequality needs a finite non-negative expectation")
    return _clamp(expectation_upper / eps)


def hoeffding_mgf_bound(s, a, b):
    """``exp(s^2 (b - a)^2 / 8)``, which dominates E[exp(sX)] when a <= X <= b and E[X] <= 0."""
    s = _positive("s", s)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InputError("range endpoints must be finite")
    if a > b:
        raise InputError(f"need a <= b, got a={a!r}, b={b!r}")
    return math.exp(s * s * (b - a) ** 2 / 8.0)


def mgf_phi(u, p):
    """Log of the two-point MGF envelope, ``-p u + log(1 - p + p e^u)``."""
    return -p * u + math.log1p(p * math.expm1(u))


def mgf_phi_second(u, p):
    """Second derivative of :func:`mgf_phi`: ``p(1-p)e^u / (1-p+pe^u)^2``.

    Written with ``e^{-u}`` for large u so it does not overflow.
    """
    u = np.asarray(u, dtype=float)
    if not 0.0 < p <= 1.0:
        raise InputError("p must lie in (0, 1]")
    # q = p e^u / (1 - p + p e^u) and phi'' = q (1 - q)
    q = p / (p + (1.0 - p) * np.exp(-u))
    return q * (1.0 - q)


def khr_bound(second_moments, epsilons):
    """Lower bound ``1 - sum m_i / eps_i^2`` on P(for all j: |X_j| < eps_j) for a martingale."""
    m = np.asarray(second_moments, dtype=float)
    e = np.asarray(epsilons, dtype=float)
    if m.shape != e.shape or m.ndim != 1:
        raise InputError("second moments and epsilons must be equal-length sequences")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise InputError("increment second moments must be finite and non-negative")
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise InputError("epsilons must be finite and positive")
    if np.any(np.diff(e) < 0):
        raise InputError("epsilons must be non-decreasing")
    return _clamp(1.0 - math.fsum(m / (e * e)))


def make_report(formula_id, **params):
    """Evaluate ``formula_id`` from keyword parameters (the CLI front door).

    Recognised parameters: n, eps, bmax, B (list), sigma2, delta, side,
    expectation, s, a, b, moments, eps_list, window.
    """
    p = {k: v for k, v in params.items() if v is not None}

    def need(*names):
        missing = [name for name in names if name not in p]
        if missing:
            raise InputError(f"formula {formula_id!r} needs {', '.join(missing)}")

    def ranges():
        if "B" in p:
            return RangeSpec(tuple(p["B"]))
        need("n", "bmax")
        return RangeSpec.uniform(p["n"], p["bmax"])

    if formula_id in ("thm1", "thm2"):
        need("eps")
        fn = hoeffding_tail if formula_id == "thm1" else azuma_tail
        return fn(p["eps"], ranges(), side=p.get("side", UPPER))
    if formula_id in ("thm3-wlln", "dcm-wlln"):
        need("n", "eps")
        b = RangeSpec(tuple(p["B"])).b_max if "B" in p else p.get("bmax")
        if b is None:
            raise InputError(f"formula {formula_id!r} needs bmax")
        fn = wlln_coverage_bounded if formula_id == "thm3-wlln" else dcm_coverage_bounded
        return fn(p["n"], p["eps"], b)
    if formula_id == "thm3-slln-N":
        need("eps", "bmax")
        return slln_threshold_bounded_report(p["eps"], p["bmax"], p.get("window"))
    if formula_id == "thm4-wlln":
        need("n", "eps", "sigma2", "delta")
        return wlln_coverage_unbounded(p["n"], p["eps"], MomentSpec(p["sigma2"], p["delta"]))
    if formula_id == "thm4-slln-N":
        need("eps", "sigma2", "delta")
        return slln_threshold_unbounded_report(
            p["eps"], MomentSpec(p["sigma2"], p["delta"]), p.get("window")
        )
    if formula_id == "markov":
        need("expectation", "eps")
        return BoundReport(
            "markov",
            {"expectation_upper": float(p["expectation"]), "epsilon": float(p["eps"])},
            markov_tail(p["expectation"], p["eps"]),
            UPPER,
        )
    if formula_id == "hoeffding-mgf":
        need("s", "a", "b")
        value = hoeffding_mgf_bound(p["s"], p["a"], p["b"])
        # an MGF bound, not a probability: reported unclamped
        return BoundReport(
            "hoeffding-mgf", {"s": p["s"], "a": p["a"], "b": p["b"]}, value, UPPER
        )
    if formula_id == "khr":
        need("moments", "eps_list")
        return BoundReport(
            "khr",
            {"second_moments": list(p["moments"]), "epsilons": list(p["eps_list"])},
            khr_bound(p["moments"], p["eps_list"]),
            COVERAGE,
        )
    raise InputError(f"unknown formula_id {formula_id!r}; choose from {', '.join(FORMULA_IDS)}")

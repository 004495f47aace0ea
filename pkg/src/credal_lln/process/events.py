"""Trajectory events, evaluated online one depth at a time.

Each event exposes ``predicate(d, n, x, S, Y, lo, up)`` for depth ``d`` (1-based),
where ``x`` is the latest draw, ``S`` the running sum, ``Y`` the martingale,
and ``lo``/``up`` the cumulative lower/upper mean sums to depth d. It returns a
boolean mask, or None when the depth is irrelevant. The event holds on a
trajectory when every returned mask is true.

Boundary comparisons carry a relative slack of ``BOUNDARY_TOL`` so that sums
landing exactly on a band edge are classified by the inequality's intent
(closed: in, strict: out) rather than by rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError

BOUNDARY_TOL = 1e-12

TAIL = "tail"
COVERAGE = "coverage"


def _pos(eps, what="epsilon"):
    try:
        eps = float(eps)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{what} must be a number") from exc
    if not math.isfinite(eps) or eps <= 0:
        raise InputError(f"{what} must be a positive finite number")
    return eps


def _slack(*terms):
    return BOUNDARY_TOL * max(1.0, *(float(np.max(np.abs(t))) for t in terms))


class Event:
    kind = COVERAGE
    uses_martingale = False

    def last_depth(self):
        """Largest depth the event inspects, or None for 'the horizon'."""
        return None

    def check_horizon(self, n):
        d = self.last_depth()
        if d is not None and d > n:
            raise InputError(f"{self.name} looks at depth {d} beyond the horizon n={n}")

    def predicate(self, d, n, x, S, Y, lo, up):  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def name(self):
        return type(self).__name__

    def to_dict(self):
        return {"event": self.name, **{k: v for k, v in vars(self).items()}}


@dataclass(frozen=True)
class SumUpperDev(Event):
    """{ sum X - sum upper means >= eps } at the horizon."""

    eps: float
    kind = TAIL

    def __post_init__(self):
        object.__setattr__(self, "eps", _pos(self.eps))

    def predicate(self, d, n, x, S, Y, lo, up):
        if d != n:
            return None
        return S - up - self.eps >= -_slack(S, up, self.eps)


@dataclass(frozen=True)
class SumLowerDev(Event):
    """{ sum X - sum lower means <= -eps } at the horizon."""

    eps: float
    kind = TAIL

    def __post_init__(self):
        object.__setattr__(self, "eps", _pos(self.eps))

    def predicate(self, d, n, x, S, Y, lo, up):
        if d != n:
            return None
        return lo - S - self.eps >= -_slack(S, lo, self.eps)


def _band(d, S, lo, up, eps, closed):
    mean = S / d
    a = mean - (lo / d - eps)
    b = (up / d + eps) - mean
    tol = _slack(mean, lo / d, up / d, eps)
    if closed:
        return (a >= -tol) & (b >= -tol)
    return (a > tol) & (b > tol)


@dataclass(frozen=True)
class MeanBand(Event):
    """{ mu_lower_n - eps < S_n / n < mu_upper_n + eps } at the horizon."""

    eps: float
    closed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "eps", _pos(self.eps))

    def predicate(self, d, n, x, S, Y, lo, up):
        if d != n:
            return None
        return _band(d, S, lo, up, self.eps, self.closed)


@dataclass(frozen=True)
class WindowBand(Event):
    """The mean band holds at every depth d in [N, N + N']."""

    N: int
    Nprime: int
    eps: float

    def __post_init__(self):
        object.__setattr__(self, "eps", _pos(self.eps))
        if int(self.N) != self.N or self.N < 1 or int(self.Nprime) != self.Nprime or self.Nprime < 0:
            raise InputError("window needs integers N >= 1 and N' >= 0")

    def last_depth(self):
        return self.N + self.Nprime

    def predicate(self, d, n, x, S, Y, lo, up):
        if d < self.N or d > self.N + self.Nprime:
            return None
        return _band(d, S, lo, up, self.eps, False)


@dataclass(frozen=True)
class MartingaleWindow(Event):
    """{ |Y_d / d| < eps } at every depth d in [N, N + N']."""

    N: int
    Nprime: int
    eps: float
    uses_martingale = True

    def __post_init__(self):
        object.__setattr__(self, "eps", _pos(self.eps))
        if int(self.N) != self.N or self.N < 1 or int(self.Nprime) != self.Nprime or self.Nprime < 0:
            raise InputError("window needs integers N >= 1 and N' >= 0")

    def last_depth(self):
        return self.N + self.Nprime

    def predicate(self, d, n, x, S, Y, lo, up):
        if d < self.N or d > self.N + self.Nprime:
            return None
        r = np.abs(Y) / d
        return self.eps - r > _slack(r, self.eps)


@dataclass(frozen=True)
class MaxBand(Event):
    """{ |Y_j| < eps_j for every j <= len(eps) }."""

    eps: tuple
    uses_martingale = True

    def __post_init__(self):
        eps = tuple(_pos(e) for e in self.eps)
        if not eps:
            raise InputError("MaxBand needs at least one epsilon")
        if any(b < a for a, b in zip(eps, eps[1:])):
            raise InputError("epsilons must be non-decreasing")
        object.__setattr__(self, "eps", eps)

    def last_depth(self):
        return len(self.eps)

    def predicate(self, d, n, x, S, Y, lo, up):
        if d > len(self.eps):
            return None
        e = self.eps[d - 1]
        return e - np.abs(Y) > _slack(Y, e)


@dataclass(frozen=True)
class ProductSets(Event):
    """{ X_d in A_d for every d <= len(sets) }."""

    sets: tuple

    def __post_init__(self):
        sets = tuple(tuple(sorted(float(v) for v in a)) for a in self.sets)
        if not sets:
            raise InputError("ProductSets needs at least one set")
        object.__setattr__(self, "sets", sets)

    def last_depth(self):
        return len(self.sets)

    def predicate(self, d, n, x, S, Y, lo, up):
        if d > len(self.sets):
            return None
        return np.isin(x, self.sets[d - 1])

"""Adversarial strategies: history-dependent choices of step distributions.

Strategies are vectorised over trials. ``choose(t, history, total, spec)``
receives the 0-based step index, the (T, t) matrix of realised histories and
their running sums, and returns a :class:`StepChoice`. Built-ins that ignore
the history beyond its sum set ``uses_history = False`` so the sampler never
materialises full histories for them.
"""
from __future__ import annotations

import functools
import re

import numpy as np

from ..errors import InputError
from .spec import StepChoice

_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)


@functools.lru_cache(maxsize=4096)
def _menu(step, family):
    values, probs = step.menu(family)
    means = (np.broadcast_to(values, probs.shape) * probs).sum(axis=1)
    return values, probs, means


class Strategy:
    """Base class. Subclasses implement :meth:`choose`."""

    name = "strategy"
    uses_history = False

    def choose(self, t, history, total, spec):  # pragma: no cover - abstract
        raise NotImplementedError

    def rule(self, t, history, spec):
        """Scalar view: (values, probs) chosen for a single history prefix."""
        h = np.asarray(history, dtype=float).reshape(1, -1)
        choice = self.choose(t, h, h.sum(axis=1), spec)
        r = int(choice.picks(1)[0])
        return np.array(choice.row_values()[r]), np.array(choice.probs[r])

    def __repr__(self):
        return self.name


class ExtremeConst(Strategy):
    """Always menu row j: extreme j of a credal step, or the upper/lower mean row."""

    def __init__(self, j=0, family=None):
        self.j = int(j)
        self.family = family
        self.name = f"EXTREME_CONST({self.j})" + (f"[{family}]" if family else "")

    def choose(self, t, history, total, spec):
        values, probs, _ = _menu(spec.steps[t], self.family)
        r = self.j % probs.shape[0]
        v = values if values.ndim == 1 else values[r]
        return StepChoice(probs[r : r + 1], v)


class Greedy(Strategy):
    """Maximise (``up=True``) or minimise the conditional mean at every step."""

    def __init__(self, up=True, family=None):
        self.up = bool(up)
        self.family = family
        self.name = ("GREEDY_UP" if up else "GREEDY_DOWN") + (f"[{family}]" if family else "")

    def choose(self, t, history, total, spec):
        values, probs, means = _menu(spec.steps[t], self.family)
        r = int(np.argmax(means) if self.up else np.argmin(means))
        v = values if values.ndim == 1 else values[r]
        return StepChoice(probs[r : r + 1], v)


class SignSwitch(Strategy):
    """Push up while the running sum is below its upper-mean track, else push down."""

    def __init__(self, family=None):
        self.family = family
        self.name = "SIGN_SWITCH" + (f"[{family}]" if family else "")

    def choose(self, t, history, total, spec):
        values, probs, means = _menu(spec.steps[t], self.family)
        hi, lo = int(np.argmax(means)), int(np.argmin(means))
        pick = np.where(total < spec.cum_upper[t], 0, 1)
        rows = [hi, lo]
        v = values if values.ndim == 1 else values[rows]
        return StepChoice(probs[rows], v, pick)


class IidMix(Strategy):
    """Fixed convex combination of the menu rows at every step.

    For credal steps the weights mix the extremes. For moment steps they mix
    the upper and lower mean, and the family supplies the distribution.
    """

    def __init__(self, weights=None, family=None):
        self.weights = None if weights is None else tuple(float(w) for w in weights)
        self.family = family
        label = "uniform" if weights is None else ",".join(repr(w) for w in self.weights)
        self.name = f"IID_MIX({label})" + (f"[{family}]" if family else "")

    def _weights(self, m):
        if self.weights is None:
            return np.full(m, 1.0 / m)
        w = np.asarray(self.weights)
        if w.size != m:
            raise InputError(f"{self.name} needs {m} weights for this step")
        return w

    def choose(self, t, history, total, spec):
        step = spec.steps[t]
        if step.kind == "credal":
            w = self._weights(step.marginal.m)
            return StepChoice(step.mixture(w)[None, :], step.support, by_construction=True)
        w = self._weights(2)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InputError("mixture weights must be a probability vector")
        mean = w[0] * step.mean_upper + w[1] * step.mean_lower
        v, p = step.distribution(mean, self.family)
        return StepChoice(p[None, :], v)


class PointMass(Strategy):
    """Deterministic value v at every step."""

    def __init__(self, value):
        self.value = float(value)
        self.name = f"POINT_MASS({self.value!r})"

    def choose(self, t, history, total, spec):
        v, p = spec.steps[t].point_row(self.value)
        return StepChoice(p, v)


def _node_hash(history, salt):
    """splitmix64 digest of each history row, mixed with ``salt``."""
    bits = np.ascontiguousarray(history, dtype=np.float64).view(np.uint64)
    with np.errstate(over="ignore"):
        h = np.full(bits.shape[0], np.uint64(salt & 0xFFFFFFFFFFFFFFFF) * _SPLITMIX_GAMMA)
        for j in range(bits.shape[1]):
            h = _mix64(h ^ bits[:, j])
    return h


def _mix64(z):
    with np.errstate(over="ignore"):
        z = z + _SPLITMIX_GAMMA
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _unit(z):
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


class RandomNodewise(Strategy):
    """Pseudo-random, history-dependent choice at every node.

    Credal steps get a random mixture of extremes (or a random extreme when
    ``mix`` is False); moment steps get a random admissible mean and spread.
    Deterministic in (seed, history).
    """

    uses_history = True

    def __init__(self, seed=0, mix=True):
        self.seed = int(seed)
        self.mix = bool(mix)
        self.name = f"RANDOM_NODEWISE({self.seed}{'' if mix else ',extreme'})"

    def choose(self, t, history, total, spec):
        step = spec.steps[t]
        h = _node_hash(history, self.seed * 1_000_003 + t + 1)
        if step.kind == "credal":
            m = step.marginal.m
            if not self.mix:
                pick = (h % np.uint64(m)).astype(np.int64)
                return StepChoice(step.marginal.extremes, step.support, pick)
            keys, pick = np.unique(h, return_inverse=True)
            u = np.stack([_unit(_mix64(keys + np.uint64(j + 1))) for j in range(m)], axis=1)
            w = -np.log1p(-u)  # exponential spacings -> Dirichlet(1,...,1)
            w /= w.sum(axis=1, keepdims=True)
            return StepChoice(
                step.mixture(w), step.support, pick.reshape(-1), by_construction=True
            )
        keys, pick = np.unique(h, return_inverse=True)
        u1 = _unit(_mix64(keys + np.uint64(1)))
        u2 = _unit(_mix64(keys + np.uint64(2)))
        rows_v, rows_p = [], []
        for a, b in zip(u1, u2):
            mean = step.mean_lower + a * (step.mean_upper - step.mean_lower)
            v, p = step.distribution(mean, None, scale=float(np.sqrt(b)) if step.support is None else 1.0)
            rows_v.append(v)
            rows_p.append(p)
        return StepChoice(np.vstack(rows_p), np.vstack(rows_v), pick.reshape(-1))


class NodewiseTable(Strategy):
    """Deterministic extreme choice per tree node of a credal process.

    ``tables[t]`` has one extreme index per node at depth t, where nodes are
    numbered in mixed radix over the step supports (first step most
    significant).
    """

    uses_history = True

    def __init__(self, tables, name="NODEWISE"):
        self.tables = [np.asarray(tb, dtype=np.int64) for tb in tables]
        self.name = name

    def choose(self, t, history, total, spec):
        step = spec.steps[t]
        if step.kind != "credal":
            raise InputError("nodewise tables need credal steps")
        node = np.zeros(history.shape[0], dtype=np.int64)
        for j in range(t):
            sup = spec.steps[j].support
            node = node * sup.size + _lookup(sup, history[:, j])
        pick = self.tables[t][node]
        return StepChoice(step.marginal.extremes, step.support, pick)


def _lookup(support, x):
    return np.argmax(x[:, None] == support[None, :], axis=1)


def builtin_strategies(spec):
    """Standard adversaries for ``spec``, including moment-family variants."""
    out = [ExtremeConst(0)]
    if max(_menu(s, None)[1].shape[0] for s in spec.steps) > 1:
        out.append(ExtremeConst(1))
    out += [Greedy(True), Greedy(False), SignSwitch(), IidMix()]
    if any(s.kind == "moment" and s.support is None for s in spec.steps):
        for fam in ("two-point", "gaussian"):
            out += [Greedy(True, fam), Greedy(False, fam), SignSwitch(fam), IidMix(None, fam)]
        out = _dedupe(out, spec)
    return out


def _dedupe(strategies, spec):
    seen, keep = set(), []
    default = {s.family for s in spec.steps if s.kind == "moment"}
    for s in strategies:
        fam = getattr(s, "family", None)
        key = (type(s).__name__, getattr(s, "up", None), getattr(s, "j", None),
               None if fam in default and len(default) == 1 else fam)
        if key not in seen:
            seen.add(key)
            keep.append(s)
    return keep


_NAME_RE = re.compile(r"^([A-Z_]+)(?:\(([^)]*)\))?(?:\[([a-z-]+)\])?$")


def strategy_from_name(name, spec=None):
    """Parse names such as ``GREEDY_UP``, ``IID_MIX(0.2,0.8)``, ``SIGN_SWITCH[gaussian]``."""
    m = _NAME_RE.match(name.strip())
    if not m:
        raise InputError(f"cannot parse strategy name {name!r}")
    head, arg, family = m.groups()
    args = [a.strip() for a in arg.split(",")] if arg else []
    try:
        if head == "GREEDY_UP":
            return Greedy(True, family)
        if head == "GREEDY_DOWN":
            return Greedy(False, family)
        if head == "SIGN_SWITCH":
            return SignSwitch(family)
        if head == "EXTREME_CONST":
            return ExtremeConst(int(args[0]) if args else 0, family)
        if head == "IID_MIX":
            w = None if not args or args == ["uniform"] else [float(a) for a in args]
            return IidMix(w, family)
        if head == "POINT_MASS":
            return PointMass(float(args[0]))
        if head == "RANDOM_NODEWISE":
            return RandomNodewise(int(args[0]) if args else 0)
    except (IndexError, ValueError) as exc:
        raise InputError(f"bad arguments in strategy name {name!r}") from exc
    raise InputError(f"unknown strategy {head!r}")

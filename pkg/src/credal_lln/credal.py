"""Credal sets over finite outcome spaces.

A credal set is stored through its extreme points. Every linear functional
(an expectation) attains its infimum and supremum over the convex hull at an
extreme point, so lower and upper expectations reduce to a min/max over rows
of a small matrix.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from .config import PROB_TOL, event_cap
from .errors import (
    CapacityError,
    InputError,
    PolicyViolationError,
    UndefinedConditioningError,
)


class ConditioningPolicy(enum.Enum):
    """How conditioning treats events of probability zero.

    ``REGULAR_EXTENSION`` Bayes-updates every extreme that gives the event
    positive probability and drops the others. ``STRICT_POSITIVE_LOWER``
    additionally refuses events whose lower probability is zero.
    """

    REGULAR_EXTENSION = "regular-extension"
    STRICT_POSITIVE_LOWER = "strict-positive-lower"


def _tupleize(label):
    if isinstance(label, list):
        return tuple(_tupleize(v) for v in label)
    return label


@dataclass(frozen=True)
class OutcomeSpace:
    labels: tuple
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(_tupleize(v) for v in self.labels)
        if not labels:
            raise InputError("an outcome space needs at least one label")
        index = {}
        for pos, label in enumerate(labels):
            if label in index:
                raise InputError(f"duplicate outcome label {label!r}")
            index[label] = pos
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", index)

    @property
    def size(self):
        return len(self.labels)

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label):
        return label in self._index

    def index(self, label):
        try:
            return self._index[label]
        except (KeyError, TypeError):
            raise InputError(f"unknown outcome label {label!r}") from None

    def mask(self, event):
        """Boolean indicator of ``event`` (an iterable of labels)."""
        out = np.zeros(self.size, dtype=bool)
        for label in event:
            out[self.index(_tupleize(label))] = True
        return out

    def is_numeric(self):
        return all(isinstance(v, Real) and not isinstance(v, bool) for v in self.labels)

    def values(self):
        if not self.is_numeric():
            raise InputError("outcome labels are not real numbers")
        return np.asarray(self.labels, dtype=float)


def probability_vector(weights, tol=PROB_TOL):
    """Validate ``weights`` as a probability vector and return it as an array."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InputError("a probability vector must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InputError("probability weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > tol:
        raise InputError(f"probability weights sum to {w.sum()!r}, not 1")
    return w


def renormalize(weights):
    """Rescale non-negative weights so they sum to exactly one (up to rounding)."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InputError("cannot renormalize negative or non-finite weights")
    total = w.sum()
    if total <= 0:
        raise InputError("cannot renormalize an all-zero vector")
    return w / total


@dataclass(frozen=True, eq=False)
class CredalSet:
    """Convex hull of finitely many probability vectors on ``space``."""

    space: OutcomeSpace
    extremes: np.ndarray

    def __post_init__(self):
        if not isinstance(self.space, OutcomeSpace):
            object.__setattr__(self, "space", OutcomeSpace(tuple(self.space)))
        ext = np.array(self.extremes, dtype=float, ndmin=2)
        if ext.ndim != 2 or ext.shape[0] == 0:
            raise InputError("a credal set needs at least one extreme point")
        if ext.shape[1] != self.space.size:
            raise InputError(
                f"extreme points have {ext.shape[1]} weights but the space has "
                f"{self.space.size} outcomes"
            )
        for row in ext:
            probability_vector(row)
        ext.setflags(write=False)
        object.__setattr__(self, "extremes", ext)

    @classmethod
    def from_extremes(cls, labels, extremes):
        return cls(OutcomeSpace(tuple(labels)), extremes)

    @classmethod
    def point_mass(cls, labels, label):
        space = OutcomeSpace(tuple(labels))
        row = np.zeros(space.size)
        row[space.index(label)] = 1.0
        return cls(space, row[None, :])

    @property
    def k(self):
        return self.space.size

    @property
    def m(self):
        return self.extremes.shape[0]

    def duplicate_extremes(self):
        """Pairs ``(first, duplicate)`` of extreme indices holding the same vector."""
        seen = {}
        pairs = []
        for j, row in enumerate(self.extremes):
            key = row.tobytes()
            if key in seen:
                pairs.append((seen[key], j))
            else:
                seen[key] = j
        return pairs

    def canonical(self):
        """Copy with duplicate extremes removed (first occurrence kept)."""
        dup = {j for _, j in self.duplicate_extremes()}
        if not dup:
            return self
        keep = [j for j in range(self.m) if j not in dup]
        return CredalSet(self.space, self.extremes[keep])

    def function(self, f):
        return as_function(self, f)

    def to_dict(self):
        def plain(label):
            return list(plain(v) for v in label) if isinstance(label, tuple) else label

        return {
            "space": [plain(v) for v in self.space.labels],
            "extremes": self.extremes.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls.from_extremes(data["space"], data["extremes"])
        except KeyError as exc:
            raise InputError(f"credal set document lacks {exc.args[0]!r}") from None

    def __eq__(self, other):
        if not isinstance(other, CredalSet):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.extremes, other.extremes)

    __hash__ = None


def as_function(K, f):
    """Return ``f`` as an array of values indexed like ``K.space``.

    ``f`` may be a sequence of k reals, a mapping label -> value, or a callable
    applied to each label.
    """
    if callable(f):
        values = [f(label) for label in K.space.labels]
    elif isinstance(f, dict):
        values = [f[label] for label in K.space.labels]
    else:
        values = f
    arr = np.asarray(values, dtype=float)
    if arr.shape != (K.k,):
        raise InputError(
            f"function has shape {arr.shape}, expected ({K.k},) for this space"
        )
    if not np.all(np.isfinite(arr)):
        raise InputError("bounded functions must take finite values")
    return arr


def expectations(K, f):
    """Expectation of ``f`` under each extreme point."""
    return K.extremes @ as_function(K, f)


def lower_expectation(K, f):
    return float(np.min(expectations(K, f)))


def upper_expectation(K, f):
    return float(np.max(expectations(K, f)))


def expectation_witnesses(K, f):
    """Indices of the extremes attaining the lower and upper expectation.

    Ties go to the lowest index.
    """
    e = expectations(K, f)
    return int(np.argmin(e)), int(np.argmax(e))


def lower_probability(K, event):
    return lower_expectation(K, K.space.mask(event).astype(float))


def upper_probability(K, event):
    return upper_expectation(K, K.space.mask(event).astype(float))


def condition(K, event, policy=ConditioningPolicy.REGULAR_EXTENSION, restrict=True):
    """Elementwise Bayes conditioning of ``K`` on ``event``.

    With ``restrict`` the result lives on the outcomes of ``event`` (in space
    order); otherwise it keeps the full space with zeros off the event.
    """
    mask = K.space.mask(event)
    if not mask.any():
        raise InputError("cannot condition on the empty event")
    mass = K.extremes[:, mask].sum(axis=1)
    if mass.max() <= 0.0:
        raise UndefinedConditioningError("event has upper probability zero")
    if policy is ConditioningPolicy.STRICT_POSITIVE_LOWER and mass.min() <= 0.0:
        raise PolicyViolationError(
            "event has lower probability zero; strict policy leaves it undefined"
        )
    keep = mass > 0.0
    if restrict:
        rows = K.extremes[keep][:, mask] / mass[keep, None]
        labels = [label for label, inside in zip(K.space.labels, mask) if inside]
        space = OutcomeSpace(tuple(labels))
    else:
        rows = np.where(mask, K.extremes[keep], 0.0) / mass[keep, None]
        space = K.space
    rows = rows / rows.sum(axis=1, keepdims=True)
    return CredalSet(space, rows)


# ---------------------------------------------------------------------------
# irrelevance checks


@dataclass(frozen=True)
class IrrelevanceReport:
    check: str
    index: int
    policy: ConditioningPolicy
    passed: bool
    max_gap: float
    worst_event: tuple | None
    worst_function: str | None
    event_classes: int
    events_total: int
    events_skipped: int
    tested_functions: tuple
    conditional_ranges: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "check": self.check,
            "index": self.index,
            "policy": self.policy.value,
            "verdict": "PASS" if self.passed else "FAIL",
            "max_gap": self.max_gap,
            "worst_event": None if self.worst_event is None else [list(p) for p in self.worst_event],
            "worst_function": self.worst_function,
            "event_classes": self.event_classes,
            "events_total": self.events_total,
            "events_skipped": self.events_skipped,
            "tested_functions": list(self.tested_functions),
            "conditional_ranges": {k: list(v) for k, v in self.conditional_ranges.items()},
        }


def _split_labels(joint, i):
    if i < 2:
        raise InputError("irrelevance is checked for coordinate index i >= 2")
    prefixes, values = {}, {}
    pref_of, val_of = [], []
    for label in joint.space.labels:
        if not isinstance(label, tuple) or len(label) < i:
            raise InputError(
                f"joint labels must be tuples with at least {i} coordinates, got {label!r}"
            )
        p, v = label[: i - 1], label[i - 1]
        pref_of.append(prefixes.setdefault(p, len(prefixes)))
        val_of.append(values.setdefault(v, len(values)))
    mass = np.zeros((joint.m, len(prefixes), len(values)))
    np.add.at(mass, (slice(None), np.array(pref_of), np.array(val_of)), joint.extremes)
    return list(prefixes), list(values), mass


def _default_family(values, test_functions, epistemic):
    family = []
    if epistemic:
        for j, v in enumerate(values):
            ind = np.zeros(len(values))
            ind[j] = 1.0
            family.append((f"1[X={v!r}]", ind))
    numeric = all(isinstance(v, Real) and not isinstance(v, bool) for v in values)
    if numeric:
        family.append(("X", np.asarray(values, dtype=float)))
    elif not epistemic:
        raise InputError("weak irrelevance needs numeric coordinate values")
    for name, f in (test_functions or {}).items():
        arr = np.asarray(
            [f(v) for v in values] if callable(f) else f, dtype=float
        )
        if arr.shape != (len(values),) or not np.all(np.isfinite(arr)):
            raise InputError(f"test function {name!r} is not a finite function of X_i")
        family.append((name, arr))
    # upper expectation of -f is minus the lower expectation of f
    out = []
    for name, arr in family:
        out.append((name, arr))
        out.append((f"-{name}", -arr))
    return out


def _mixed_radix(start, stop, radices):
    idx = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((idx.size, len(radices)), dtype=np.int64)
    for col, r in enumerate(radices):
        idx, digits[:, col] = np.divmod(idx, r)
    return digits


def _scan(joint, i, policy, tol, family, cap, check):
    prefixes, values, mass = _split_labels(joint, i)
    m, n_pref, _ = mass.shape
    q = mass.sum(axis=2)  # (m, n_pref)
    g = np.einsum("mpv,fv->fmp", mass, np.array([arr for _, arr in family]))
    feats = np.concatenate([q[None], g], axis=0)  # (1+F, m, n_pref)
    scale = max(1.0, float(np.abs(feats).max()))
    # prefixes with identical statistics are interchangeable inside any event
    keys = {}
    members = []
    for p in range(n_pref):
        key = np.round(feats[:, :, p] / scale, 12).tobytes()
        if key not in keys:
            keys[key] = len(members)
            members.append([])
        members[keys[key]].append(p)
    rep = np.array([grp[0] for grp in members])
    counts = np.array([len(grp) for grp in members])
    radices = counts + 1
    n_classes_events = int(np.prod(radices.astype(object))) - 1
    if n_classes_events > cap:
        raise CapacityError(
            f"{n_classes_events} event classes exceed the enumeration cap {cap}"
        )
    total_events = 2**n_pref - 1

    q_rep = q[:, rep]  # (m, C)
    g_rep = g[:, :, rep]  # (F, m, C)
    uncond = g.sum(axis=2).max(axis=1)  # (F,)

    best_gap, best_combo, best_f = -1.0, None, None
    cond_max = np.full(len(family), -np.inf)
    cond_min = np.full(len(family), np.inf)
    skipped = 0
    chunk = 1 << 15
    for start in range(1, n_classes_events + 1, chunk):
        stop = min(n_classes_events + 1, start + chunk)
        combos = _mixed_radix(start, stop, radices).astype(float)
        pa = combos @ q_rep.T  # (E, m)
        valid = pa > 0.0
        if policy is ConditioningPolicy.STRICT_POSITIVE_LOWER:
            defined = valid.all(axis=1)
        else:
            defined = valid.any(axis=1)
        skipped += int(np.count_nonzero(~defined))
        if not defined.any():
            continue
        combos, pa, valid = combos[defined], pa[defined], valid[defined]
        safe = np.where(valid, pa, 1.0)
        for fi in range(len(family)):
            ga = combos @ g_rep[fi].T
            cond = np.where(valid, ga / safe, -np.inf).max(axis=1)
            cond_max[fi] = max(cond_max[fi], cond.max())
            cond_min[fi] = min(cond_min[fi], cond.min())
            gap = np.abs(cond - uncond[fi])
            j = int(np.argmax(gap))
            if gap[j] > best_gap:
                best_gap, best_combo, best_f = float(gap[j]), combos[j], fi

    worst_event = None
    if best_combo is not None:
        chosen = []
        for cls, c in enumerate(best_combo.astype(int)):
            chosen.extend(members[cls][:c])
        worst_event = tuple(prefixes[p] for p in sorted(chosen))
    ranges = {}
    for fi, (name, _) in enumerate(family):
        if not name.startswith("-") and np.isfinite(cond_max[fi]):
            neg = [n for n, _ in family].index(f"-{name}")
            ranges[name] = (float(-cond_max[neg]) + 0.0, float(cond_max[fi]) + 0.0)
    best_gap = max(best_gap, 0.0)
    return IrrelevanceReport(
        check=check,
        index=i,
        policy=policy,
        passed=best_gap <= tol,
        max_gap=best_gap,
        worst_event=worst_event,
        worst_function=None if best_f is None else family[best_f][0],
        event_classes=n_classes_events,
        events_total=total_events,
        events_skipped=skipped,
        tested_functions=tuple(name for name, _ in family),
        conditional_ranges=ranges,
    )


def check_epistemic_irrelevance(
    joint,
    i,
    policy=ConditioningPolicy.REGULAR_EXTENSION,
    tol=1e-12,
    test_functions=None,
    cap=None,
):
    """Check that events on coordinates ``1..i-1`` leave upper expectations of X_i unchanged.

    ``joint`` is a credal set whose labels are tuples; coordinate ``i`` is
    1-based. The tested family is every indicator of a value of X_i, the
    identity when values are numeric, any ``test_functions`` (name ->
    callable or value list), and the negation of each. Every non-empty event
    over the prefixes is covered: prefixes with identical statistics under all
    extremes are lumped, so the enumeration runs over multiplicity vectors
    rather than raw subsets, and the cap applies to those.
    """
    _, values, _ = _split_labels(joint, i)
    family = _default_family(values, test_functions, epistemic=True)
    return _scan(joint, i, policy, tol, family, event_cap(cap), "epistemic")


def check_weak_irrelevance(
    joint, i, policy=ConditioningPolicy.REGULAR_EXTENSION, tol=1e-12, cap=None
):
    """Check that conditioning on past events keeps E-lower and E-upper of X_i."""
    _, values, _ = _split_labels(joint, i)
    family = _default_family(values, None, epistemic=False)
    return _scan(joint, i, policy, tol, family, event_cap(cap), "weak")


def conditional_range(joint, i, f, policy=ConditioningPolicy.REGULAR_EXTENSION, cap=None):
    """Smallest conditional lower and largest conditional upper expectation of f(X_i).

    The range is taken over every non-empty event on coordinates ``1..i-1``
    for which ``policy`` defines conditioning.
    """
    _, values, _ = _split_labels(joint, i)
    arr = np.asarray([f(v) for v in values] if callable(f) else f, dtype=float)
    family = [("f", arr), ("-f", -arr)]
    report = _scan(joint, i, policy, math.inf, family, event_cap(cap), "range")
    return report.conditional_ranges["f"]


def product_credal_set(*marginals):
    """Credal set of product measures built from every combination of marginal extremes.

    The convex hull of these products is the strong product of the marginals.
    """
    if not marginals:
        raise InputError("need at least one marginal")
    labels = [()]
    rows = [np.ones(1)]
    for K in marginals:
        labels = [prefix + (v,) for prefix in labels for v in K.space.labels]
        rows = [np.outer(r, e).ravel() for r in rows for e in K.extremes]
    return CredalSet.from_extremes(labels, np.array(rows))

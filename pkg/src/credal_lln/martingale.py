"""The martingale Y_n = sum (X_i - E[X_i | X_{1:i-1}]) and exact checks on it.

Y is built from the conditional means the strategy actually chose, so it is a
martingale under the strategy's own measure whatever the constraints are.
The exact checks enumerate the trajectory tree and compare both sides of each
identity or inequality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import khr_bound
from .config import IDENTITY_TOL
from .errors import InputError
from .process.events import MartingaleWindow, MaxBand
from .process.exact import check_disintegrability as _disintegrate
from .process.exact import enumerate_tree


@dataclass(frozen=True, eq=False)
class MartingalePath:
    y: np.ndarray
    trial: int
    seed: int

    @property
    def increments(self):
        return np.diff(self.y, prepend=0.0)


def build_y_matrix(batch):
    """(trials, n) matrix of Y_1..Y_n."""
    means = getattr(batch, "realized_conditional_means", None)
    if means is None:
        raise InputError("batch has no realised conditional means")
    means = np.asarray(means, dtype=float)
    if means.shape != batch.draws.shape:
        raise InputError("conditional means do not match the draws")
    return np.cumsum(batch.draws - means, axis=1)


def build_y(batch):
    Y = build_y_matrix(batch)
    return [MartingalePath(Y[r], batch.trial0 + r, batch.seed) for r in range(Y.shape[0])]


@dataclass
class CheckReport:
    check: str
    max_deviation: float
    lhs: float
    rhs: float
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict == "PASS"

    def to_dict(self):
        out = {
            "check": self.check,
            "max_deviation": self.max_deviation,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "verdict": self.verdict,
        }
        if self.details:
            out["details"] = self.details
        return out


def _verdict(ok):
    return "PASS" if ok else "FAIL"


def _tree(spec, strategy, cap, mean_offset=0.0):
    tree = enumerate_tree(spec, strategy, cap)
    return tree.shifted(mean_offset) if mean_offset else tree


def check_martingale_exact(spec, strategy, cap=None, mean_offset=0.0, tol=IDENTITY_TOL):
    """max over nodes of |E[Y_i | history] - Y_{i-1}|.

    ``mean_offset`` corrupts every recorded conditional mean; a non-zero
    offset c must make the check fail with deviation |c|.
    """
    tree = _tree(spec, strategy, cap, mean_offset)
    worst, lhs, rhs = 0.0, 0.0, 0.0
    for d in range(1, tree.n + 1):
        par = tree.parent[d]
        M = tree.prob[d - 1].size
        mass = np.bincount(par, weights=tree.p[d], minlength=M)
        cond = np.bincount(par, weights=tree.p[d] * tree.Y[d], minlength=M) / mass
        dev = np.abs(cond - tree.Y[d - 1])
        j = int(np.argmax(dev))
        if dev[j] > worst:
            worst, lhs, rhs = float(dev[j]), float(cond[j]), float(tree.Y[d - 1][j])
    return CheckReport("martingale", worst, lhs, rhs, _verdict(worst <= tol),
                       {"strategy": tree.strategy, "mean_offset": mean_offset})


def increment_second_moments(tree):
    """E[(Y_i - Y_{i-1})^2] for i = 1..n."""
    return np.array([
        float(tree.prob[d] @ (tree.x[d] - tree.mean[d]) ** 2) for d in range(1, tree.n + 1)
    ])


def check_second_moment_identity(spec, strategy, cap=None, tol=IDENTITY_TOL, mean_offset=0.0):
    """E[Y_n^2] against the summed increment second moments, plus the n(sigma^2+delta^2) cap."""
    tree = _tree(spec, strategy, cap, mean_offset)
    lhs = float(tree.prob[tree.n] @ tree.Y[tree.n] ** 2)
    moments = increment_second_moments(tree)
    rhs = math.fsum(moments)
    dev = abs(lhs - rhs)
    ms = spec.moment_spec()
    cap_value = spec.n * (ms.sigma2 + ms.delta**2)
    chain_ok = rhs <= cap_value * (1 + 1e-12) + tol
    details = {
        "strategy": tree.strategy,
        "chain_bound": cap_value,
        "chain_holds": chain_ok,
        "increment_second_moments": moments.tolist(),
    }
    return CheckReport("second-moment", dev, lhs, rhs, _verdict(dev <= tol and chain_ok), details)


def _eps_list(epsilons, n):
    eps = tuple(float(e) for e in epsilons)
    if not eps:
        raise InputError("need at least one epsilon")
    if any(e <= 0 or not math.isfinite(e) for e in eps):
        raise InputError("epsilons must be positive and finite")
    if any(b < a for a, b in zip(eps, eps[1:])):
        raise InputError("epsilons must be non-decreasing")
    if len(eps) > n:
        raise InputError(f"{len(eps)} epsilons for a horizon of {n}")
    return eps


def check_khr_exact(spec, strategy, epsilons, cap=None, tol=IDENTITY_TOL):
    """Exact P(|Y_j| < eps_j for all j) against the maximal-inequality bound."""
    eps = _eps_list(epsilons, spec.n)
    tree = enumerate_tree(spec, strategy, cap)
    exact = float(tree.prob[tree.n][tree.event_mask(MaxBand(eps), spec)].sum())
    bound = khr_bound(increment_second_moments(tree)[: len(eps)], eps)
    gap = exact - bound
    return CheckReport("khr", max(0.0, -gap), exact, bound, _verdict(gap >= -tol),
                       {"strategy": tree.strategy, "epsilons": list(eps)})


def window_coverage_exact(spec, strategy, N, Nprime, epsilon, cap=None, tree=None):
    """Exact P(|Y_m / m| < eps for every m in [N, N + N'])."""
    event = MartingaleWindow(N, Nprime, epsilon)
    event.check_horizon(spec.n)
    tree = tree or enumerate_tree(spec, strategy, cap)
    return float(tree.prob[tree.n][tree.event_mask(event, spec)].sum())


def window_epsilons(N, Nprime, epsilon):
    """Thresholds eps*N up to depth N, then eps*m: the band the window event implies."""
    return [epsilon * N] * N + [epsilon * m for m in range(N + 1, N + Nprime + 1)]


def window_khr_bound(second_moments, N, Nprime, epsilon):
    """Maximal-inequality lower bound on the window coverage from increment second moments."""
    moments = np.asarray(second_moments, dtype=float)[: N + Nprime]
    if moments.size != N + Nprime:
        raise InputError("need a second moment for every step up to N + N'")
    return khr_bound(moments, window_epsilons(N, Nprime, epsilon))


def check_window_exact(spec, strategy, N, Nprime, epsilon, cap=None, tol=IDENTITY_TOL):
    """Exact window coverage against its maximal-inequality bound and the moment-cap chain."""
    tree = enumerate_tree(spec, strategy, cap)
    exact = window_coverage_exact(spec, strategy, N, Nprime, epsilon, tree=tree)
    khr = window_khr_bound(increment_second_moments(tree), N, Nprime, epsilon)
    ms = spec.moment_spec()
    chain = max(0.0, 1.0 - 2.0 * (ms.sigma2 + ms.delta**2) / (epsilon**2 * N))
    ok = exact >= khr - tol and khr >= chain - tol
    return CheckReport("window", max(0.0, khr - exact), exact, khr, _verdict(ok),
                       {"strategy": tree.strategy, "moment_chain": chain})


def check_disintegrability(spec, strategy, ks=None, seed=0, cap=None, tol=IDENTITY_TOL):
    """E[W] = E[E[W | X_{1:k}]] for a random leaf function W and each k."""
    tree = enumerate_tree(spec, strategy, cap)
    ks = (1, spec.n - 1) if ks is None else tuple(ks)
    W = np.random.default_rng(seed).uniform(-1.0, 1.0, tree.leaves)
    worst, lhs, rhs = 0.0, 0.0, 0.0
    for k in ks:
        dev, a, b = _disintegrate(tree, W, max(0, k))
        if dev >= worst:
            worst, lhs, rhs = dev, a, b
    return CheckReport("disintegrability", worst, lhs, rhs, _verdict(worst <= tol),
                       {"strategy": tree.strategy, "k": list(ks)})


def check_bridge_inclusion(spec, strategy, epsilon, cap=None):
    """Pathwise: |Y_n/n| < eps implies the empirical mean is inside the eps-widened band."""
    tree = enumerate_tree(spec, strategy, cap)
    n = spec.n
    inner = np.abs(tree.Y[n]) / n < epsilon
    mean = tree.S[n] / n
    lo = spec.cum_lower[n] / n - epsilon
    hi = spec.cum_upper[n] / n + epsilon
    slack = 1e-12 * max(1.0, abs(lo), abs(hi))
    outside = inner & ((mean <= lo - slack) | (mean >= hi + slack))
    count = int(np.count_nonzero(outside))
    return CheckReport("bridge-inclusion", float(count), float(np.count_nonzero(inner)),
                       float(count), _verdict(count == 0), {"strategy": tree.strategy})

"""Exact oracles over finite trajectory trees.

* :func:`enumerate_tree` expands the measure a strategy induces, pruning
  zero-probability branches.
* :func:`lower_upper_event_probability_dp` runs backward induction over the
  full support tree of a credal process, choosing the extreme that minimises
  (maximises) the continuation value at every node.
* :func:`nodewise_brute_force` evaluates every deterministic assignment of
  extremes to nodes directly, as an independent check of the DP.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import node_cap
from ..errors import CapacityError, InputError
from .sampling import _Validator


@dataclass(eq=False)
class ExactTree:
    """Per-depth node arrays; depth 0 is the root.

    ``parent[d]`` indexes depth d-1. Children of one parent are contiguous.
    ``p[d]`` is the conditional probability of the step into the node and
    ``mean[d]`` the conditional mean the strategy chose for that step.
    """

    n: int
    parent: list
    x: list
    p: list
    prob: list
    mean: list
    S: list
    Y: list
    strategy: str = ""

    @property
    def leaves(self):
        return self.prob[self.n].size

    def event_mask(self, event, spec):
        """Boolean mask over leaves: does the event hold on that path?"""
        ok = np.ones(1, dtype=bool)
        for d in range(1, self.n + 1):
            ok = ok[self.parent[d]]
            pred = event.predicate(
                d, self.n, self.x[d], self.S[d], self.Y[d], spec.cum_lower[d], spec.cum_upper[d]
            )
            if pred is not None:
                ok = ok & pred
        return ok

    def ancestors(self, depth):
        """Index at ``depth`` of every leaf's ancestor."""
        idx = np.arange(self.leaves)
        for d in range(self.n, depth, -1):
            idx = self.parent[d][idx]
        return idx

    def shifted(self, offset):
        """Same tree with every conditional mean moved by ``offset`` (Y rebuilt)."""
        mean = [self.mean[0]] + [m + offset for m in self.mean[1:]]
        Y = [self.Y[0]]
        for d in range(1, self.n + 1):
            Y.append(Y[d - 1][self.parent[d]] + self.x[d] - mean[d])
        return ExactTree(self.n, self.parent, self.x, self.p, self.prob, mean, self.S, Y, self.strategy)


def enumerate_tree(spec, strategy, cap=None):
    """Forward enumeration of the tree measure induced by ``strategy``."""
    cap = node_cap(cap)
    validator = _Validator()
    root = np.zeros(1)
    parent, xs, ps, probs, means, Ss, Ys = (
        [np.full(1, -1)], [np.full(1, np.nan)], [np.ones(1)], [np.ones(1)],
        [np.full(1, np.nan)], [root], [root.copy()],
    )
    hist = np.empty((1, 0))
    for t in range(spec.n):
        M = probs[t].size
        choice = strategy.choose(t, hist, Ss[t], spec)
        validator.check(spec, t, choice, hist)
        rows = choice.picks(M)
        V = choice.row_values()[rows]
        P = choice.probs[rows]
        par, col = np.nonzero(P > 0)
        if par.size > cap:
            raise CapacityError(
                f"trajectory tree needs more than {cap} nodes at depth {t + 1}; "
                "raise the cap or shrink the process"
            )
        x = V[par, col]
        m = choice.means()[rows][par]
        parent.append(par)
        xs.append(x)
        ps.append(P[par, col])
        probs.append(probs[t][par] * P[par, col])
        means.append(m)
        Ss.append(Ss[t][par] + x)
        Ys.append(Ys[t][par] + (x - m))
        hist = np.hstack([hist[par], x[:, None]]) if strategy.uses_history else np.empty((par.size, 0))
    return ExactTree(spec.n, parent, xs, ps, probs, means, Ss, Ys, strategy.name)


def exact_event_probability(spec, strategy, event, cap=None, tree=None):
    event.check_horizon(spec.n)
    tree = tree or enumerate_tree(spec, strategy, cap)
    ok = tree.event_mask(event, spec)
    return float(tree.prob[spec.n][ok].sum())


def _credal_only(spec):
    if not spec.all_credal:
        raise InputError(
            "lower/upper probabilities by backward induction need credal steps "
            "(moment constraints are not a finite polytope)"
        )


def _full_support_leaves(spec, event, cap):
    """Event indicator on every leaf of the full support tree (mixed radix order)."""
    if event.uses_martingale:
        raise InputError(
            "martingale events depend on the strategy's conditional means and "
            "have no strategy-free indicator"
        )
    event.check_horizon(spec.n)
    cap = node_cap(cap)
    ok = np.ones(1, dtype=bool)
    S = np.zeros(1)
    for t, step in enumerate(spec.steps):
        sup = step.support
        if ok.size * sup.size > cap:
            raise CapacityError(f"full support tree exceeds {cap} leaves at depth {t + 1}")
        ok = np.repeat(ok, sup.size)
        S = (S[:, None] + sup[None, :]).ravel()
        x = np.tile(sup, S.size // sup.size)
        pred = event.predicate(t + 1, spec.n, x, S, None, spec.cum_lower[t + 1], spec.cum_upper[t + 1])
        if pred is not None:
            ok = ok & pred
    return ok


def lower_upper_event_probability_dp(spec, event, cap=None):
    """(lower, upper) event probability over every forward-irrelevant process."""
    _credal_only(spec)
    leaf = _full_support_leaves(spec, event, cap).astype(float)
    lo = hi = leaf
    for step in reversed(spec.steps):
        E = step.marginal.extremes
        k = E.shape[1]
        lo = (lo.reshape(-1, k) @ E.T).min(axis=1)
        hi = (hi.reshape(-1, k) @ E.T).max(axis=1)
    return float(lo[0]), float(hi[0])


BRUTE_FORCE_LIMIT = 1 << 24


def nodewise_brute_force(spec, event, limit=BRUTE_FORCE_LIMIT, cap=None):
    """(lower, upper) over all deterministic extreme-per-node assignments.

    Work is (#assignments) x (#leaves) x n; a CapacityError is raised beyond
    ``limit``.
    """
    _credal_only(spec)
    ks = [s.support.size for s in spec.steps]
    ms = [s.marginal.m for s in spec.steps]
    nodes = np.cumprod([1] + ks[:-1])
    leaves = int(np.prod(ks))
    log_assign = float(sum(int(c) * np.log2(m) for c, m in zip(nodes, ms)))
    if log_assign + np.log2(leaves * spec.n) > np.log2(limit):
        raise CapacityError(
            f"brute force needs 2^{log_assign:.1f} assignments; limit is {limit} operations"
        )
    ok = _full_support_leaves(spec, event, cap)
    A = int(round(2**log_assign))
    offsets = np.concatenate([[0], np.cumsum(nodes)])
    choice = np.empty((A, int(offsets[-1])), dtype=np.int64)
    rem = np.arange(A)
    for t in range(spec.n):
        for c in range(int(nodes[t])):
            choice[:, offsets[t] + c] = rem % ms[t]
            rem = rem // ms[t]
    leaf_ids = np.arange(leaves)
    prob = np.ones((A, leaves))
    below = leaves
    for t, step in enumerate(spec.steps):
        below //= ks[t]
        node = leaf_ids // (below * ks[t])
        digit = (leaf_ids // below) % ks[t]
        picked = choice[:, offsets[t] + node]
        prob *= step.marginal.extremes[picked, digit[None, :]]
    values = prob[:, ok].sum(axis=1)
    return float(values.min()), float(values.max())


def check_disintegrability(tree, W, k):
    """max |E[W] - E[E[W | X_{1:k}]]| for a leaf function W.

    The inner conditional expectation is computed per depth-k node from leaf
    probabilities; the outer one weights nodes by their own probability.
    """
    W = np.asarray(W, dtype=float)
    if W.shape != (tree.leaves,):
        raise InputError("W needs one value per leaf")
    if not 0 <= k <= tree.n:
        raise InputError("k must lie in [0, n]")
    leaf_p = tree.prob[tree.n]
    anc = tree.ancestors(k)
    nodes = tree.prob[k].size
    num = np.bincount(anc, weights=leaf_p * W, minlength=nodes)
    den = tree.prob[k]
    cond = np.divide(num, den, out=np.zeros(nodes), where=den > 0)
    lhs = float(leaf_p @ W)
    rhs = float(den @ cond)
    return abs(lhs - rhs), lhs, rhs

"""Seeded Monte Carlo sampling of strategy-induced processes."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import InputError, StrategyViolationError
from .spec import _cdf

#: elements of history kept in memory per chunk when strategies need it
CHUNK_ELEMENTS = 4_000_000
SUM_ONLY_CHUNK = 250_000


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    seed: int
    trial0: int
    draws: np.ndarray
    realized_conditional_means: np.ndarray
    strategy: str = ""

    def __post_init__(self):
        if self.draws.shape != self.realized_conditional_means.shape:
            raise InputError("draws and conditional means disagree in shape")

    @property
    def trials(self):
        return self.draws.shape[0]

    @property
    def n(self):
        return self.draws.shape[1]


@dataclass(frozen=True)
class SimulationResult:
    trials: int
    hits: tuple
    batch: TrajectoryBatch | None = None


class _Validator:
    """Caches admissibility verdicts per (step, distribution)."""

    def __init__(self):
        self._seen = {}

    def check(self, spec, t, choice, history):
        step = spec.steps[t]
        values = choice.row_values()
        used = np.unique(choice.picks(history.shape[0]))
        for r in used:
            v, p = values[r], choice.probs[r]
            key = (id(step), v.tobytes(), p.tobytes(), choice.by_construction)
            verdict = self._seen.get(key)
            if verdict is None:
                verdict = step.row_violation(v, p, choice.by_construction) or ""
                self._seen[key] = verdict
            if verdict:
                where = 0 if choice.pick is None else int(np.flatnonzero(choice.pick == r)[0])
                hist = tuple(float(a) for a in history[where]) if history.shape[1] else ()
                raise StrategyViolationError(
                    f"step {t + 1} after history {hist}: {verdict}", step=t + 1, history=hist
                )


def _draw(seed, trial0, step_index, choice, count):
    cdf = _cdf(choice.probs)
    idx = kernels.draw_step(seed, trial0, count, step_index, cdf, choice.pick)
    rows = choice.picks(count)
    values = choice.row_values()
    x = values[rows, idx]
    means = choice.means()[rows]
    return x, means


def _run_block(spec, strategy, seed, trial0, count, events, keep, validator):
    n = spec.n
    needs_history = keep or strategy.uses_history
    hist = np.empty((count, n)) if needs_history else np.empty((count, 0))
    means = np.empty((count, n)) if keep else None
    S = np.zeros(count)
    Y = np.zeros(count)
    ok = [np.ones(count, dtype=bool) for _ in events]
    for t in range(n):
        h = hist[:, :t] if needs_history else hist
        choice = strategy.choose(t, h, S, spec)
        validator.check(spec, t, choice, h)
        x, m = _draw(seed, trial0, t, choice, count)
        if needs_history:
            hist[:, t] = x
        if keep:
            means[:, t] = m
        S = S + x
        Y = Y + (x - m)
        for e, mask in zip(events, ok):
            pred = e.predicate(t + 1, n, x, S, Y, spec.cum_lower[t + 1], spec.cum_upper[t + 1])
            if pred is not None:
                mask &= pred
    hits = tuple(int(np.count_nonzero(mask)) for mask in ok)
    return hits, (hist if keep else None), means


def _chunk_size(spec, strategy, keep):
    if keep or strategy.uses_history:
        return max(1, CHUNK_ELEMENTS // spec.n)
    return SUM_ONLY_CHUNK


def _simulate_range(spec, strategy, seed, start, stop, events, keep):
    validator = _Validator()
    hits = [0] * len(events)
    draws, means = [], []
    size = _chunk_size(spec, strategy, keep)
    for a in range(start, stop, size):
        b = min(stop, a + size)
        h, d, m = _run_block(spec, strategy, seed, a, b - a, events, keep, validator)
        hits = [u + v for u, v in zip(hits, h)]
        if keep:
            draws.append(d)
            means.append(m)
    return hits, draws, means


def simulate(spec, strategy, trials, seed, events=(), keep=False, trial0=0, workers=1):
    """Run ``trials`` trajectories; count how many satisfy each event.

    Trials are independent substreams, so splitting them across ``workers``
    processes gives the same counts as a serial run.
    """
    trials = int(trials)
    if trials < 1:
        raise InputError("trials must be >= 1")
    events = tuple(events)
    for e in events:
        e.check_horizon(spec.n)
    workers = max(1, int(workers or 1))
    if workers == 1 or trials < 2 * workers:
        hits, draws, means = _simulate_range(spec, strategy, seed, trial0, trial0 + trials, events, keep)
    else:
        edges = np.linspace(trial0, trial0 + trials, workers + 1).astype(np.int64)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_simulate_range, spec, strategy, seed, int(a), int(b), events, keep)
                for a, b in zip(edges[:-1], edges[1:])
            ]
            parts = [f.result() for f in futures]
        hits = [sum(p[0][i] for p in parts) for i in range(len(events))]
        draws = [d for p in parts for d in p[1]]
        means = [m for p in parts for m in p[2]]
    batch = None
    if keep:
        batch = TrajectoryBatch(
            int(seed), int(trial0), np.vstack(draws), np.vstack(means), strategy.name
        )
    return SimulationResult(trials, tuple(hits), batch)


def sample(spec, strategy, trials, seed, trial0=0, workers=1):
    """Seeded batch of trajectories with the chosen conditional means."""
    return simulate(spec, strategy, trials, seed, keep=True, trial0=trial0, workers=workers).batch

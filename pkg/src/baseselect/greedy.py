"""Discrete selection engines and the rule that picks between all engines.

Ties are broken toward the lexicographically smallest class id throughout;
since candidates are stored sorted, that is the smallest candidate index.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np

from .core import SelectionProblem, SelectionResult, SelectionState, finish
from .errors import SelectionError, WrongEngineError

__all__ = [
    "AlgorithmKind",
    "AlgorithmChoice",
    "greedy_on_novel_class",
    "greedy_on_target",
    "random_greedy",
    "choose_algorithm",
    "DEFAULT_GAMMA",
    "LOW_FRACTION",
    "HIGH_FRACTION",
]

DEFAULT_GAMMA = 1.2
LOW_FRACTION = 0.08
HIGH_FRACTION = 0.92


def greedy_on_novel_class(problem: SelectionProblem) -> SelectionResult:
    """Pair-wise greedy: serve novel classes in rounds with their best free candidate.

    Each step takes the (candidate, novel class) pair of highest similarity
    among unchosen candidates and novel classes not yet served this round.
    Optimal when ``m >= K * |N|``, no preselected classes and ``lam == 0``.
    """
    if problem.lam > 0:
        raise WrongEngineError(
            f"greedy on novel classes requires lambda = 0 (got {problem.lam}); "
            "use greedy-target, random-greedy or continuous-double"
        )
    started = time.perf_counter()
    sims = problem.cand_sims
    r, n_novel = sims.shape
    idx = np.arange(r)
    # per novel class: candidates by descending similarity, ties by id
    rankings = [np.lexsort((idx, -sims[:, j])) for j in range(n_novel)]
    pointers = [0] * n_novel
    state = SelectionState(problem)
    waiting = set(range(n_novel))
    gains = []
    for _ in range(problem.m):
        best = None
        for j in sorted(waiting):
            ranking = rankings[j]
            p = pointers[j]
            while state.mask[ranking[p]]:
                p += 1
            pointers[j] = p
            u = int(ranking[p])
            key = (-sims[u, j], u, j)
            if best is None or key < best:
                best = key
        _, u, j = best
        gains.append(state.gain_at(u))
        state.add(u)
        waiting.discard(j)
        if not waiting:
            waiting = set(range(n_novel))
    return finish(problem, state.chosen_indices, "greedy-novel", started, gains)


def greedy_on_target(problem: SelectionProblem) -> SelectionResult:
    """Standard greedy: add the candidate with the largest marginal gain, m times."""
    started = time.perf_counter()
    state = SelectionState(problem)
    gains = []
    for _ in range(problem.m):
        g = state.gains()
        g[state.mask] = -np.inf
        u = int(np.argmax(g))
        gains.append(float(g[u]))
        state.add(u)
    return finish(problem, state.chosen_indices, "greedy-target", started, gains)


def random_greedy(problem: SelectionProblem, seed: int = 0) -> SelectionResult:
    """Random greedy: draw uniformly among the m candidates with the best gains.

    When fewer than m candidates remain, the pool is padded with zero-gain
    placeholders; drawing one adds nothing and the loop draws again, so the
    result always has exactly m classes. Randomness comes from
    ``numpy.random.default_rng(seed)`` (PCG64).
    """
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    m = problem.m
    state = SelectionState(problem)
    gains = []
    while len(state.chosen_indices) < m:
        g = state.gains()
        free = np.flatnonzero(~state.mask)
        pool = free[np.lexsort((free, -g[free]))][:m]
        slot = int(rng.integers(m))
        if slot >= pool.size:
            continue
        u = int(pool[slot])
        gains.append(float(g[u]))
        state.add(u)
    return finish(problem, state.chosen_indices, "random-greedy", started, gains, seed=seed)


class AlgorithmKind(str, enum.Enum):
    GreedyNovelClass = "greedy-novel"
    GreedyTarget = "greedy-target"
    RandomGreedy = "random-greedy"
    ContinuousDouble = "continuous-double"


@dataclass(frozen=True)
class AlgorithmChoice:
    kind: AlgorithmKind
    rationale: str
    gamma: float
    low: float = LOW_FRACTION
    high: float = HIGH_FRACTION


def choose_algorithm(problem: SelectionProblem, gamma: float = DEFAULT_GAMMA) -> AlgorithmChoice:
    """Pick the engine with the best worst-case guarantee for this instance."""
    if not gamma > 1:
        raise SelectionError(f"gamma must exceed 1, got {gamma}")
    m, k, n, r = problem.m, problem.k, problem.n_novel, problem.r
    if problem.lam == 0:
        threshold = gamma * k * n
        if m > threshold:
            kind = AlgorithmKind.GreedyNovelClass
            why = f"lambda = 0 and m = {m} > gamma*K*|N| = {threshold:g}"
        else:
            kind = AlgorithmKind.GreedyTarget
            why = f"lambda = 0 and m = {m} <= gamma*K*|N| = {threshold:g}"
    else:
        lo, hi = LOW_FRACTION * r, HIGH_FRACTION * r
        if m < lo or m > hi:
            kind = AlgorithmKind.RandomGreedy
            why = f"lambda > 0 and m = {m} outside [{lo:g}, {hi:g}] ({LOW_FRACTION}|B_u|, {HIGH_FRACTION}|B_u|)"
        else:
            kind = AlgorithmKind.ContinuousDouble
            why = f"lambda > 0 and m = {m} within [{lo:g}, {hi:g}]"
    return AlgorithmChoice(kind, why, float(gamma))

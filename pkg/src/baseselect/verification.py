"""Exhaustive oracles, property checks and approximation-bound certificates.

The oracles here enumerate subsets and call the from-scratch objective, so
they share no code with the incremental state or the order-statistic DP.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from math import comb

import numpy as np

from .core import SelectionProblem, SelectionResult, finish, objective_batch
from .errors import EnumerationCapError, SelectionError
from .greedy import random_greedy

__all__ = [
    "DEFAULT_ENUM_CAP",
    "brute_force_optimum",
    "subset_table",
    "multilinear_by_enumeration",
    "partial_by_enumeration",
    "order_stats_by_enumeration",
    "average_similarity_Q",
    "SubmodularityReport",
    "check_submodularity",
    "check_monotonicity",
    "BoundCertificate",
    "certify_bounds",
    "FLAG_PRESELECTED",
    "FLAG_NEGATIVE",
    "FLAG_LAMBDA",
    "FLAG_SHORT",
    "FLAG_ASYMPTOTIC",
    "FLAG_NO_ORACLE",
    "FLAG_PRECONDITION",
    "FLAG_NO_GUARANTEE",
]

DEFAULT_ENUM_CAP = 5_000_000
_CHUNK = 20_000
_BOUND_TOL = 1e-9

FLAG_PRESELECTED = "preselected classes present: guarantee scope exceeded"
FLAG_NEGATIVE = "negative similarities present"
FLAG_LAMBDA = "lambda outside the guaranteed range"
FLAG_SHORT = "m < K: top-K average never saturated"
FLAG_ASYMPTOTIC = "asymptotic terms ignored"
FLAG_NO_ORACLE = "exhaustive optimum unavailable: feasibility only"
FLAG_PRECONDITION = "m < K*|N|: optimality guarantee does not apply"
FLAG_NO_GUARANTEE = "no bound is stated for this algorithm"

# flags that leave a certificate unsatisfied without contradicting a guarantee
_VOIDING = {
    FLAG_PRESELECTED, FLAG_NEGATIVE, FLAG_LAMBDA, FLAG_SHORT,
    FLAG_NO_ORACLE, FLAG_PRECONDITION, FLAG_NO_GUARANTEE,
}


def brute_force_optimum(problem: SelectionProblem, cap: int = DEFAULT_ENUM_CAP) -> SelectionResult:
    """Exact maximizer by enumerating every m-subset; ties go to the first in lexicographic order."""
    r, m = problem.r, problem.m
    count = comb(r, m)
    if count > cap:
        raise EnumerationCapError(count, cap)
    started = time.perf_counter()
    k = problem.k
    pre = problem.pre_sims
    best_val, best = -np.inf, None
    combos = itertools.combinations(range(r), m)
    while True:
        block = np.array(list(itertools.islice(combos, _CHUNK)), dtype=int)
        if block.size == 0:
            break
        sims = problem.cand_sims[block]  # (c, m, N)
        if problem.n_pre:
            sims = np.concatenate([np.broadcast_to(pre, (len(block),) + pre.shape), sims], axis=1)
        top = np.sort(sims, axis=1)[:, ::-1][:, :k]
        vals = top.sum(axis=(1, 2)) / (k * problem.n_novel) - problem.diversity_scale * sims.sum(axis=(1, 2))
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best = vals[i], block[i].tolist()
    return finish(problem, best, "brute-force", started)


def subset_table(problem: SelectionProblem, cap: int = 1 << 16):
    """Objective of every subset of the candidates: ``(masks, values)``."""
    r = problem.r
    if (1 << r) > cap:
        raise EnumerationCapError(1 << r, cap)
    codes = np.arange(1 << r)
    masks = ((codes[:, None] >> np.arange(r)) & 1).astype(bool)
    values = np.array([problem.value_of(np.flatnonzero(row)) for row in masks])
    return masks, values


def _weights(masks: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.where(masks, x, 1.0 - x).prod(axis=1)


def multilinear_by_enumeration(problem: SelectionProblem, x, table=None) -> float:
    """``sum_S h(S) prod_{u in S} x_u prod_{u not in S} (1 - x_u)``."""
    masks, values = table if table is not None else subset_table(problem)
    return float(_weights(masks, np.asarray(x, dtype=float)) @ values)


def partial_by_enumeration(problem: SelectionProblem, x, index: int, table=None) -> float:
    """``F(x with x_u = 1) - F(x with x_u = 0)`` by enumeration."""
    table = table if table is not None else subset_table(problem)
    hi = np.array(x, dtype=float)
    lo = hi.copy()
    hi[index], lo[index] = 1.0, 0.0
    return multilinear_by_enumeration(problem, hi, table) - multilinear_by_enumeration(problem, lo, table)


def order_stats_by_enumeration(problem: SelectionProblem, x, novel: str, exclude: str):
    """``P(s_[j] >= q_[i])`` as a (K, |B|) array plus the rank order of ids.

    Ranks sort base classes by similarity to ``novel`` descending, ties by id.
    """
    x = np.array(x, dtype=float)
    x[problem.candidate_ids.index(exclude)] = 0.0
    col = problem.novel_ids.index(novel)
    labels = list(problem.preselected_ids) + list(problem.candidate_ids)
    sims = np.concatenate([problem.pre_sims[:, col], problem.cand_sims[:, col]])
    order = sorted(range(len(labels)), key=lambda t: (-sims[t], labels[t]))
    s, r, k = problem.n_pre, problem.r, problem.k
    geq = np.zeros((k, len(labels)))
    for code in range(1 << r):
        present = np.array([t < s or (code >> (t - s)) & 1 for t in range(len(labels))], dtype=bool)
        w = 1.0
        for u in range(r):
            w *= x[u] if (code >> u) & 1 else 1.0 - x[u]
        if w == 0.0:
            continue
        counts = np.cumsum(present[order])
        for j in range(1, k + 1):
            geq[j - 1] += w * (counts >= j)
    return geq, tuple(labels[t] for t in order)


def average_similarity_Q(problem: SelectionProblem) -> float:
    """Mean similarity over all (candidate, novel class) pairs."""
    return float(problem.cand_sims.mean())


@dataclass
class SubmodularityReport:
    trials: int
    lattice_violations: int
    diminishing_violations: int
    worst_lattice_margin: float
    worst_diminishing_margin: float
    tolerance: float

    @property
    def violations(self) -> int:
        return self.lattice_violations + self.diminishing_violations

    @property
    def ok(self) -> bool:
        return self.violations == 0


def _random_masks(rng, trials: int, r: int) -> np.ndarray:
    density = rng.random((trials, 1))
    return rng.random((trials, r)) < density


def check_submodularity(problem: SelectionProblem, trials: int = 1000, seed: int = 0,
                        tol: float = 1e-12) -> SubmodularityReport:
    """Sample the lattice and diminishing-returns inequalities.

    Margins are ``rhs - lhs`` of each inequality, so a negative worst margin
    beyond ``-tol`` is a violation.
    """
    if trials < 1:
        raise SelectionError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    r = problem.r
    h = lambda masks: objective_batch(problem, masks)

    x, y = _random_masks(rng, trials, r), _random_masks(rng, trials, r)
    lattice = h(x) + h(y) - h(x & y) - h(x | y)

    big = _random_masks(rng, trials, r)
    # make room for an outside element where the sampled superset is full
    full = big.all(axis=1)
    big[full, rng.integers(r, size=int(full.sum()))] = False
    scores = rng.random((trials, r))
    scores[big] = -1.0
    pick = scores.argmax(axis=1)
    small = big & _random_masks(rng, trials, r)
    add = np.zeros_like(big)
    add[np.arange(trials), pick] = True
    dr = (h(small | add) - h(small)) - (h(big | add) - h(big))

    return SubmodularityReport(
        trials=trials,
        lattice_violations=int((lattice < -tol).sum()),
        diminishing_violations=int((dr < -tol).sum()),
        worst_lattice_margin=float(lattice.min()),
        worst_diminishing_margin=float(dr.min()),
        tolerance=tol,
    )


def check_monotonicity(problem: SelectionProblem, trials: int = 1000, seed: int = 0,
                       tol: float = 1e-12) -> tuple[int, float]:
    """Count sampled pairs ``U <= V`` with ``h(U) > h(V) + tol``; also the worst margin."""
    rng = np.random.default_rng(seed)
    big = _random_masks(rng, trials, problem.r)
    small = big & _random_masks(rng, trials, problem.r)
    margin = objective_batch(problem, big) - objective_batch(problem, small)
    return int((margin < -tol).sum()), float(margin.min())


@dataclass
class BoundCertificate:
    algorithm: str
    guarantee: str | None
    h_alg: float
    h_opt: float | None
    Q: float
    C1: float | None
    C2: float | None
    bound_value: float | None
    satisfied: bool
    assumption_flags: tuple[str, ...] = ()
    stderr: float | None = None
    trials: int = 1
    tolerance: float = _BOUND_TOL

    @property
    def voided(self) -> bool:
        """True when some flag means the guarantee does not cover this instance."""
        return any(f in _VOIDING for f in self.assumption_flags)

    @property
    def margin(self) -> float | None:
        if self.bound_value is None:
            return None
        slack = 3.0 * self.stderr if self.stderr else 0.0
        return self.h_alg + slack - self.bound_value


def nonmonotone_bound_constants(r: int, m: int, lam: float) -> tuple[float, float, float, float]:
    """``(random_factor, C1, continuous_factor, C2)`` of the non-monotone bounds."""
    e = math.e
    random_factor = (1.0 - m / (e * r)) / e
    c1 = 1.0 / e + (1.0 - 1.0 / e) * m / r - (1.0 - 1.0 / e) * lam
    root = 2.0 * math.sqrt((r - m) * m)
    continuous_factor = root / (root + r)  # (1 + r / root)^-1, 0 when m == r
    c2 = (1.0 - lam) * r / (root + r)
    return random_factor, c1, continuous_factor, c2


def certify_bounds(
    problem: SelectionProblem,
    result: SelectionResult,
    trials_for_expectation: int = 200,
    cap: int = DEFAULT_ENUM_CAP,
    steps: int = 100,
) -> BoundCertificate:
    """Check ``result`` against the guarantee that covers its algorithm.

    Randomized engines are re-run on ``trials_for_expectation`` consecutive
    seeds starting at ``result.seed``; the mean is compared with the bound,
    allowing three standard errors.
    """
    flags: list[str] = []
    if problem.n_pre:
        flags.append(FLAG_PRESELECTED)
    if (problem.cand_sims < 0).any() or (problem.pre_sims < 0).any():
        flags.append(FLAG_NEGATIVE)
    q = average_similarity_Q(problem)
    try:
        h_opt = brute_force_optimum(problem, cap).objective
    except EnumerationCapError:
        h_opt = None
        flags.append(FLAG_NO_ORACLE)

    alg = result.algorithm
    h_alg = result.objective
    stderr = None
    trials = 1
    c1 = c2 = None
    bound = None
    guarantee = None
    lam, m, k = problem.lam, problem.m, problem.k

    if alg == "greedy-novel":
        guarantee = "optimality"
        if lam != 0:
            flags.append(FLAG_LAMBDA)
        if m < k * problem.n_novel:
            flags.append(FLAG_PRECONDITION)
        bound = h_opt
    elif alg == "greedy-target":
        guarantee = "monotone greedy"
        if lam != 0:
            flags.append(FLAG_LAMBDA)
        if m < k:
            flags.append(FLAG_SHORT)
        if h_opt is not None:
            bound = (1.0 - 1.0 / math.e) * h_opt + q / math.e
    elif alg in ("random-greedy", "continuous-double"):
        if not 0.0 < lam < 1.0 / (math.e - 1.0):
            flags.append(FLAG_LAMBDA)
        if m < k:
            flags.append(FLAG_SHORT)
        flags.append(FLAG_ASYMPTOTIC)
        rf, c1, cf, c2 = nonmonotone_bound_constants(problem.r, m, lam)
        if alg == "random-greedy":
            guarantee = "random greedy"
            base = result.seed or 0
            values = np.array([
                random_greedy(problem, seed=base + t).objective
                for t in range(trials_for_expectation)
            ])
            trials = len(values)
            h_alg = float(values.mean())
            stderr = float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
            if h_opt is not None:
                bound = rf * h_opt + c1 * q
        else:
            guarantee = "continuous double greedy"
            if h_opt is not None:
                bound = cf * h_opt + c2 * q
    else:
        flags.append(FLAG_NO_GUARANTEE)

    if bound is None:
        satisfied = False
    else:
        slack = 3.0 * stderr if stderr else 0.0
        satisfied = bool(h_alg + slack >= bound - _BOUND_TOL)
    return BoundCertificate(
        algorithm=alg, guarantee=guarantee, h_alg=h_alg, h_opt=h_opt, Q=q,
        C1=c1, C2=c2, bound_value=bound, satisfied=satisfied,
        assumption_flags=tuple(dict.fromkeys(flags)), stderr=stderr, trials=trials,
    )

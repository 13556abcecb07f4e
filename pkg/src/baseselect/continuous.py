"""Multilinear relaxation of the selection objective.

``F(x)`` is the expected objective when each candidate ``u`` is included
independently with probability ``x[u]`` (preselected classes always are).
Both ``F`` and its partial derivatives are computed exactly from the
distribution of per-novel order statistics, obtained by a dynamic program
over the base classes sorted by similarity:

    G[j][i] = P(at least j of the i most similar classes are present)
            = (1 - p_i) G[j][i-1] + p_i G[j-1][i-1],   G[0][.] = 1, G[j>0][0] = 0

with ``p_i = 1`` for preselected classes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import SelectionProblem, SelectionResult, finish
from .errors import BracketError, BudgetError, InvalidSubsetError, SelectionError

__all__ = [
    "FractionalSolution",
    "OrderStatProbTable",
    "order_stat_probs",
    "multilinear_value",
    "multilinear_partial",
    "multilinear_gradient",
    "water_level",
    "continuous_double_greedy",
    "pipage_round",
    "continuous_pipeline",
    "DEFAULT_STEPS",
]

DEFAULT_STEPS = 100
_SNAP = 1e-12


@dataclass
class FractionalSolution:
    """Inclusion probabilities over the candidates, in candidate-id order."""

    ids: tuple[str, ...]
    x: np.ndarray
    budget: int
    y: np.ndarray | None = None

    def __post_init__(self):
        self.ids = tuple(self.ids)
        self.x = np.asarray(self.x, dtype=float)
        if self.x.shape != (len(self.ids),):
            raise SelectionError("fractional solution length does not match its ids")

    def as_dict(self) -> dict[str, float]:
        return {c: float(v) for c, v in zip(self.ids, self.x)}

    @property
    def total(self) -> float:
        return float(self.x.sum())

    def support(self) -> tuple[str, ...]:
        return tuple(c for c, v in zip(self.ids, self.x) if v > 0)


def _as_vector(problem: SelectionProblem, x) -> np.ndarray:
    if isinstance(x, FractionalSolution):
        if x.ids == problem.candidate_ids:
            vec = x.x
        else:
            vec = _as_vector(problem, x.as_dict())
    elif isinstance(x, Mapping):
        unknown = set(x) - set(problem.candidate_ids)
        if unknown:
            raise InvalidSubsetError(unknown, "the candidate set")
        vec = np.array([float(x.get(c, 0.0)) for c in problem.candidate_ids])
    else:
        vec = np.asarray(x, dtype=float)
    if vec.shape != (problem.r,):
        raise SelectionError(f"expected {problem.r} coordinates, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)) or vec.min(initial=0) < -1e-9 or vec.max(initial=0) > 1 + 1e-9:
        raise SelectionError("fractional coordinates must lie in [0, 1]")
    return np.clip(vec, 0.0, 1.0)


class _Layout:
    """Per-novel descending order of all base classes (preselected first in item numbering)."""

    def __init__(self, problem: SelectionProblem):
        self.problem = problem
        s = problem.n_pre
        values = np.concatenate([problem.pre_sims, problem.cand_sims], axis=0)
        labels = list(problem.preselected_ids) + list(problem.candidate_ids)
        rank = np.empty(len(labels), dtype=int)
        rank[np.argsort(np.array(labels, dtype=object), kind="stable")] = np.arange(len(labels))
        self.item = np.stack(
            [np.lexsort((rank, -values[:, j])) for j in range(values.shape[1])], axis=1
        )  # (B, N): item at each rank
        self.q = np.take_along_axis(values, self.item, axis=0)  # (B, N) descending
        self.labels = labels
        self.n_pre = s

    def item_probs(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate([np.ones(self.n_pre), x])

    def run(self, probs: np.ndarray, keep: str):
        """Run the DP for a batch of item-probability vectors ``probs`` (..., B).

        Returns the history of ``G`` after each rank: for ``keep='K'`` only row
        K (..., B, N); for ``keep='sum'`` rows 1..K summed; for ``keep='all'``
        rows 1..K (..., K, B, N).
        """
        k = self.problem.k
        p = probs[..., self.item]  # (..., B, N)
        batch = p.shape[:-2]
        n_items, n_novel = p.shape[-2:]
        g = np.zeros((k + 1,) + batch + (n_novel,))
        g[0] = 1.0
        if keep == "all":
            hist = np.empty((k,) + batch + (n_items, n_novel))
        else:
            hist = np.empty(batch + (n_items, n_novel))
        for i in range(n_items):
            pi = p[..., i, :]
            g[1:] = (1.0 - pi) * g[1:] + pi * g[:-1]
            if keep == "K":
                hist[..., i, :] = g[k]
            elif keep == "sum":
                hist[..., i, :] = g[1:].sum(axis=0)
            else:
                hist[..., i, :] = g[1:]
        return hist


def _increments(hist: np.ndarray) -> np.ndarray:
    """Per-rank differences along the rank axis (second to last)."""
    return np.diff(hist, axis=-2, prepend=0.0)


@dataclass
class OrderStatProbTable:
    """``geq[j-1, i-1] = P(s_[j] >= q_[i])`` for one novel class."""

    novel_id: str
    thresholds: np.ndarray
    ids: tuple[str, ...]
    geq: np.ndarray = field(repr=False)

    def eq(self) -> np.ndarray:
        """``P(s_[j] = q_[i])``: the j-th largest present class is the one at rank i."""
        return np.diff(self.geq, axis=-1, prepend=0.0)

    def short(self) -> np.ndarray:
        """``P(fewer than j classes present)`` for j = 1..K."""
        return 1.0 - self.geq[:, -1]


def order_stat_probs(problem: SelectionProblem, x, novel: str, exclude: str) -> OrderStatProbTable:
    """Order-statistic probabilities for ``novel`` at ``x`` with ``exclude`` forced out."""
    if exclude not in problem.candidate_ids:
        raise InvalidSubsetError([exclude], "the candidate set")
    if novel not in problem.novel_ids:
        raise InvalidSubsetError([novel], "the novel set")
    vec = _as_vector(problem, x).copy()
    vec[problem.candidate_ids.index(exclude)] = 0.0
    lay = _Layout(problem)
    j = problem.novel_ids.index(novel)
    hist = lay.run(lay.item_probs(vec), keep="all")  # (K, B, N)
    return OrderStatProbTable(
        novel_id=novel,
        thresholds=lay.q[:, j].copy(),
        ids=tuple(lay.labels[t] for t in lay.item[:, j]),
        geq=hist[:, :, j].copy(),
    )


def _value(lay: _Layout, x: np.ndarray) -> float:
    p = lay.problem
    hist = lay.run(lay.item_probs(x), keep="sum")  # (B, N)
    expected_topk = (_increments(hist) * lay.q).sum()
    first = expected_topk / (p.k * p.n_novel)
    totals = x @ p.cand_sims.sum(axis=1) + p.pre_sims.sum()
    return float(first - p.diversity_scale * totals)


def _gradient(lay: _Layout, x: np.ndarray) -> np.ndarray:
    p = lay.problem
    r = p.r
    probs = np.tile(lay.item_probs(x), (r, 1))
    probs[np.arange(r), lay.n_pre + np.arange(r)] = 0.0
    hist = lay.run(probs, keep="K")  # (r, B, N)
    kth = _increments(hist)
    f_u = p.cand_sims  # (r, N)
    excess = np.maximum(f_u[:, None, :] - lay.q[None, :, :], 0.0)  # (r, B, N)
    # fewer than K present: the new class enters the top-K outright
    short = 1.0 - hist[:, -1, :]
    top = ((kth * excess).sum(axis=1) + short * f_u).sum(axis=1) / (p.k * p.n_novel)
    return top - p.diversity_scale * f_u.sum(axis=1)


def multilinear_value(problem: SelectionProblem, x) -> float:
    """Exact multilinear extension ``F(x)``."""
    return _value(_Layout(problem), _as_vector(problem, x))


def multilinear_gradient(problem: SelectionProblem, x) -> np.ndarray:
    """All partials ``F(x or u) - F(x and not u)``, in candidate order."""
    return _gradient(_Layout(problem), _as_vector(problem, x))


def multilinear_partial(problem: SelectionProblem, x, label: str) -> float:
    (u,) = problem.indices([label])
    return float(multilinear_gradient(problem, x)[u])


def water_level(a: np.ndarray, b: np.ndarray, m: int, tol: float = 1e-9):
    """Find the level ``l`` at which the ascent rates of x sum to ``m``.

    Rates are ``a'/(a'+b')`` for x and ``b'/(a'+b')`` for the descent of y, with
    ``a' = max(a - l, 0)`` and ``b' = max(b + l, 0)``; a coordinate with both
    zero is frozen. The rate sum is nonincreasing in ``l`` and can jump; at the
    located level the two bracketing rate vectors are blended so the sum is
    exactly ``m``. Returns ``(level, dx, dy)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    def rates(level):
        ap = np.maximum(a - level, 0.0)
        bp = np.maximum(b + level, 0.0)
        den = ap + bp
        safe = np.where(den > 0, den, 1.0)
        return np.where(den > 0, ap / safe, 0.0), np.where(den > 0, bp / safe, 0.0)

    lo = min(a.min(), (-b).min()) - 1.0
    hi = max(a.max(), (-b).max()) + 1.0
    s_lo = rates(lo)[0].sum()
    s_hi = rates(hi)[0].sum()
    if not (s_lo >= m - 1e-12 and s_hi < m):
        raise BracketError(lo, hi, s_lo, s_hi, m)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rates(mid)[0].sum() >= m:
            lo = mid
        else:
            hi = mid
    dx_lo, dy_lo = rates(lo)
    dx_hi, dy_hi = rates(hi)
    s_lo, s_hi = dx_lo.sum(), dx_hi.sum()
    theta = 1.0 if s_lo <= s_hi else min(1.0, (m - s_hi) / (s_lo - s_hi))
    dx = theta * dx_lo + (1.0 - theta) * dx_hi
    dy = theta * dy_lo + (1.0 - theta) * dy_hi
    return 0.5 * (lo + hi), dx, dy


def continuous_double_greedy(
    problem: SelectionProblem,
    steps: int = DEFAULT_STEPS,
    trace: list | None = None,
) -> FractionalSolution:
    """Run the continuous double greedy flow for ``steps`` Euler steps.

    ``x`` grows from the empty set and ``y`` shrinks from the full candidate
    set; each step moves ``x`` by ``dx/steps`` and ``y`` by ``-dy/steps``.
    When ``trace`` is a list, ``(x, y)`` copies are appended after each step.
    """
    if steps < 1:
        raise SelectionError(f"steps must be >= 1, got {steps}")
    lay = _Layout(problem)
    x = np.zeros(problem.r)
    y = np.ones(problem.r)
    for _ in range(steps):
        a = _gradient(lay, x)
        b = -_gradient(lay, y)
        _, dx, dy = water_level(a, b, problem.m)
        x = np.clip(x + dx / steps, 0.0, 1.0)
        # rates keep dx + dy <= 1; this only absorbs rounding where x meets y
        y = np.maximum(np.clip(y - dy / steps, 0.0, 1.0), x)
        if trace is not None:
            trace.append((x.copy(), y.copy()))
    return FractionalSolution(problem.candidate_ids, x, problem.m, y=y)


def _fractional(x: np.ndarray) -> np.ndarray:
    return np.flatnonzero((x > _SNAP) & (x < 1.0 - _SNAP))


def _snap(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    x[x <= _SNAP] = 0.0
    x[x >= 1.0 - _SNAP] = 1.0
    return x


def pipage_round(
    problem: SelectionProblem,
    x,
    seed: int | None = None,
    randomized: bool = False,
    trace: list | None = None,
    algorithm: str = "pipage",
) -> SelectionResult:
    """Round a budget-feasible fractional point to exactly ``m`` classes.

    Deterministic mode pairs the two fractional coordinates with the smallest
    ids and moves to whichever end of the segment ``x + t(e_i - e_j)`` has the
    larger ``F``; ``F`` is convex along that segment, so it never decreases.
    ``randomized=True`` picks a random pair and a random end with the
    probabilities that keep ``E[x]`` fixed, using ``seed``.
    ``trace`` receives ``F`` before the first and after every step.
    """
    started = time.perf_counter()
    vec = _as_vector(problem, x)
    total = float(vec.sum())
    if abs(total - problem.m) > 1e-6:
        raise BudgetError(total, problem.m)
    lay = _Layout(problem)
    rng = np.random.default_rng(seed) if randomized else None
    vec = _snap(vec)
    if trace is not None:
        trace.append(_value(lay, vec))
    frac = _fractional(vec)
    while frac.size >= 2:
        if rng is None:
            i, j = int(frac[0]), int(frac[1])
        else:
            i, j = (int(v) for v in rng.choice(frac, size=2, replace=False))
        xi, xj = vec[i], vec[j]
        up = vec.copy()  # mass moves j -> i
        if 1.0 - xi <= xj:
            up[i], up[j] = 1.0, xj - (1.0 - xi)
        else:
            up[i], up[j] = xi + xj, 0.0
        down = vec.copy()  # mass moves i -> j
        if 1.0 - xj <= xi:
            down[j], down[i] = 1.0, xi - (1.0 - xj)
        else:
            down[j], down[i] = xi + xj, 0.0
        up, down = _snap(up), _snap(down)
        if rng is None:
            f_up, f_down = _value(lay, up), _value(lay, down)
            vec, f_now = (up, f_up) if f_up >= f_down else (down, f_down)
        else:
            d_up = up[i] - xi
            d_down = xi - down[i]
            vec = up if rng.random() < d_down / (d_up + d_down) else down
            f_now = _value(lay, vec) if trace is not None else None
        if trace is not None:
            trace.append(f_now)
        frac = _fractional(vec)
    if frac.size == 1:
        vec[frac[0]] = float(np.round(vec[frac[0]]))
    chosen = np.flatnonzero(vec >= 0.5)
    if chosen.size != problem.m:
        raise BudgetError(float(vec.sum()), problem.m)
    return finish(problem, chosen.tolist(), algorithm, started, seed=seed)


def continuous_pipeline(
    problem: SelectionProblem,
    steps: int = DEFAULT_STEPS,
    seed: int | None = None,
    randomized_rounding: bool = False,
) -> SelectionResult:
    """Continuous double greedy followed by pipage rounding."""
    started = time.perf_counter()
    frac = continuous_double_greedy(problem, steps)
    res = pipage_round(problem, frac, seed=seed, randomized=randomized_rounding,
                       algorithm="continuous-double")
    return SelectionResult(
        chosen=res.chosen, objective=res.objective, algorithm=res.algorithm,
        step_gains=res.step_gains, seed=seed, elapsed=time.perf_counter() - started,
    )

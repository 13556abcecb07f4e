"""Problem definition: embeddings, similarity matrix, objective and marginal gains.

The objective scored for a candidate set ``U`` is

    h(U) = 1/|N| sum_n 1/K * topk_n(B_s + U)
           - lam/|N| sum_n 1/(|B_s| + m) * sum_{b in B_s + U} f(n, b)

where ``topk_n`` is the sum of the K largest similarities to novel class ``n``.
When fewer than K base classes are present, all of them are summed.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    AlreadyChosenError,
    DimensionMismatchError,
    InvalidProblemError,
    InvalidSubsetError,
    SelectionError,
    ZeroVectorError,
)

__all__ = [
    "EmbeddingTable",
    "SimilarityMatrix",
    "SelectionProblem",
    "SelectionState",
    "SelectionResult",
    "SimilarityRatio",
    "cosine_similarity",
    "build_similarity_matrix",
    "max_k_sum",
    "objective",
    "objective_batch",
    "marginal_gain",
    "similarity_ratio",
]

_RANGE_SLACK = 1e-9


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine of the angle between two centroids, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(a.shape[-1], b.shape[-1])
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError()
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Class centroids keyed by id, stored in sorted id order."""

    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        ids = tuple(self.ids)
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if not ids:
            raise InvalidProblemError("embedding table is empty")
        if any((not isinstance(i, str)) or i == "" for i in ids):
            raise InvalidProblemError("class ids must be non-empty strings")
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise InvalidProblemError(f"duplicate class ids: {dup}")
        if vectors.shape[0] != len(ids):
            raise InvalidProblemError(
                f"{len(ids)} ids but {vectors.shape[0]} centroid rows"
            )
        if vectors.shape[1] < 1:
            raise InvalidProblemError("centroid dimension must be at least 1")
        if not np.all(np.isfinite(vectors)):
            raise InvalidProblemError("centroids must be finite")
        order = sorted(range(len(ids)), key=ids.__getitem__)
        vectors = vectors[order].copy()
        vectors.flags.writeable = False
        object.__setattr__(self, "ids", tuple(ids[i] for i in order))
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.ids)})

    @classmethod
    def from_mapping(cls, entries: Mapping[str, Sequence[float]]) -> "EmbeddingTable":
        ids = list(entries)
        if not ids:
            raise InvalidProblemError("embedding table is empty")
        dims = {len(entries[i]) for i in ids}
        if len(dims) > 1:
            first = len(entries[ids[0]])
            bad = next(i for i in ids if len(entries[i]) != first)
            raise DimensionMismatchError(first, len(entries[bad]), f"centroid {bad!r}")
        return cls(tuple(ids), np.array([entries[i] for i in ids], dtype=float))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, label) -> bool:
        return label in self._index

    def __getitem__(self, label: str) -> np.ndarray:
        return self.vectors[self._index[label]]

    def subset(self, labels: Iterable[str]) -> "EmbeddingTable":
        labels = list(labels)
        missing = [c for c in labels if c not in self._index]
        if missing:
            raise InvalidSubsetError(missing, "the embedding table")
        return EmbeddingTable(tuple(labels), self.vectors[[self._index[c] for c in labels]])


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Dense base-by-novel similarity table; rows are base ids, columns novel ids."""

    base_ids: tuple[str, ...]
    novel_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        base_ids = tuple(self.base_ids)
        novel_ids = tuple(self.novel_ids)
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape != (len(base_ids), len(novel_ids)):
            raise InvalidProblemError(
                f"matrix shape {values.shape} does not match "
                f"{len(base_ids)} base x {len(novel_ids)} novel ids"
            )
        for name, axis in (("base", base_ids), ("novel", novel_ids)):
            if len(set(axis)) != len(axis):
                raise InvalidProblemError(f"duplicate {name} ids in similarity matrix")
            if any(not isinstance(c, str) or c == "" for c in axis):
                raise InvalidProblemError(f"{name} ids must be non-empty strings")
        if not np.all(np.isfinite(values)):
            raise InvalidProblemError("similarity matrix has non-finite entries")
        if values.size and (values.min() < -1 - _RANGE_SLACK or values.max() > 1 + _RANGE_SLACK):
            raise InvalidProblemError("similarities must lie in [-1, 1]")
        values.flags.writeable = False
        object.__setattr__(self, "base_ids", base_ids)
        object.__setattr__(self, "novel_ids", novel_ids)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_row", {c: i for i, c in enumerate(base_ids)})
        object.__setattr__(self, "_col", {c: i for i, c in enumerate(novel_ids)})

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def row_index(self, label: str) -> int:
        return self._row[label]

    def col_index(self, label: str) -> int:
        return self._col[label]

    def get(self, base: str, novel: str) -> float:
        return float(self.values[self._row[base], self._col[novel]])


def build_similarity_matrix(base: EmbeddingTable, novel: EmbeddingTable) -> SimilarityMatrix:
    """Cosine similarity between every base and novel centroid."""
    if base.dim != novel.dim:
        raise DimensionMismatchError(base.dim, novel.dim, "novel centroids")
    for table in (base, novel):
        norms = np.linalg.norm(table.vectors, axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise ZeroVectorError(table.ids[zero[0]])
    bn = base.vectors / np.linalg.norm(base.vectors, axis=1, keepdims=True)
    nn = novel.vectors / np.linalg.norm(novel.vectors, axis=1, keepdims=True)
    return SimilarityMatrix(base.ids, novel.ids, np.clip(bn @ nn.T, -1.0, 1.0))


def max_k_sum(y: Sequence[float], k: int) -> float:
    """Sum of the ``k`` largest entries of ``y`` (all of them when ``len(y) < k``)."""
    if k < 1:
        raise SelectionError(f"k must be positive, got {k}")
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        return 0.0
    return float(np.sort(y)[::-1][:k].sum())


def _sorted_unique(ids, what: str) -> tuple[str, ...]:
    if isinstance(ids, str):
        raise InvalidProblemError(f"{what} must be a collection of ids, not a string")
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise InvalidProblemError(f"duplicate ids in {what}")
    return tuple(sorted(ids))


@dataclass(frozen=True, eq=False)
class SelectionProblem:
    """One instance of the cardinality-constrained selection problem.

    ``candidate_ids`` is the pool to choose ``m`` classes from, ``preselected_ids``
    are always part of the base set. Ids are kept sorted; engines refer to
    candidates by their position in ``candidate_ids``.
    """

    matrix: SimilarityMatrix
    m: int
    k: int = 1
    lam: float = 0.0
    candidate_ids: tuple[str, ...] | None = None
    preselected_ids: tuple[str, ...] = ()
    novel_ids: tuple[str, ...] | None = None

    cand_sims: np.ndarray = field(init=False, repr=False, compare=False)
    pre_sims: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mat = self.matrix
        pre = _sorted_unique(self.preselected_ids, "preselected ids")
        if self.candidate_ids is None:
            cand = tuple(sorted(set(mat.base_ids) - set(pre)))
        else:
            cand = _sorted_unique(self.candidate_ids, "candidate ids")
        if self.novel_ids is None:
            novel = tuple(sorted(mat.novel_ids))
        else:
            novel = _sorted_unique(self.novel_ids, "novel ids")

        for ids, axis, name in ((cand, mat._row, "candidate"), (pre, mat._row, "preselected")):
            missing = [c for c in ids if c not in axis]
            if missing:
                raise InvalidSubsetError(missing, f"the matrix rows ({name} ids)")
        missing = [c for c in novel if c not in mat._col]
        if missing:
            raise InvalidSubsetError(missing, "the matrix columns (novel ids)")
        overlap = set(cand) & set(pre)
        if overlap:
            raise InvalidProblemError(f"ids both candidate and preselected: {sorted(overlap)}")
        if not cand:
            raise InvalidProblemError("no candidate classes")
        if not novel:
            raise InvalidProblemError("no novel classes")
        if isinstance(self.m, bool) or int(self.m) != self.m or not 1 <= self.m <= len(cand):
            raise InvalidProblemError(f"m must be an integer in [1, {len(cand)}], got {self.m}")
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise InvalidProblemError(f"K must be a positive integer, got {self.k}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise InvalidProblemError(f"lambda must be finite and >= 0, got {self.lam}")

        cols = [mat._col[c] for c in novel]
        cand_sims = mat.values[np.ix_([mat._row[c] for c in cand], cols)]
        pre_sims = mat.values[np.ix_([mat._row[c] for c in pre], cols)].reshape(len(pre), len(cols))
        cand_sims.flags.writeable = False
        pre_sims.flags.writeable = False
        set_ = object.__setattr__
        set_(self, "candidate_ids", cand)
        set_(self, "preselected_ids", pre)
        set_(self, "novel_ids", tuple(novel))
        set_(self, "m", int(self.m))
        set_(self, "k", int(self.k))
        set_(self, "lam", float(self.lam))
        set_(self, "cand_sims", cand_sims)
        set_(self, "pre_sims", pre_sims)
        set_(self, "_cand_index", {c: i for i, c in enumerate(cand)})

    @property
    def r(self) -> int:
        """Number of candidates."""
        return len(self.candidate_ids)

    @property
    def n_novel(self) -> int:
        return len(self.novel_ids)

    @property
    def n_pre(self) -> int:
        return len(self.preselected_ids)

    @property
    def diversity_scale(self) -> float:
        """Coefficient on the summed similarities in the diversity term."""
        return self.lam / (self.n_novel * (self.n_pre + self.m))

    def replace(self, **changes) -> "SelectionProblem":
        kwargs = dict(
            matrix=self.matrix, m=self.m, k=self.k, lam=self.lam,
            candidate_ids=self.candidate_ids, preselected_ids=self.preselected_ids,
            novel_ids=self.novel_ids,
        )
        kwargs.update(changes)
        return SelectionProblem(**kwargs)

    def indices(self, labels: Iterable[str]) -> list[int]:
        """Candidate positions of ``labels``; raises if any is not a candidate."""
        labels = list(labels)
        missing = [c for c in labels if c not in self._cand_index]
        if missing:
            raise InvalidSubsetError(missing, "the candidate set")
        if len(set(labels)) != len(labels):
            raise InvalidProblemError("duplicate ids in selection")
        return [self._cand_index[c] for c in labels]

    def labels(self, indices: Iterable[int]) -> tuple[str, ...]:
        return tuple(self.candidate_ids[i] for i in indices)

    def value_of(self, indices: Sequence[int]) -> float:
        """Objective of a candidate index set, computed from scratch."""
        sims = np.concatenate([self.pre_sims, self.cand_sims[list(indices)]], axis=0)
        if sims.shape[0] == 0:
            return 0.0
        top = np.sort(sims, axis=0)[::-1][: self.k]
        first = top.sum() / (self.k * self.n_novel)
        return float(first - self.diversity_scale * sims.sum())


def objective(problem: SelectionProblem, chosen: Iterable[str]) -> float:
    """Objective value of the candidate subset ``chosen``."""
    return problem.value_of(problem.indices(chosen))


def objective_batch(problem: SelectionProblem, masks: np.ndarray) -> np.ndarray:
    """Objective for many subsets at once; ``masks`` is a (trials, r) boolean array."""
    masks = np.asarray(masks, dtype=bool)
    if masks.ndim != 2 or masks.shape[1] != problem.r:
        raise SelectionError(f"masks must have shape (trials, {problem.r})")
    trials = masks.shape[0]
    vals = np.where(masks[:, :, None], problem.cand_sims[None], -np.inf)
    if problem.n_pre:
        pre = np.broadcast_to(problem.pre_sims, (trials,) + problem.pre_sims.shape)
        vals = np.concatenate([pre, vals], axis=1)
    k = min(problem.k, vals.shape[1])
    top = -np.partition(-vals, k - 1, axis=1)[:, :k] if k < vals.shape[1] else vals
    top = np.where(np.isfinite(top), top, 0.0)
    first = top.sum(axis=(1, 2)) / (problem.k * problem.n_novel)
    totals = masks.astype(float) @ problem.cand_sims.sum(axis=1) + problem.pre_sims.sum()
    return first - problem.diversity_scale * totals


class SelectionState:
    """Incremental bookkeeping for a growing selection.

    Keeps, per novel class, a min-heap of the K largest similarities over
    ``B_s`` plus the chosen candidates and the running total similarity, so a
    marginal gain costs O(|N|) and an insertion O(|N| log K).
    """

    def __init__(self, problem: SelectionProblem):
        self.problem = problem
        n = problem.n_novel
        self.chosen: list[str] = []
        self.chosen_indices: list[int] = []
        self.mask = np.zeros(problem.r, dtype=bool)
        self.heaps: list[list[float]] = [[] for _ in range(n)]
        self.sum_all = np.zeros(n)
        self.kth = np.full(n, -np.inf)
        self.full = np.zeros(n, dtype=bool)
        for row in problem.pre_sims:
            self._push(row)

    def _push(self, row: np.ndarray) -> None:
        k = self.problem.k
        for j, v in enumerate(row.tolist()):
            heap = self.heaps[j]
            if len(heap) < k:
                heapq.heappush(heap, v)
            elif v > heap[0]:
                heapq.heapreplace(heap, v)
            if len(heap) == k:
                self.full[j] = True
                self.kth[j] = heap[0]
        self.sum_all += row

    def _contributions(self, sims: np.ndarray) -> np.ndarray:
        return np.where(self.full, np.maximum(sims - self.kth, 0.0), sims)

    def gains(self) -> np.ndarray:
        """Marginal gain of every candidate (entries for chosen ones are meaningless)."""
        p = self.problem
        top = self._contributions(p.cand_sims).sum(axis=1) / (p.k * p.n_novel)
        return top - p.diversity_scale * p.cand_sims.sum(axis=1)

    def gain_at(self, index: int) -> float:
        p = self.problem
        sims = p.cand_sims[index]
        top = self._contributions(sims).sum() / (p.k * p.n_novel)
        return float(top - p.diversity_scale * sims.sum())

    def add(self, index: int) -> None:
        if self.mask[index]:
            raise AlreadyChosenError(self.problem.candidate_ids[index])
        self.mask[index] = True
        self.chosen_indices.append(int(index))
        self.chosen.append(self.problem.candidate_ids[index])
        self._push(self.problem.cand_sims[index])

    def topk_sums(self) -> np.ndarray:
        return np.array([sum(h) for h in self.heaps])

    def value(self) -> float:
        p = self.problem
        first = self.topk_sums().sum() / (p.k * p.n_novel)
        return float(first - p.diversity_scale * self.sum_all.sum())


def marginal_gain(problem: SelectionProblem, state: SelectionState, label: str) -> float:
    """Gain in objective from adding candidate ``label`` to ``state``."""
    if state.problem is not problem:
        raise SelectionError("state belongs to a different problem")
    (index,) = problem.indices([label])
    if state.mask[index]:
        raise AlreadyChosenError(label)
    return state.gain_at(index)


class SimilarityRatio(NamedTuple):
    novel_id: str
    numerator: float
    denominator: float
    ratio: float | None  # None when the denominator is zero


def similarity_ratio(problem: SelectionProblem, chosen: Iterable[str]) -> list[SimilarityRatio]:
    """Per novel class: mean top-K similarity, mean similarity, and their ratio."""
    idx = problem.indices(chosen)
    sims = np.concatenate([problem.pre_sims, problem.cand_sims[idx]], axis=0)
    if sims.shape[0] == 0:
        raise SelectionError("similarity ratio needs at least one base class")
    k = min(problem.k, sims.shape[0])
    top = np.sort(sims, axis=0)[::-1][:k]
    out = []
    for j, nid in enumerate(problem.novel_ids):
        num = float(top[:, j].mean())
        den = float(sims[:, j].mean())
        out.append(SimilarityRatio(nid, num, den, None if den == 0.0 else num / den))
    return out


@dataclass(frozen=True)
class SelectionResult:
    chosen: tuple[str, ...]
    objective: float
    algorithm: str
    step_gains: tuple[float, ...] = ()
    seed: int | None = None
    elapsed: float = 0.0

    @property
    def chosen_set(self) -> frozenset[str]:
        return frozenset(self.chosen)


def finish(
    problem: SelectionProblem,
    indices: Sequence[int],
    algorithm: str,
    started: float,
    step_gains: Sequence[float] = (),
    seed: int | None = None,
) -> SelectionResult:
    """Package a selection, recomputing its objective from scratch."""
    if len(indices) != problem.m or len(set(indices)) != len(indices):
        raise SelectionError(
            f"{algorithm} produced {len(set(indices))} distinct classes, expected {problem.m}"
        )
    return SelectionResult(
        chosen=problem.labels(indices),
        objective=problem.value_of(indices),
        algorithm=algorithm,
        step_gains=tuple(float(g) for g in step_gains),
        seed=seed,
        elapsed=time.perf_counter() - started,
    )

"""Reference selectors and a clustered synthetic world for desk-scale experiments."""

from __future__ import annotations

import re
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    EmbeddingTable,
    SelectionProblem,
    SelectionResult,
    cosine_similarity,
    finish,
)
from .errors import InvalidProblemError, InvalidSubsetError

__all__ = [
    "random_select",
    "domain_similarity_select",
    "k_medoids_select",
    "pam",
    "SyntheticWorldConfig",
    "generate_synthetic_world",
    "cluster_of",
]


def random_select(problem: SelectionProblem, seed: int = 0) -> SelectionResult:
    """Uniform m-subset of the candidates, drawn with ``default_rng(seed)``."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    picks = rng.choice(problem.r, size=problem.m, replace=False)
    return finish(problem, picks.tolist(), "random", started, seed=seed)


def domain_similarity_select(
    problem: SelectionProblem,
    base: EmbeddingTable | None = None,
    novel: EmbeddingTable | None = None,
) -> SelectionResult:
    """Top-m candidates by similarity to the target domain.

    With embeddings, the target is the plain (unnormalized) mean of the novel
    centroids and each candidate is scored by its cosine to it. Without them
    the score is the candidate's mean similarity over the novel columns.
    """
    started = time.perf_counter()
    if base is not None and novel is not None:
        target = novel.subset(problem.novel_ids).vectors.mean(axis=0)
        cand = base.subset(problem.candidate_ids).vectors
        scores = np.array([cosine_similarity(v, target) for v in cand])
    else:
        scores = problem.cand_sims.mean(axis=1)
    order = np.lexsort((np.arange(problem.r), -scores))
    return finish(problem, order[: problem.m].tolist(), "domsim", started)


def _build(dist: np.ndarray, k: int) -> list[int]:
    medoids = [int(np.argmin(dist.sum(axis=1)))]
    nearest = dist[medoids[0]].copy()
    while len(medoids) < k:
        gain = np.maximum(nearest[None, :] - dist, 0.0).sum(axis=1)
        gain[medoids] = -np.inf
        c = int(np.argmax(gain))
        medoids.append(c)
        nearest = np.minimum(nearest, dist[c])
    return medoids


def _swap(dist: np.ndarray, medoids: list[int], tol: float = 1e-12) -> list[int]:
    medoids = list(medoids)
    n = dist.shape[0]
    cost = dist[medoids].min(axis=0).sum()
    while True:
        best = (cost - tol, None, None)
        outside = np.setdiff1d(np.arange(n), medoids)
        if outside.size == 0:
            break
        for pos in range(len(medoids)):
            rest = medoids[:pos] + medoids[pos + 1:]
            keep = dist[rest].min(axis=0) if rest else np.full(n, np.inf)
            costs = np.minimum(keep[None, :], dist[outside]).sum(axis=1)
            h = int(np.argmin(costs))
            if costs[h] < best[0]:
                best = (costs[h], pos, int(outside[h]))
        if best[1] is None:
            break
        cost, pos, h = best
        medoids[pos] = h
    return medoids


def pam(dist: np.ndarray, k: int, swap: bool = True, init: list[int] | None = None):
    """Partitioning around medoids on a dissimilarity matrix.

    Returns ``(medoids, total_cost)`` where the cost sums each point's
    dissimilarity to its nearest medoid.
    """
    dist = np.asarray(dist, dtype=float)
    if not 1 <= k <= dist.shape[0]:
        raise InvalidProblemError(f"k must be in [1, {dist.shape[0]}], got {k}")
    medoids = list(init) if init is not None else _build(dist, k)
    if swap:
        medoids = _swap(dist, medoids)
    return medoids, float(dist[medoids].min(axis=0).sum())


def k_medoids_select(
    problem: SelectionProblem,
    base: EmbeddingTable,
    seed: int | None = None,
    restarts: int = 0,
) -> SelectionResult:
    """Medoids of the candidate centroids under ``1 - cosine`` dissimilarity.

    PAM BUILD then SWAP. ``restarts`` extra runs start SWAP from random
    medoids drawn with ``seed``; the lowest-cost solution wins, BUILD on ties.
    """
    started = time.perf_counter()
    vecs = base.subset(problem.candidate_ids).vectors
    unit = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
    dist = np.clip(1.0 - unit @ unit.T, 0.0, 2.0)
    np.fill_diagonal(dist, 0.0)
    medoids, cost = pam(dist, problem.m)
    if restarts:
        rng = np.random.default_rng(seed)
        for _ in range(restarts):
            init = rng.choice(problem.r, size=problem.m, replace=False).tolist()
            cand, c = pam(dist, problem.m, init=init)
            if c < cost - 1e-12:
                medoids, cost = cand, c
    return finish(problem, medoids, "kmedoids", started, seed=seed)


@dataclass(frozen=True)
class SyntheticWorldConfig:
    clusters: int = 5
    classes_per_cluster: int = 20
    dim: int = 16
    intra_spread: float = 0.3
    inter_spread: float = 1.0
    seed: int = 0
    novel_classes: int = 10
    novel_cluster: int | None = None  # put every novel class in this cluster

    def validate(self) -> None:
        for name in ("clusters", "classes_per_cluster", "dim", "novel_classes"):
            if getattr(self, name) < 1:
                raise InvalidProblemError(f"{name} must be positive")
        if self.intra_spread < 0 or self.inter_spread <= 0:
            raise InvalidProblemError("spreads must be non-negative (inter strictly positive)")
        if self.novel_cluster is not None and not 0 <= self.novel_cluster < self.clusters:
            raise InvalidProblemError("novel_cluster out of range")
        if self.intra_spread >= self.inter_spread:
            warnings.warn("intra_spread >= inter_spread: clusters will overlap", stacklevel=3)


_CLUSTER = re.compile(r"c(\d+)")


def cluster_of(label: str) -> int:
    """Cluster index encoded in a synthetic class id."""
    match = _CLUSTER.search(label)
    if match is None:
        raise InvalidSubsetError([label], "synthetic world ids")
    return int(match.group(1))


def generate_synthetic_world(config: SyntheticWorldConfig) -> tuple[EmbeddingTable, EmbeddingTable]:
    """Gaussian clusters of class centroids.

    Cluster centers are N(0, inter_spread^2 I); each class centroid is its
    center plus N(0, intra_spread^2 I) noise. Base ids look like ``c02-b007``
    and novel ids ``n003-c01`` (cluster encoded after ``c``).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    centers = rng.normal(0.0, config.inter_spread, size=(config.clusters, config.dim))
    base_ids, base_vecs = [], []
    for c in range(config.clusters):
        for i in range(config.classes_per_cluster):
            base_ids.append(f"c{c:02d}-b{i:03d}")
            base_vecs.append(centers[c] + rng.normal(0.0, config.intra_spread, config.dim))
    novel_ids, novel_vecs = [], []
    for j in range(config.novel_classes):
        c = config.novel_cluster if config.novel_cluster is not None else int(rng.integers(config.clusters))
        novel_ids.append(f"n{j:03d}-c{c:02d}")
        novel_vecs.append(centers[c] + rng.normal(0.0, config.intra_spread, config.dim))
    return (
        EmbeddingTable(tuple(base_ids), np.array(base_vecs)),
        EmbeddingTable(tuple(novel_ids), np.array(novel_vecs)),
    )

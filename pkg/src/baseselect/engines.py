"""Name-based dispatch over every selector."""

from __future__ import annotations

from .baselines import domain_similarity_select, k_medoids_select, random_select
from .continuous import DEFAULT_STEPS, continuous_pipeline
from .core import EmbeddingTable, SelectionProblem, SelectionResult
from .errors import SelectionError
from .greedy import greedy_on_novel_class, greedy_on_target, random_greedy

ALGORITHMS = (
    "greedy-novel",
    "greedy-target",
    "random-greedy",
    "continuous-double",
    "random",
    "domsim",
    "kmedoids",
)


def run_algorithm(
    name: str,
    problem: SelectionProblem,
    seed: int = 0,
    steps: int = DEFAULT_STEPS,
    base: EmbeddingTable | None = None,
    novel: EmbeddingTable | None = None,
) -> SelectionResult:
    if name == "greedy-novel":
        return greedy_on_novel_class(problem)
    if name == "greedy-target":
        return greedy_on_target(problem)
    if name == "random-greedy":
        return random_greedy(problem, seed=seed)
    if name == "continuous-double":
        return continuous_pipeline(problem, steps=steps, seed=seed)
    if name == "random":
        return random_select(problem, seed=seed)
    if name == "domsim":
        return domain_similarity_select(problem, base, novel)
    if name == "kmedoids":
        if base is None:
            raise SelectionError("kmedoids needs candidate embeddings (--embeddings)")
        return k_medoids_select(problem, base, seed=seed)
    raise SelectionError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")

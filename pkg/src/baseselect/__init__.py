"""Select base classes for few-shot transfer by maximizing a similarity-ratio objective."""

from .baselines import (
    SyntheticWorldConfig,
    domain_similarity_select,
    generate_synthetic_world,
    k_medoids_select,
    random_select,
)
from .continuous import (
    FractionalSolution,
    continuous_double_greedy,
    continuous_pipeline,
    multilinear_gradient,
    multilinear_partial,
    multilinear_value,
    order_stat_probs,
    pipage_round,
    water_level,
)
from .core import (
    EmbeddingTable,
    SelectionProblem,
    SelectionResult,
    SelectionState,
    SimilarityMatrix,
    build_similarity_matrix,
    cosine_similarity,
    marginal_gain,
    max_k_sum,
    objective,
    similarity_ratio,
)
from .engines import ALGORITHMS, run_algorithm
from .errors import SelectionError
from .greedy import (
    AlgorithmKind,
    choose_algorithm,
    greedy_on_novel_class,
    greedy_on_target,
    random_greedy,
)
from .regression import fit_sr_regression
from .verification import (
    average_similarity_Q,
    brute_force_optimum,
    certify_bounds,
    check_submodularity,
)

__all__ = [
    "AlgorithmKind",
    "ALGORITHMS",
    "average_similarity_Q",
    "brute_force_optimum",
    "build_similarity_matrix",
    "certify_bounds",
    "check_submodularity",
    "choose_algorithm",
    "continuous_double_greedy",
    "continuous_pipeline",
    "cosine_similarity",
    "domain_similarity_select",
    "EmbeddingTable",
    "fit_sr_regression",
    "FractionalSolution",
    "generate_synthetic_world",
    "greedy_on_novel_class",
    "greedy_on_target",
    "k_medoids_select",
    "marginal_gain",
    "max_k_sum",
    "multilinear_gradient",
    "multilinear_partial",
    "multilinear_value",
    "objective",
    "order_stat_probs",
    "pipage_round",
    "random_greedy",
    "random_select",
    "run_algorithm",
    "SelectionError",
    "SelectionProblem",
    "SelectionResult",
    "SelectionState",
    "similarity_ratio",
    "SimilarityMatrix",
    "SyntheticWorldConfig",
    "water_level",
]

__version__ = "0.1.0"

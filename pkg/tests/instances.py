"""Random desk-scale instances shared by the test modules."""

import numpy as np

from baseselect import SelectionProblem, SimilarityMatrix


def matrix_from(values, base_prefix="b", novel_prefix="n"):
    values = np.asarray(values, dtype=float)
    base = tuple(f"{base_prefix}{i:02d}" for i in range(values.shape[0]))
    novel = tuple(f"{novel_prefix}{j:02d}" for j in range(values.shape[1]))
    return SimilarityMatrix(base, novel, values)


def random_problem(rng, r, n_novel, k=1, lam=0.0, m=1, n_pre=0, low=0.0, high=1.0):
    """Similarities uniform on [low, high]; the first ``n_pre`` rows are preselected."""
    values = rng.uniform(low, high, size=(r + n_pre, n_novel))
    mat = matrix_from(values)
    pre = mat.base_ids[:n_pre]
    return SelectionProblem(mat, m=m, k=k, lam=lam, preselected_ids=pre)


def draw_problem(rng, r_range=(6, 15), n_range=(1, 5), k_range=(1, 3),
                 lams=(0.0, 0.2, 0.5), n_pre=0):
    r = int(rng.integers(r_range[0], r_range[1] + 1))
    return random_problem(
        rng, r,
        n_novel=int(rng.integers(n_range[0], n_range[1] + 1)),
        k=int(rng.integers(k_range[0], k_range[1] + 1)),
        lam=float(rng.choice(lams)),
        m=int(rng.integers(1, r + 1)),
        n_pre=n_pre,
    )


def three_candidate_example():
    """Three candidates, two novel classes; the hand-traced greedy picks {a, b}."""
    values = np.full((3, 2), 0.1)
    values[0, 0] = 0.9  # a, n1
    values[1, 1] = 0.8  # b, n2
    values[2, 0] = 0.5  # c, n1
    mat = SimilarityMatrix(("a", "b", "c"), ("n1", "n2"), values)
    return SelectionProblem(mat, m=2, k=1, lam=0.0)

"""Least-squares analysis of accuracy against the two similarity statistics.

Model: ``acc = beta1 * x1 + beta2 * x2 + alpha + noise`` with ``x1`` the mean
top-K similarity of a novel class to the base set and ``x2`` its mean
similarity to the whole base set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .core import SelectionProblem, similarity_ratio
from .errors import CollinearDesignError, SelectionError

__all__ = ["RegressionFit", "fit_sr_regression", "sr_samples"]

_MAX_CONDITION = 1e10


@dataclass(frozen=True)
class RegressionFit:
    beta1: float
    beta2: float
    alpha: float
    r_squared: float
    ci95: tuple[float, float, float]  # half-widths for beta1, beta2, alpha
    stderr: tuple[float, float, float]
    n: int
    residual_normal: tuple[float, float, float]  # X^T (y - X b), ~0 at the optimum

    @property
    def coefficients(self) -> tuple[float, float, float]:
        return self.beta1, self.beta2, self.alpha

    def to_dict(self) -> dict:
        return {
            "beta1": self.beta1, "beta2": self.beta2, "alpha": self.alpha,
            "r_squared": self.r_squared, "ci95": list(self.ci95),
            "stderr": list(self.stderr), "n": self.n,
        }


def fit_sr_regression(samples: Sequence[Sequence[float]]) -> RegressionFit:
    """Ordinary least squares with intercept on ``(acc, x1, x2)`` rows.

    Intervals are homoskedastic normal-theory 95% intervals (Student t with
    n - 3 degrees of freedom). A constant response gives ``R^2 = 0``.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 3:
        raise SelectionError("samples must be rows of (acc, x1, x2)")
    n = data.shape[0]
    if n < 4:
        raise SelectionError(f"need at least 4 samples, got {n}")
    if not np.all(np.isfinite(data)):
        raise SelectionError("samples must be finite")
    y = data[:, 0]
    X = np.column_stack([data[:, 1], data[:, 2], np.ones(n)])

    # scale-free conditioning check on centred regressors
    centred = data[:, 1:] - data[:, 1:].mean(axis=0)
    norms = np.linalg.norm(centred, axis=0)
    scale = np.maximum(np.linalg.norm(data[:, 1:], axis=0), 1.0)
    if np.any(norms <= 1e-12 * scale):
        raise CollinearDesignError(np.inf)
    cond = np.linalg.cond(centred / norms)
    if not np.isfinite(cond) or cond > _MAX_CONDITION:
        raise CollinearDesignError(cond)

    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 0.0 if sst == 0.0 else float(np.clip(1.0 - ssr / sst, 0.0, 1.0))
    dof = n - 3
    sigma2 = ssr / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    half = stats.t.ppf(0.975, dof) * se
    return RegressionFit(
        beta1=float(beta[0]), beta2=float(beta[1]), alpha=float(beta[2]),
        r_squared=r2,
        ci95=tuple(float(v) for v in half),
        stderr=tuple(float(v) for v in se),
        n=n,
        residual_normal=tuple(float(v) for v in X.T @ resid),
    )


def sr_samples(
    problem: SelectionProblem,
    novel: str,
    response: Callable[[np.ndarray], float],
    draws: int,
    subset_size: int,
    noise: float = 0.0,
    seed: int = 0,
) -> list[tuple[float, float, float]]:
    """Regression rows from random base subsets, as in a base-set resampling study.

    For each draw a uniform ``subset_size``-subset of the candidates is taken;
    ``x1, x2`` are the similarity statistics of ``novel`` against it (using
    ``problem.k``) and the response is ``response(similarities) + noise``.
    """
    rng = np.random.default_rng(seed)
    col = problem.novel_ids.index(novel)
    rows = []
    for _ in range(draws):
        idx = rng.choice(problem.r, size=subset_size, replace=False)
        labels = problem.labels(idx)
        sr = similarity_ratio(problem, labels)[col]
        acc = response(problem.cand_sims[idx, col]) + noise * rng.normal()
        rows.append((float(acc), sr.numerator, sr.denominator))
    return rows

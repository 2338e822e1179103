"""Alternating minimization for robust regression."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass

import numpy as np

from ..numerics import ContractError, least_squares
from ..problems import InfeasibleBudgetError, RobustRegressionProblem
from ..qieo import SolverResult

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AmrrConfig:
    max_iterations: int = 200

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ContractError("max_iterations must be >= 1")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return asdict(self)


def top_k_residuals(r: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest ``|r|``, ties to the lower index, sorted."""
    return np.sort(np.argsort(-np.abs(r), kind="stable")[:k])


def run_amrr(problem: RobustRegressionProblem, config: AmrrConfig = AmrrConfig()) -> SolverResult:
    """Alternate OLS on presumed-clean rows with re-selecting the k worst residuals.

    Starts from all-rows OLS and stops once the selected set repeats.
    """
    if not isinstance(problem, RobustRegressionProblem):
        raise ContractError("AM-RR applies to robust regression problems only")
    t0 = time.perf_counter()
    X, y, n, k = problem.X, problem.y, problem.n, problem.k
    if n - k <= problem.p:
        raise InfeasibleBudgetError(f"k = {k} leaves too few clean rows for p = {problem.p}")
    w, _ = least_squares(X, y)
    S = np.zeros(0, dtype=np.int64)
    history = []
    last_sse = np.inf
    it = 0
    for it in range(1, config.max_iterations + 1):
        if k == 0:
            break
        S_new = top_k_residuals(y - X @ w, k)
        if it > 1 and np.array_equal(S_new, S):
            break
        S = S_new
        clean = np.ones(n, dtype=bool)
        clean[S] = False
        w, sse = least_squares(X[clean], y[clean])
        if sse > last_sse * (1 + 1e-12):
            log.info("AM-RR clean-set sse rose from %.6g to %.6g at iteration %d", last_sse, sse, it)
        last_sse = sse
        history.append((it - 1, sse / (n - k)))
    clean = np.ones(n, dtype=bool)
    clean[S] = False
    r = y - X @ w
    b = np.zeros(n)
    b[S] = r[S]
    bits = np.zeros(n, dtype=np.uint8)
    bits[S] = 1
    mse = float(r[clean] @ r[clean]) / (n - k)
    # raw trajectory; it is non-increasing on well-conditioned instances
    hist = list(history)
    if not hist or hist[-1][1] != mse:
        hist.append((it, mse))
    return SolverResult(
        best_bits=bits,
        best_fitness=mse,
        weights=w,
        corruption=b,
        generations_run=it,
        history=hist,
        wall_time=time.perf_counter() - t0,
        evaluations=it,
    )

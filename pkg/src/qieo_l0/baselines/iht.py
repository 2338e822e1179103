"""Iterative hard thresholding with a least-squares debias step."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from ..numerics import ContractError, restricted_least_squares, spectral_norm_sq
from ..problems import SparseRecoveryProblem
from ..qieo import SolverResult


@dataclass(frozen=True)
class IhtConfig:
    max_iterations: int = 1000
    step_size: float | str = "auto"
    convergence_tol: float = 1e-12

    def __post_init__(self):
        if self.step_size != "auto" and not (isinstance(self.step_size, (int, float)) and self.step_size > 0):
            raise ContractError("step_size must be 'auto' or a positive number")
        if self.max_iterations < 1:
            raise ContractError("max_iterations must be >= 1")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return asdict(self)


def hard_threshold(x: np.ndarray, s: int) -> np.ndarray:
    """Keep the ``s`` largest-magnitude entries; ties go to the lower index."""
    keep = np.argsort(-np.abs(x), kind="stable")[:s]
    out = np.zeros_like(x)
    out[keep] = x[keep]
    return out


def run_iht(problem: SparseRecoveryProblem, config: IhtConfig = IhtConfig()) -> SolverResult:
    """Thresholded gradient steps from zero, then a least-squares debias.

    ``history`` is the per-iteration mse trajectory followed by the debiased
    fit; unlike the archiving solvers it need not be monotone.
    """
    if not isinstance(problem, SparseRecoveryProblem):
        raise ContractError("IHT applies to sparse recovery problems only")
    t0 = time.perf_counter()
    X, y, s = problem.X, problem.y, problem.s
    if config.step_size == "auto":
        L = spectral_norm_sq(X)
        eta = 1.0 / L if L > 0 else 1.0
    else:
        eta = float(config.step_size)
    w = np.zeros(problem.p)
    history = []
    it = 0
    for it in range(1, config.max_iterations + 1):
        w_new = hard_threshold(w + eta * (X.T @ (y - X @ w)), s)
        step = float(np.linalg.norm(w_new - w))
        w = w_new
        r = y - X @ w
        history.append((it - 1, float(r @ r) / problem.n))
        if step <= config.convergence_tol * max(1.0, float(np.linalg.norm(w))):
            break
    support = np.flatnonzero(w)
    if support.size < s:
        # a zero entry can survive thresholding; pad by magnitude order
        support = np.argsort(-np.abs(w), kind="stable")[:s]
    fit = restricted_least_squares(X, y, support)
    bits = np.zeros(problem.p, dtype=np.uint8)
    bits[fit.support] = 1
    mse = fit.sse / problem.n
    history.append((it, mse))
    return SolverResult(
        best_bits=bits,
        best_fitness=mse,
        weights=fit.weights,
        corruption=None,
        generations_run=it,
        history=history,
        wall_time=time.perf_counter() - t0,
        evaluations=it,
    )

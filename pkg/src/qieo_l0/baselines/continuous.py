"""Continuous l1 relaxations solved by ADAM and by differential evolution.

Sparse problems minimize ``||y - X w||^2 / n + lam * ||w||_1`` over ``w``.
Robust problems minimize ``||y - X w - b||^2 / n + lam * ||b||_1`` over the
extended variable ``(w, b)``, i.e. regression on the dictionary ``[X, I]``.
Supports are read off by thresholding ``|value| > support_threshold`` and
the raw iterates are reported as-is (no debiasing). The reported fitness is
the penalized objective the solver minimizes.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from ..numerics import ContractError
from ..problems import RobustRegressionProblem, SparseRecoveryProblem
from ..qieo import SolverResult


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    iterations: int = 5000
    l1_weight: float = 0.01
    support_threshold: float = 0.02

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ContractError("beta1 and beta2 must lie in (0, 1)")
        if self.learning_rate <= 0 or self.iterations < 1:
            raise ContractError("learning_rate must be positive and iterations >= 1")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DeConfig:
    population_size: int = 50
    generations: int = 1000
    differential_weight: float = 0.8
    crossover_prob: float = 0.9
    l1_weight: float = 0.01
    support_threshold: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.differential_weight < 2:
            raise ContractError("differential_weight must lie in (0, 2)")
        if not 0 <= self.crossover_prob <= 1:
            raise ContractError("crossover_prob must lie in [0, 1]")
        if self.population_size < 4:
            raise ContractError("rand/1 mutation needs population_size >= 4")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return asdict(self)


def _relaxation(problem):
    """Return (A, y, penalized slice, number of model weights)."""
    if isinstance(problem, SparseRecoveryProblem):
        return problem.X, problem.y, slice(0, problem.p), problem.p
    if isinstance(problem, RobustRegressionProblem):
        A = np.hstack([problem.X, np.eye(problem.n)])
        return A, problem.y, slice(problem.p, problem.p + problem.n), problem.p
    raise ContractError(f"unsupported problem type {type(problem).__name__}")


def _objective(z, A, y, pen, lam):
    r = y - A @ z
    return float(r @ r) / len(y) + lam * float(np.abs(z[pen]).sum())


def _result(problem, z, fitness, threshold, iters, history, t0):
    if isinstance(problem, SparseRecoveryProblem):
        weights, corruption, target = z.copy(), None, z
    else:
        weights, corruption = z[: problem.p].copy(), z[problem.p :].copy()
        target = corruption
    bits = (np.abs(target) > threshold).astype(np.uint8)
    return SolverResult(
        best_bits=bits,
        best_fitness=fitness,
        weights=weights,
        corruption=corruption,
        generations_run=iters,
        history=history,
        wall_time=time.perf_counter() - t0,
        evaluations=iters,
    )


def run_adam(problem, config: AdamConfig = AdamConfig()) -> SolverResult:
    """Deterministic ADAM from the zero vector with the l1 subgradient (sign, 0 at 0).

    The objective is checked every 100 steps and at the end; the best
    checkpoint is returned.
    """
    t0 = time.perf_counter()
    A, y, pen, _ = _relaxation(problem)
    n = len(y)
    lam = config.l1_weight
    z = np.zeros(A.shape[1])
    m1 = np.zeros_like(z)
    m2 = np.zeros_like(z)
    b1, b2 = config.beta1, config.beta2
    best, best_z = np.inf, z
    history = []
    for t in range(1, config.iterations + 1):
        r = y - A @ z
        g = (-2.0 / n) * (A.T @ r)
        g[pen] += lam * np.sign(z[pen])
        m1 = b1 * m1 + (1 - b1) * g
        m2 = b2 * m2 + (1 - b2) * g * g
        mhat = m1 / (1 - b1**t)
        vhat = m2 / (1 - b2**t)
        z = z - config.learning_rate * mhat / (np.sqrt(vhat) + config.epsilon)
        if not np.all(np.isfinite(z)):
            raise DivergenceError(f"ADAM iterate became non-finite at step {t}")
        if t % 100 == 0 or t == config.iterations:
            f = _objective(z, A, y, pen, lam)
            if f < best:
                best, best_z = f, z.copy()
            history.append((t, best))
    return _result(problem, best_z, best, config.support_threshold, config.iterations, history, t0)


def run_de(problem: SparseRecoveryProblem, config: DeConfig = DeConfig(), initial_population=None) -> SolverResult:
    """rand/1/bin differential evolution on the sparse relaxation.

    The default start population is iid N(0, 1).
    """
    if not isinstance(problem, SparseRecoveryProblem):
        raise ContractError("DE applies to sparse recovery problems only")
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    X, y, lam = problem.X, problem.y, config.l1_weight
    NP, D = config.population_size, problem.p
    n = problem.n

    def objective(W):
        R = y[None, :] - W @ X.T
        return np.einsum("ij,ij->i", R, R) / n + lam * np.abs(W).sum(axis=1)

    if initial_population is None:
        pop = rng.standard_normal((NP, D))
    else:
        pop = np.array(initial_population, dtype=np.float64)
        if pop.shape != (NP, D):
            raise ContractError(f"initial population must have shape {(NP, D)}")
    fit = objective(pop)
    history = []
    idx = np.arange(NP)
    for gen in range(config.generations):
        # r1, r2, r3 distinct and different from the target index
        r = np.empty((NP, 3), dtype=np.int64)
        for i in range(NP):
            r[i] = rng.choice(NP - 1, size=3, replace=False)
        r += r >= idx[:, None]
        mutant = pop[r[:, 0]] + config.differential_weight * (pop[r[:, 1]] - pop[r[:, 2]])
        cross = rng.random((NP, D)) < config.crossover_prob
        cross[idx, rng.integers(0, D, size=NP)] = True
        trial = np.where(cross, mutant, pop)
        tf = objective(trial)
        better = tf <= fit
        pop[better] = trial[better]
        fit[better] = tf[better]
        history.append((gen, float(fit.min())))
    j = int(np.argmin(fit))
    return _result(problem, pop[j], float(fit[j]), config.support_threshold, config.generations, history, t0)

"""Binary genetic algorithm with budget repair."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .. import kernels
from ..numerics import ContractError
from ..qieo import SolverResult, _check_finite


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    generations: int = 500
    crossover_rate: float = 0.9
    # None means 1/m per bit
    mutation_rate: float | None = None
    tournament_size: int = 2
    elitism_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ContractError("population_size must be even and >= 2")
        if self.generations < 1:
            raise ContractError("generations must be >= 1")
        if not 0 <= self.crossover_rate <= 1:
            raise ContractError("crossover_rate must lie in [0, 1]")
        if self.mutation_rate is not None and not 0 <= self.mutation_rate <= 1:
            raise ContractError("mutation_rate must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ContractError("tournament_size must be >= 1")
        if not 0 <= self.elitism_count <= self.population_size:
            raise ContractError("elitism_count must lie in [0, population_size]")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return asdict(self)


# repair draws live in their own stream family so they never alias the
# operator RNG; stream id = generation * population_size + child index
_REPAIR_SALT = 0x5A17_0000_0000_0001


def run_ga(problem, config: GaConfig, initial_population=None, callback=None) -> SolverResult:
    """Tournament selection, uniform crossover, bit-flip mutation, elitism.

    Offspring are repaired to ``problem.budget`` before evaluation. The
    returned individual is the best ever evaluated.
    """
    t0 = time.perf_counter()
    P, m = config.population_size, problem.m
    budget = getattr(problem, "budget", None)
    mut = 1.0 / m if config.mutation_rate is None else config.mutation_rate
    rng = np.random.default_rng(config.seed)
    repair_seed = (config.seed ^ _REPAIR_SALT) & ((1 << 64) - 1)

    def fix(bits, gen):
        if budget is None:
            return bits
        return kernels.repair_population(bits, budget, repair_seed, gen * P)

    if initial_population is None:
        pop = fix((rng.random((P, m)) < 0.5).astype(np.uint8), 0)
    else:
        pop = np.array(initial_population, dtype=np.uint8)
        if pop.shape != (P, m):
            raise ContractError(f"initial population must have shape {(P, m)}")
    fit = np.asarray(problem.evaluate(pop), dtype=np.float64)
    _check_finite(fit, pop)
    evaluations = P

    best_fit, best_bits, best_out = math.inf, None, None

    def archive(pop, fit):
        nonlocal best_fit, best_bits, best_out
        j = int(np.argmin(fit))
        if fit[j] < best_fit:
            out = problem.decode(pop[j])
            if out.fitness < best_fit:
                best_fit, best_bits, best_out = float(out.fitness), pop[j].copy(), out
                return True
        return False

    archive(pop, fit)
    history = [(0, best_fit)]
    n_child = P - config.elitism_count
    for gen in range(1, config.generations):
        order = np.argsort(fit, kind="stable")
        elite = pop[order[: config.elitism_count]]
        elite_fit = fit[order[: config.elitism_count]]
        if n_child > 0:
            cand = rng.integers(0, P, size=(2 * n_child, config.tournament_size))
            winners = cand[np.arange(2 * n_child), np.argmin(fit[cand], axis=1)]
            pa, pb = pop[winners[:n_child]], pop[winners[n_child:]]
            do_cx = rng.random(n_child) < config.crossover_rate
            mask = rng.random((n_child, m)) < 0.5
            children = np.where(do_cx[:, None] & mask, pb, pa)
            flips = rng.random((n_child, m)) < mut
            children = (children ^ flips).astype(np.uint8)
            children = fix(children, gen)
            child_fit = np.asarray(problem.evaluate(children, anchor=best_bits), dtype=np.float64)
            _check_finite(child_fit, children)
            evaluations += n_child
            pop = np.concatenate([elite, children])
            fit = np.concatenate([elite_fit, child_fit])
            archive(children, child_fit)
        else:
            pop, fit = elite, elite_fit
        history.append((gen, best_fit))
        if callback is not None:
            callback(gen, best_fit, pop)
    return SolverResult(
        best_bits=best_bits.astype(np.uint8),
        best_fitness=best_fit,
        weights=best_out.weights,
        corruption=best_out.corruption,
        generations_run=len(history),
        history=history,
        wall_time=time.perf_counter() - t0,
        evaluations=evaluations,
    )

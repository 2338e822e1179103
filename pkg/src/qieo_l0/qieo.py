"""Quantum-inspired evolutionary optimization over fixed-length bitstrings.

Each individual is a register of ``m`` qubits. Qubit ``i`` is stored as an
angle ``phi_i`` with amplitudes ``(cos phi_i, sin phi_i)``, so normalization
holds by construction and ``P(bit = 1) = sin^2 phi_i``.

One generation: measure every register, repair to the problem's budget,
evaluate, archive the global best on strict improvement, then rotate every
register toward the archived best on the qubits where its measurement
disagreed with it.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .numerics import ContractError


class NonFiniteFitnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class RotationPolicy:
    delta: float = 0.02 * math.pi
    phi_min: float = 0.01 * math.pi
    phi_max: float = 0.49 * math.pi

    def __post_init__(self):
        if not 0 < self.delta < math.pi / 2:
            raise ContractError(f"delta must lie in (0, pi/2), got {self.delta}")
        if not 0 < self.phi_min < self.phi_max < math.pi / 2:
            raise ContractError("need 0 < phi_min < phi_max < pi/2")


@dataclass(frozen=True)
class QieoConfig:
    population_size: int = 50
    max_generations: int = 500
    stall_window: int | None = None
    fitness_tolerance: float = 0.0
    seed: int = 0
    rotation: RotationPolicy = field(default_factory=RotationPolicy)
    # which bits steer the rotation: the raw measurement or the repaired string
    observe: str = "measured"

    def __post_init__(self):
        if self.population_size < 2:
            raise ContractError("population_size must be >= 2")
        if self.max_generations < 1:
            raise ContractError("max_generations must be >= 1")
        if self.stall_window is not None and self.stall_window < 1:
            raise ContractError("stall_window must be >= 1 or None")
        if self.observe not in ("measured", "repaired"):
            raise ContractError(f"observe must be 'measured' or 'repaired', got {self.observe!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "QieoConfig":
        d = dict(d)
        rot = d.pop("rotation", None)
        if isinstance(rot, dict):
            d["rotation"] = RotationPolicy(**rot)
        elif rot is not None:
            d["rotation"] = rot
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolverResult:
    best_bits: np.ndarray
    best_fitness: float
    weights: np.ndarray
    corruption: np.ndarray | None
    generations_run: int
    history: list[tuple[int, float]]
    wall_time: float
    evaluations: int = 0

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.best_bits).astype(np.int64)


def init_population(population_size: int, m: int) -> np.ndarray:
    """Registers after a Hadamard on |0>: every angle is pi/4."""
    if population_size < 2 or m < 1:
        raise ContractError("need population_size >= 2 and m >= 1")
    return np.full((population_size, m), math.pi / 4)


def measure(register: np.ndarray, stream: kernels.Substream) -> np.ndarray:
    """Collapse one register; consumes exactly ``m`` draws from ``stream``."""
    register = np.asarray(register, dtype=np.float64)
    u = stream.uniform(register.shape[0])
    return (u < kernels.one_probabilities(register)).astype(np.uint8)


def rotate(register: np.ndarray, observed, best, policy: RotationPolicy) -> np.ndarray:
    """Apply R_Y toward ``best`` on every qubit where ``observed`` disagrees.

    A rotation by ``delta`` advances the angle by ``delta / 2``; results are
    clamped to ``[phi_min, phi_max]``.
    """
    register = np.asarray(register, dtype=np.float64)
    observed = np.asarray(observed)
    best = np.asarray(best)
    if not (register.shape == observed.shape == best.shape) or register.ndim != 1:
        raise ContractError(
            f"length mismatch: register {register.shape}, observed {observed.shape}, best {best.shape}"
        )
    return kernels.rotate_population(
        register[None, :], observed[None, :], best, policy.delta, policy.phi_min, policy.phi_max
    )[0]


def _check_finite(fitness, bits):
    bad = ~np.isfinite(fitness)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        s = "".join("1" if b else "0" for b in bits[i])
        raise NonFiniteFitnessError(f"non-finite fitness {fitness[i]!r} for bitstring {s}")


def run(problem, config: QieoConfig, callback=None) -> SolverResult:
    """Run the measure / evaluate / archive / rotate cycle on ``problem``.

    ``problem`` must provide ``m``, ``budget`` (or ``None``),
    ``evaluate(bits, anchor=None)`` and ``decode(bits)``. Individual ``j`` of
    generation ``g`` draws from stream ``g * population_size + j``, so the
    result depends only on ``config`` and ``problem``.
    """
    t0 = time.perf_counter()
    P, m = config.population_size, problem.m
    pol = config.rotation
    budget = getattr(problem, "budget", None)
    angles = init_population(P, m)
    best_bits = None
    best_fit = math.inf
    best_out = None
    last_improved = 0
    history: list[tuple[int, float]] = []
    evaluations = 0
    gen = 0
    for gen in range(config.max_generations):
        base = gen * P
        raw = kernels.measure_population(angles, config.seed, base)
        bits = raw if budget is None else kernels.repair_population(raw, budget, config.seed, base)
        fit = np.asarray(problem.evaluate(bits, anchor=best_bits), dtype=np.float64)
        evaluations += P
        _check_finite(fit, bits)
        j = int(np.argmin(fit))
        if fit[j] < best_fit:
            out = problem.decode(bits[j])
            # search values are approximate; archive only a confirmed gain
            if out.fitness < best_fit:
                best_fit, best_bits, best_out = float(out.fitness), bits[j].copy(), out
                last_improved = gen
        history.append((gen, best_fit))
        if callback is not None:
            callback(gen, best_fit, angles)
        if best_fit <= config.fitness_tolerance:
            break
        if config.stall_window is not None and gen - last_improved >= config.stall_window:
            break
        if gen + 1 < config.max_generations:
            observed = raw if config.observe == "measured" else bits
            angles = kernels.rotate_population(angles, observed, best_bits, pol.delta, pol.phi_min, pol.phi_max)
    return SolverResult(
        best_bits=best_bits.astype(np.uint8),
        best_fitness=best_fit,
        weights=best_out.weights,
        corruption=best_out.corruption,
        generations_run=gen + 1,
        history=history,
        wall_time=time.perf_counter() - t0,
        evaluations=evaluations,
    )

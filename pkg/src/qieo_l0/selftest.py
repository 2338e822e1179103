"""Invariant suites run by ``qieo-l0 selftest``.

Each suite raises ``AssertionError`` with a short reason on failure. Suites
are looked up in ``SUITES`` at call time, so tests can swap one out.
"""
from __future__ import annotations

import math
import time
import warnings

import numpy as np

from . import bench, kernels, qieo
from .baselines import (
    AdamConfig,
    AmrrConfig,
    DeConfig,
    GaConfig,
    IhtConfig,
    run_adam,
    run_amrr,
    run_de,
    run_ga,
    run_iht,
)
from .datagen import RobustGenConfig, SampleComplexityWarning, SparseGenConfig, gen_robust, gen_sparse
from .numerics import restricted_least_squares


def amplitude_normalization():
    rng = np.random.default_rng(0)
    angles = qieo.init_population(64, 40)
    pol = qieo.RotationPolicy(delta=0.1 * math.pi)
    target = (rng.random(40) < 0.5).astype(np.uint8)
    for g in range(50):
        obs = kernels.measure_population(angles, 1, g * 64)
        angles = kernels.rotate_population(angles, obs, target, pol.delta, pol.phi_min, pol.phi_max)
        a, b = np.cos(angles), np.sin(angles)
        # angle form: the only error left is rounding in cos/sin
        err = np.max(np.abs(a * a + b * b - 1.0))
        assert err <= 4 * np.finfo(float).eps, f"|alpha|^2 + |beta|^2 off by {err:.3g} at generation {g}"
        assert np.all((angles >= pol.phi_min) & (angles <= pol.phi_max)), "angle left the clamp range"


def measurement_frequency():
    bits = kernels.measure_population(np.full((1, 10_000), math.pi / 4), 12345, 0)
    f = float(bits.mean())
    assert 0.48 <= f <= 0.52, f"frequency of 1 at pi/4 is {f:.4f}"


def _check_history(name, res, monotone=True):
    fits = [f for _, f in res.history]
    assert fits, f"{name}: empty history"
    if monotone:
        assert all(b <= a for a, b in zip(fits, fits[1:])), f"{name}: history increases"
    assert fits[-1] == res.best_fitness, f"{name}: last history entry differs from best fitness"


def monotone_history():
    """Archived-best histories never increase; every history ends on the result."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SampleComplexityWarning)
        sp = gen_sparse(SparseGenConfig(16, 50, 5, seed=1)).problem()
    rb = gen_robust(RobustGenConfig(120, 10, 0.2, seed=2)).problem()
    for label, prob in (("sparse", sp), ("robust", rb)):
        _check_history(f"qieo/{label}", qieo.run(prob, qieo.QieoConfig(population_size=30, max_generations=40, seed=3)))
        _check_history(f"ga/{label}", run_ga(prob, GaConfig(population_size=30, generations=40, seed=3)))
        _check_history(f"adam/{label}", run_adam(prob, AdamConfig(iterations=500)))
    _check_history("de", run_de(sp, DeConfig(population_size=10, generations=40, seed=3)))
    # final-iterate solvers: trajectory only
    _check_history("iht", run_iht(sp, IhtConfig()), monotone=False)
    _check_history("amrr", run_amrr(rb, AmrrConfig()), monotone=False)


def repair_symmetry():
    m, budget, trials = 10, 5, 10_000
    ones = np.ones((trials, m), dtype=np.uint8)
    kept = kernels.repair_population(ones, budget, 99, 0).mean(axis=0)
    dev = float(np.max(np.abs(kept - budget / m)))
    assert dev <= 0.02, f"drop frequencies deviate by {dev:.4f}"
    zeros = np.zeros((trials, m), dtype=np.uint8)
    zeros[:, 0] = 1
    added = kernels.repair_population(zeros, budget, 98, 0)[:, 1:].mean(axis=0)
    dev = float(np.max(np.abs(added - (budget - 1) / (m - 1))))
    assert dev <= 0.02, f"add frequencies deviate by {dev:.4f}"


def residual_orthogonality():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((40, 25))
    y = rng.standard_normal(40)
    for size in (1, 5, 12, 25):
        S = np.sort(rng.choice(25, size=size, replace=False))
        fit = restricted_least_squares(X, y, S)
        g = float(np.max(np.abs(X[:, S].T @ (y - X @ fit.weights))))
        assert g <= 1e-8, f"|X_S^T r| = {g:.3g} for |S| = {size}"


DETERMINISM_SPEC = {
    "experiment_id": "selftest-determinism",
    "datasets": [
        {"name": "sparse", "generator": {"kind": "sparse", "n": 16, "p": 30, "s": 3, "seed": 4}},
        {"name": "robust", "generator": {"kind": "robust", "n": 80, "p": 8, "alpha": 0.1, "seed": 4}},
    ],
    "solvers": [
        {"name": "qieo", "config": {"population_size": 20, "max_generations": 15}},
        {"name": "ga", "config": {"population_size": 20, "generations": 15}},
        {"name": "adam", "config": {"iterations": 300}},
    ],
    "trials": 3,
    "base_seed": 17,
}


def determinism():
    spec = bench.ExperimentSpec.from_dict(DETERMINISM_SPEC)
    out = []
    for jobs in (1, 8):
        table = bench.aggregate(bench.run_experiment(spec, jobs=jobs), spec.aggregation)
        out.append((bench.render(table, "csv"), bench.render(table, "json")))
    assert out[0][0] == out[1][0], "CSV differs between --jobs 1 and --jobs 8"
    assert out[0][1] == out[1][1], "JSON records differ between --jobs 1 and --jobs 8"


SUITES = {
    "amplitude_normalization": amplitude_normalization,
    "measurement_frequency": measurement_frequency,
    "monotone_history": monotone_history,
    "repair_symmetry": repair_symmetry,
    "residual_orthogonality": residual_orthogonality,
    "determinism": determinism,
}


def run_all(names=None, echo=print) -> list[str]:
    """Run the named suites (all by default); return the names that failed."""
    failed = []
    for name in names or list(SUITES):
        t0 = time.perf_counter()
        try:
            SUITES[name]()
        except Exception as exc:
            failed.append(name)
            echo(f"FAIL {name}: {type(exc).__name__}: {exc}")
        else:
            echo(f"PASS {name} ({time.perf_counter() - t0:.2f} s)")
    return failed

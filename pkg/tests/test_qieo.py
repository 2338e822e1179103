import math

import numpy as np
import pytest

from qieo_l0 import kernels, qieo
from qieo_l0.numerics import ContractError
from qieo_l0.problems import FitnessOutcome

PHI_MIN, PHI_MAX = 0.01 * math.pi, 0.49 * math.pi


class PopcountDistance:
    """Hamming distance to a hidden target; the optimum is 0."""

    budget = None

    def __init__(self, target):
        self.target = np.asarray(target, dtype=np.uint8)
        self.m = self.target.size

    def evaluate(self, bits, anchor=None):
        return np.abs(np.asarray(bits, dtype=np.int64) - self.target).sum(axis=1).astype(float)

    def decode(self, bits):
        f = float(np.abs(np.asarray(bits, dtype=np.int64) - self.target).sum())
        return FitnessOutcome(f, np.asarray(bits, dtype=float))


class NaNAt(PopcountDistance):
    def evaluate(self, bits, anchor=None):
        f = super().evaluate(bits)
        f[-1] = np.nan
        return f


def test_init_uniform_superposition():
    reg = qieo.init_population(4, 3)
    assert reg.shape == (4, 3)
    np.testing.assert_array_equal(reg, math.pi / 4)
    p1 = kernels.one_probabilities(reg)
    np.testing.assert_allclose(p1, 0.5, rtol=1e-15)
    # any specific 3-bit outcome: product of independent halves
    assert np.prod(p1[0]) == pytest.approx(1 / 8, rel=1e-14)


def test_init_rejects_small():
    with pytest.raises(ContractError):
        qieo.init_population(1, 3)
    with pytest.raises(ContractError):
        qieo.init_population(2, 0)


def test_measure_consumes_m_draws():
    s = kernels.Substream(3, 0)
    bits = qieo.measure(np.full(7, math.pi / 4), s)
    assert bits.shape == (7,) and s.position == 7


def test_measure_low_angle_all_zero():
    # (1 - sin^2(phi_min))^5, evaluated in closed form
    p_zero = (1 - math.sin(PHI_MIN) ** 2) ** 5
    assert p_zero >= 0.995
    bits = kernels.measure_population(np.full((4000, 5), PHI_MIN), 11, 0)
    freq = float((bits.sum(axis=1) == 0).mean())
    assert abs(freq - p_zero) <= 4 * math.sqrt(p_zero * (1 - p_zero) / 4000)


def test_measure_high_angle():
    p1 = math.sin(PHI_MAX) ** 2
    assert p1 == pytest.approx(0.999013, abs=1e-6)
    bits = kernels.measure_population(np.full((1, 20_000), PHI_MAX), 12, 0)
    assert bits.mean() >= 0.997


def test_measure_frequency_half():
    bits = kernels.measure_population(np.full((1, 10_000), math.pi / 4), 13, 0)
    assert 0.48 <= bits.mean() <= 0.52


def test_rotate_unchanged_on_match():
    pol = qieo.RotationPolicy()
    reg = np.array([0.3, 0.7, 1.1])
    bits = np.array([1, 0, 1], dtype=np.uint8)
    np.testing.assert_array_equal(qieo.rotate(reg, bits, bits, pol), reg)


def test_rotate_half_delta_toward_best():
    pol = qieo.RotationPolicy(delta=0.02 * math.pi)
    out = qieo.rotate(np.array([math.pi / 4]), np.array([0]), np.array([1]), pol)
    assert out[0] == pytest.approx(math.pi / 4 + 0.01 * math.pi, rel=1e-15)
    out = qieo.rotate(np.array([math.pi / 4]), np.array([1]), np.array([0]), pol)
    assert out[0] == pytest.approx(math.pi / 4 - 0.01 * math.pi, rel=1e-15)


def test_rotate_clamped():
    pol = qieo.RotationPolicy()
    assert qieo.rotate(np.array([PHI_MAX]), np.array([0]), np.array([1]), pol)[0] == PHI_MAX
    assert qieo.rotate(np.array([PHI_MIN]), np.array([1]), np.array([0]), pol)[0] == PHI_MIN


def test_rotate_length_mismatch():
    with pytest.raises(ContractError):
        qieo.rotate(np.zeros(3), np.zeros(2), np.zeros(3), qieo.RotationPolicy())


@pytest.mark.parametrize(
    "kw",
    [{"delta": 0.0}, {"delta": math.pi / 2}, {"phi_min": 0.0}, {"phi_min": 0.5, "phi_max": 0.4}, {"phi_max": math.pi / 2}],
)
def test_rotation_policy_validation(kw):
    with pytest.raises(ContractError):
        qieo.RotationPolicy(**kw)


@pytest.mark.parametrize(
    "kw", [{"population_size": 1}, {"max_generations": 0}, {"stall_window": 0}, {"observe": "best"}]
)
def test_config_validation(kw):
    with pytest.raises(ContractError):
        qieo.QieoConfig(**kw)


def test_config_round_trip():
    cfg = qieo.QieoConfig(population_size=12, seed=5, rotation=qieo.RotationPolicy(delta=0.1))
    assert qieo.QieoConfig.from_dict(cfg.to_dict()) == cfg


def test_popcount_smoke():
    target = np.array([1, 0, 1, 1, 0, 0, 1, 0, 1, 1], dtype=np.uint8)
    prob = PopcountDistance(target)
    solved = 0
    for seed in range(100):
        res = qieo.run(prob, qieo.QieoConfig(population_size=20, max_generations=200, seed=seed))
        solved += res.best_fitness == 0
    assert solved >= 95


def test_infinite_tolerance_stops_after_one_generation():
    res = qieo.run(PopcountDistance(np.ones(6)), qieo.QieoConfig(population_size=4, fitness_tolerance=math.inf))
    assert res.generations_run == 1
    assert len(res.history) == 1 and res.best_bits.shape == (6,)


def test_stall_window():
    # a flat landscape never improves after the first archive
    class Flat(PopcountDistance):
        def evaluate(self, bits, anchor=None):
            return np.ones(len(bits))

        def decode(self, bits):
            return FitnessOutcome(1.0, np.zeros(self.m))

    res = qieo.run(Flat(np.zeros(5)), qieo.QieoConfig(population_size=4, max_generations=100, stall_window=7))
    assert res.generations_run == 8


def test_history_monotone_and_final(gea_small):
    res = qieo.run(gea_small.problem(), qieo.QieoConfig(population_size=20, max_generations=60, seed=2))
    fits = [f for _, f in res.history]
    assert all(b <= a for a, b in zip(fits, fits[1:]))
    assert fits[-1] == res.best_fitness
    assert [g for g, _ in res.history] == list(range(res.generations_run))


def test_deterministic(gea_small):
    cfg = qieo.QieoConfig(population_size=20, max_generations=40, seed=9)
    a = qieo.run(gea_small.problem(), cfg)
    b = qieo.run(gea_small.problem(), cfg)
    np.testing.assert_array_equal(a.best_bits, b.best_bits)
    assert a.history == b.history
    np.testing.assert_array_equal(a.weights, b.weights)


def test_gea_small_recovers_support(gea_small):
    res = qieo.run(gea_small.problem(), qieo.QieoConfig(population_size=50, max_generations=500, fitness_tolerance=1e-20, seed=1))
    assert res.support.tolist() == gea_small.true_support.tolist()


def test_angles_stay_clamped(gea_small):
    seen = []
    qieo.run(
        gea_small.problem(),
        qieo.QieoConfig(population_size=10, max_generations=80, seed=4, rotation=qieo.RotationPolicy(delta=0.3)),
        callback=lambda g, f, a: seen.append((a.min(), a.max())),
    )
    lo, hi = min(s[0] for s in seen), max(s[1] for s in seen)
    assert lo >= PHI_MIN and hi <= PHI_MAX
    # diversity floor: no bit value ever has probability zero
    assert math.sin(lo) ** 2 >= math.sin(PHI_MIN) ** 2 * (1 - 1e-12)


def test_fixed_point_when_all_match_best():
    pol = qieo.RotationPolicy()
    reg = np.random.default_rng(0).uniform(PHI_MIN, PHI_MAX, size=(5, 8))
    best = np.array([1, 0, 0, 1, 1, 0, 1, 0], dtype=np.uint8)
    obs = np.tile(best, (5, 1))
    out = kernels.rotate_population(reg, obs, best, pol.delta, pol.phi_min, pol.phi_max)
    np.testing.assert_array_equal(out, reg)


def test_non_finite_fitness_names_bitstring():
    with pytest.raises(qieo.NonFiniteFitnessError, match=r"bitstring [01]{4}"):
        qieo.run(NaNAt(np.zeros(4)), qieo.QieoConfig(population_size=3))


def test_observe_repaired_runs(gea_small):
    res = qieo.run(gea_small.problem(), qieo.QieoConfig(population_size=20, max_generations=30, observe="repaired"))
    assert res.support.size == 5

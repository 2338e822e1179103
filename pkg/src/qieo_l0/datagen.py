"""Synthetic datasets for sparse recovery and robust regression.

Design matrices have iid N(0, 1) entries with columns rescaled to unit l2
norm. The robust recipe additionally normalizes w* and plants ``floor(alpha n)``
gross corruptions drawn uniformly from ``+-scale * ||X w*||_inf``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class DatasetFormatError(ValueError):
    pass


class SampleComplexityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SparseGenConfig:
    n: int
    p: int
    s: int
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or not 1 <= self.s <= self.p:
            raise ValueError(f"need n, p >= 1 and 1 <= s <= p; got {self}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")

    @property
    def kind(self):
        return "sparse"


@dataclass(frozen=True)
class RobustGenConfig:
    n: int
    p: int
    alpha: float
    outlier_scale: float = 5.0
    seed: int = 0
    # seeds the corruption draw only; None reuses ``seed``. With the same
    # ``seed``, X and w* are identical whatever alpha or corruption_seed is.
    corruption_seed: int | None = None

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.outlier_scale <= 0:
            raise ValueError("outlier_scale must be positive")
        if self.n - self.k <= self.p:
            raise ValueError(f"k = {self.k} corruptions leave too few clean rows for p = {self.p}")

    @property
    def k(self) -> int:
        # floor(alpha * n) with a guard against 0.1 * 600 = 59.999...
        return int(math.floor(self.alpha * self.n + 1e-9))

    @property
    def kind(self):
        return "robust"


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    w_star: np.ndarray
    true_support: np.ndarray
    kind: str
    provenance: dict = field(default_factory=dict)
    b_star: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def budget(self) -> int:
        return int(self.true_support.size)

    def problem(self, budget: int | None = None):
        from .problems import RobustRegressionProblem, SparseRecoveryProblem

        budget = self.budget if budget is None else budget
        if self.kind == "sparse":
            return SparseRecoveryProblem(self.X, self.y, budget)
        return RobustRegressionProblem(self.X, self.y, budget)


def _normalized_gaussian_design(rng, n, p):
    X = rng.standard_normal((n, p))
    return X / np.linalg.norm(X, axis=0)


def gen_sparse(config: SparseGenConfig) -> Dataset:
    n, p, s = config.n, config.p, config.s
    if n < s * math.log(p):
        warnings.warn(
            f"n = {n} is below s*ln(p) = {s * math.log(p):.1f}; recovery is not guaranteed",
            SampleComplexityWarning,
            stacklevel=2,
        )
    rng = np.random.default_rng(config.seed)
    X = _normalized_gaussian_design(rng, n, p)
    support = np.sort(rng.choice(p, size=s, replace=False)).astype(np.int64)
    w = np.zeros(p)
    w[support] = rng.standard_normal(s)
    y = X @ w
    if config.noise_sigma > 0:
        y = y + config.noise_sigma * rng.standard_normal(n)
    return Dataset(X, y, w, support, "sparse", {"generator": "sparse", **asdict(config)})


def gen_robust(config: RobustGenConfig) -> Dataset:
    n, p, k = config.n, config.p, config.k
    design = np.random.default_rng([config.seed, 0])
    X = _normalized_gaussian_design(design, n, p)
    w = design.standard_normal(p)
    w /= np.linalg.norm(w)
    y_clean = X @ w
    cseed = config.seed if config.corruption_seed is None else config.corruption_seed
    corrupt = np.random.default_rng([cseed, 1, k])
    support = np.sort(corrupt.choice(n, size=k, replace=False)).astype(np.int64)
    bound = config.outlier_scale * float(np.max(np.abs(y_clean)))
    b = np.zeros(n)
    b[support] = corrupt.uniform(-bound, bound, size=k)
    return Dataset(X, y_clean + b, w, support, "robust", {"generator": "robust", **asdict(config)}, b)


def generate(config: dict) -> Dataset:
    """Build a dataset from a plain generator mapping with a ``kind`` key."""
    config = dict(config)
    kind = config.pop("kind", None)
    if kind == "sparse":
        return gen_sparse(SparseGenConfig(**config))
    if kind == "robust":
        return gen_robust(RobustGenConfig(**config))
    raise ValueError(f"unknown dataset kind {kind!r}")


# serialization --------------------------------------------------------------
# Floats go through json's repr-based encoding, which round-trips exactly.


def dataset_to_dict(ds: Dataset) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": ds.kind,
        "n": ds.n,
        "p": ds.p,
        "s_or_k": ds.budget,
        "seed": ds.provenance.get("seed"),
        "generator_config": ds.provenance,
        "X": ds.X.ravel().tolist(),
        "y": ds.y.tolist(),
        "w_star": ds.w_star.tolist(),
        "true_support": ds.true_support.tolist(),
        "b_star": None if ds.b_star is None else ds.b_star.tolist(),
    }


def _field(doc, name, path):
    if name not in doc:
        raise DatasetFormatError(f"{path}: missing field '{name}'")
    return doc[name]


def _real_array(doc, name, length, path):
    vals = _field(doc, name, path)
    if not isinstance(vals, list):
        raise DatasetFormatError(f"{path}: field '{name}' must be an array")
    if len(vals) != length:
        raise DatasetFormatError(f"{path}: field '{name}' has {len(vals)} entries, expected {length}")
    try:
        arr = np.array(vals, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise DatasetFormatError(f"{path}: field '{name}' is not numeric ({exc})") from None
    if not np.all(np.isfinite(arr)):
        raise DatasetFormatError(f"{path}: field '{name}' has non-finite entries")
    return arr


def dataset_from_dict(doc: dict, path="<dataset>") -> Dataset:
    if not isinstance(doc, dict):
        raise DatasetFormatError(f"{path}: top level must be an object")
    version = _field(doc, "format_version", path)
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"{path}: unsupported format_version {version!r}")
    kind = _field(doc, "kind", path)
    if kind not in ("sparse", "robust"):
        raise DatasetFormatError(f"{path}: field 'kind' must be 'sparse' or 'robust', got {kind!r}")
    n, p, budget = (_field(doc, key, path) for key in ("n", "p", "s_or_k"))
    for key, val in (("n", n), ("p", p), ("s_or_k", budget)):
        if not isinstance(val, int) or val < 0:
            raise DatasetFormatError(f"{path}: field '{key}' must be a nonnegative integer")
    X = _real_array(doc, "X", n * p, path).reshape(n, p)
    y = _real_array(doc, "y", n, path)
    w = _real_array(doc, "w_star", p, path)
    support = np.array(_field(doc, "true_support", path), dtype=np.int64)
    if support.size != budget:
        raise DatasetFormatError(f"{path}: true_support has {support.size} entries but s_or_k = {budget}")
    limit = p if kind == "sparse" else n
    if support.size and (support.min() < 0 or support.max() >= limit):
        raise DatasetFormatError(f"{path}: true_support index out of range [0, {limit})")
    b = doc.get("b_star")
    b = None if b is None else _real_array(doc, "b_star", n, path)
    return Dataset(X, y, w, support, kind, dict(_field(doc, "generator_config", path)), b)


def save_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(json.dumps(dataset_to_dict(ds)) + "\n")


def load_dataset(path) -> Dataset:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return dataset_from_dict(doc, path)

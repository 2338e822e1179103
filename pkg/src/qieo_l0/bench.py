"""Multi-trial experiments: metrics, seeding, aggregation and table rendering.

An experiment document names one or more datasets (inline generator configs
or dataset files) and a list of solver entries. Every stochastic solver runs
``trials`` times with seeds derived from ``(base_seed, solver label, trial)``;
deterministic solvers run once. Records are sorted before aggregation, so
output never depends on scheduling or on the number of worker processes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import datagen, qieo
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
from .numerics import ContractError

CSV_COLUMNS = (
    "experiment_id",
    "dataset",
    "solver",
    "aggregation",
    "mse",
    "recovery_hits",
    "recovery_total",
    "extras",
    "support_length",
    "w_err_sq",
    "generations",
    "wall_ms",
)


class SpecError(ContractError):
    """Invalid experiment document or unresolvable solver/dataset."""


class ExperimentFailure(RuntimeError):
    """One or more trials raised; ``records`` holds the trials that finished."""

    def __init__(self, failures, records):
        self.failures = failures
        self.records = records
        first = failures[0]
        super().__init__(
            f"{len(failures)} trial(s) failed; first: dataset={first['dataset']!r} "
            f"solver={first['solver']!r} trial={first['trial']} seed={first['seed']}: {first['error']}"
        )


# solver registry ------------------------------------------------------------


@dataclass(frozen=True)
class SolverSpec:
    config_type: type
    runner: object
    stochastic: bool
    kinds: tuple


def _run_qieo(problem, config):
    return qieo.run(problem, config)


SOLVERS = {
    "qieo": SolverSpec(qieo.QieoConfig, _run_qieo, True, ("sparse", "robust")),
    "ga": SolverSpec(GaConfig, run_ga, True, ("sparse", "robust")),
    "de": SolverSpec(DeConfig, run_de, True, ("sparse",)),
    "iht": SolverSpec(IhtConfig, run_iht, False, ("sparse",)),
    "adam": SolverSpec(AdamConfig, run_adam, False, ("sparse", "robust")),
    "amrr": SolverSpec(AmrrConfig, run_amrr, False, ("robust",)),
}


def trial_seed(base_seed: int, solver: str, trial: int) -> int:
    """64-bit seed from blake2b over ``"base_seed/solver/trial"``."""
    h = hashlib.blake2b(f"{int(base_seed)}/{solver}/{int(trial)}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


# metrics --------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    mse: float
    recovery_hits: int
    recovery_total: int
    extras: int
    support_length: int
    w_err_sq: float
    generations: int
    # None when timing is disabled for the experiment
    wall_ms: float | None = None

    def __post_init__(self):
        if self.extras != self.support_length - self.recovery_hits or self.extras < 0:
            raise ContractError("extras must equal support_length - recovery_hits and be >= 0")
        if self.recovery_hits > min(self.recovery_total, self.support_length):
            raise ContractError("recovery_hits exceeds recovery_total or support_length")


def recovery_rate(estimated, truth) -> tuple[int, int, int]:
    """Return ``(hits, total, extras)`` for two index sets."""
    truth = {int(i) for i in truth}
    if not truth:
        raise ContractError("true support must be nonempty")
    est = {int(i) for i in estimated}
    return len(est & truth), len(truth), len(est - truth)


def evaluate(result: qieo.SolverResult, ds: datagen.Dataset, wall_ms: float | None = None) -> Metrics:
    """Score a solver result against the planted truth of ``ds``.

    Sparse datasets compare feature supports against ``w_star``; robust ones
    compare row supports against ``b_star``.
    """
    width = ds.p if ds.kind == "sparse" else ds.n
    if len(result.best_bits) != width:
        raise ContractError(
            f"result has {len(result.best_bits)} bits but a {ds.kind} dataset needs {width}"
        )
    est = result.support
    hits, total, extras = recovery_rate(est, ds.true_support)
    w = np.asarray(result.weights, dtype=np.float64)
    return Metrics(
        mse=float(result.best_fitness),
        recovery_hits=hits,
        recovery_total=total,
        extras=extras,
        support_length=int(est.size),
        w_err_sq=float(np.sum((w - ds.w_star) ** 2)),
        generations=int(result.generations_run),
        wall_ms=wall_ms,
    )


# experiment documents -------------------------------------------------------


@dataclass(frozen=True)
class DatasetEntry:
    name: str
    generator: dict | None = None
    path: str | None = None
    budget: int | None = None

    def load(self, base_dir: Path) -> datagen.Dataset:
        if self.generator is not None:
            return datagen.generate(self.generator)
        p = Path(self.path)
        return datagen.load_dataset(p if p.is_absolute() else base_dir / p)


@dataclass(frozen=True)
class SolverEntry:
    name: str
    label: str
    config: dict = field(default_factory=dict)

    def make_config(self, seed: int | None = None):
        spec = SOLVERS[self.name]
        cfg = dict(self.config)
        if spec.stochastic and seed is not None:
            cfg["seed"] = seed
        return spec.config_type.from_dict(cfg)


@dataclass(frozen=True)
class ExperimentSpec:
    datasets: tuple
    solvers: tuple
    trials: int = 5
    base_seed: int = 0
    aggregation: str = "best"
    experiment_id: str | None = None
    # wall clock is excluded by default so reruns are byte-identical
    timing: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise SpecError("trials must be >= 1")
        if self.aggregation not in ("best", "median"):
            raise SpecError(f"aggregation must be 'best' or 'median', got {self.aggregation!r}")
        if not self.datasets:
            raise SpecError("experiment needs at least one dataset")
        if not self.solvers:
            raise SpecError("experiment needs at least one solver")
        labels = [s.label for s in self.solvers]
        if len(set(labels)) != len(labels):
            raise SpecError(f"solver labels must be unique, got {labels}")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise SpecError(f"dataset names must be unique, got {names}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        if not isinstance(doc, dict):
            raise SpecError("experiment document must be an object")
        known = {"dataset", "datasets", "solvers", "trials", "base_seed", "aggregation", "experiment_id", "timing"}
        extra = set(doc) - known
        if extra:
            raise SpecError(f"unknown experiment fields: {sorted(extra)}")
        if ("dataset" in doc) == ("datasets" in doc):
            raise SpecError("give exactly one of 'dataset' or 'datasets'")
        raw = doc["datasets"] if "datasets" in doc else [doc["dataset"]]
        if not isinstance(raw, list):
            raise SpecError("'datasets' must be a list")
        datasets = tuple(_dataset_entry(d, i) for i, d in enumerate(raw))
        solvers = doc.get("solvers")
        if not isinstance(solvers, list):
            raise SpecError("'solvers' must be a list")
        entries = tuple(_solver_entry(s) for s in solvers)
        try:
            return cls(
                datasets=datasets,
                solvers=entries,
                trials=int(doc.get("trials", 5)),
                base_seed=int(doc.get("base_seed", 0)),
                aggregation=doc.get("aggregation", "best"),
                experiment_id=doc.get("experiment_id"),
                timing=bool(doc.get("timing", False)),
            )
        except (TypeError, ValueError) as exc:
            raise SpecError(str(exc)) from None

    def to_dict(self) -> dict:
        """Effective configuration with every solver default filled in."""
        solvers = []
        for s in self.solvers:
            cfg = s.make_config().to_dict()
            if SOLVERS[s.name].stochastic:
                cfg.pop("seed", None)
            solvers.append({"name": s.name, "label": s.label, "config": cfg})
        datasets = []
        for d in self.datasets:
            e = {"name": d.name}
            if d.generator is not None:
                e["generator"] = dict(d.generator)
            else:
                e["path"] = d.path
            if d.budget is not None:
                e["budget"] = d.budget
            datasets.append(e)
        return {
            "experiment_id": self.resolved_id(),
            "datasets": datasets,
            "solvers": solvers,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "aggregation": self.aggregation,
            "timing": self.timing,
        }

    def resolved_id(self) -> str:
        if self.experiment_id:
            return self.experiment_id
        body = {
            "datasets": [asdict(d) for d in self.datasets],
            "solvers": [asdict(s) for s in self.solvers],
            "trials": self.trials,
            "base_seed": self.base_seed,
        }
        text = json.dumps(body, sort_keys=True)
        return "exp-" + hashlib.blake2b(text.encode(), digest_size=6).hexdigest()


def _dataset_entry(d, i) -> DatasetEntry:
    if not isinstance(d, dict):
        raise SpecError(f"dataset entry {i} must be an object")
    extra = set(d) - {"name", "generator", "path", "budget"}
    if extra:
        raise SpecError(f"dataset entry {i}: unknown fields {sorted(extra)}")
    if ("generator" in d) == ("path" in d):
        raise SpecError(f"dataset entry {i}: give exactly one of 'generator' or 'path'")
    gen = d.get("generator")
    if gen is not None and (not isinstance(gen, dict) or gen.get("kind") not in ("sparse", "robust")):
        raise SpecError(f"dataset entry {i}: generator needs kind 'sparse' or 'robust'")
    name = d.get("name") or (f"dataset{i}" if gen is not None else Path(d["path"]).stem)
    budget = d.get("budget")
    if budget is not None and (not isinstance(budget, int) or budget < 0):
        raise SpecError(f"dataset entry {i}: budget must be a nonnegative integer")
    return DatasetEntry(str(name), gen, d.get("path"), budget)


def _solver_entry(s) -> SolverEntry:
    if isinstance(s, str):
        s = {"name": s}
    if not isinstance(s, dict) or "name" not in s:
        raise SpecError(f"solver entry must be a name or an object with 'name', got {s!r}")
    extra = set(s) - {"name", "label", "config"}
    if extra:
        raise SpecError(f"solver {s['name']!r}: unknown fields {sorted(extra)}")
    name = s["name"]
    if name not in SOLVERS:
        raise SpecError(f"unknown solver {name!r}; known: {sorted(SOLVERS)}")
    entry = SolverEntry(name, s.get("label", name), dict(s.get("config", {})))
    try:
        entry.make_config()
    except (TypeError, ValueError) as exc:
        raise SpecError(f"solver {entry.label!r}: bad config: {exc}") from None
    return entry


def load_spec(path) -> ExperimentSpec:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return ExperimentSpec.from_dict(doc)


# running --------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    experiment_id: str
    dataset: str
    solver: str
    trial: int
    seed: int | None
    metrics: Metrics
    config: dict
    support: tuple = ()
    history: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["support"] = list(self.support)
        d["history"] = [list(h) for h in self.history]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        d = dict(d)
        d["metrics"] = Metrics(**d["metrics"])
        d["support"] = tuple(d.get("support", ()))
        d["history"] = tuple(tuple(h) for h in d.get("history", ()))
        return cls(**d)


_DATASETS: dict = {}


def _init_worker(datasets):
    global _DATASETS
    _DATASETS = datasets


def _run_trial(task):
    exp_id, ds_name, budget, entry, trial, seed, timing = task
    ds = _DATASETS[ds_name]
    cfg = entry.make_config(seed)
    try:
        with threadpool_limits(limits=1):
            t0 = time.perf_counter()
            result = SOLVERS[entry.name].runner(ds.problem(budget), cfg)
            elapsed = (time.perf_counter() - t0) * 1e3
        metrics = evaluate(result, ds, round(elapsed, 3) if timing else None)
    except Exception as exc:  # reported per trial, never swallowed
        return {
            "dataset": ds_name,
            "solver": entry.label,
            "trial": trial,
            "seed": seed,
            "error": f"{type(exc).__name__}: {exc}",
        }
    return TrialRecord(
        experiment_id=exp_id,
        dataset=ds_name,
        solver=entry.label,
        trial=trial,
        seed=seed,
        metrics=metrics,
        config=cfg.to_dict(),
        support=tuple(int(i) for i in result.support),
        history=tuple((int(g), float(f)) for g, f in result.history),
    )


def resolve_datasets(spec: ExperimentSpec, base_dir=".") -> dict:
    """Generate or load every dataset once and check solver applicability."""
    out = {}
    for d in spec.datasets:
        try:
            ds = d.load(Path(base_dir))
        except (OSError, ValueError) as exc:
            raise SpecError(f"dataset {d.name!r}: {exc}") from None
        for s in spec.solvers:
            if ds.kind not in SOLVERS[s.name].kinds:
                raise SpecError(f"solver {s.label!r} does not apply to {ds.kind} dataset {d.name!r}")
        out[d.name] = ds
    return out


def run_experiment(spec: ExperimentSpec, jobs: int = 1, base_dir=".", datasets=None) -> list[TrialRecord]:
    """Run every (dataset, solver, trial) and return records in canonical order.

    Raises ``ExperimentFailure`` after all trials finish if any of them
    raised; finished records travel with the exception.
    """
    if jobs < 1:
        raise SpecError("jobs must be >= 1")
    if datasets is None:
        datasets = resolve_datasets(spec, base_dir)
    exp_id = spec.resolved_id()
    tasks = []
    for d in spec.datasets:
        for s in spec.solvers:
            stochastic = SOLVERS[s.name].stochastic
            for t in range(spec.trials if stochastic else 1):
                seed = trial_seed(spec.base_seed, s.label, t) if stochastic else None
                tasks.append((exp_id, d.name, d.budget, s, t, seed, spec.timing))
    if jobs == 1 or len(tasks) == 1:
        _init_worker(datasets)
        outputs = [_run_trial(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(datasets,)) as pool:
            outputs = list(pool.map(_run_trial, tasks))
    records = [o for o in outputs if isinstance(o, TrialRecord)]
    failures = [o for o in outputs if not isinstance(o, TrialRecord)]
    records = sort_records(records, spec)
    if failures:
        raise ExperimentFailure(failures, records)
    return records


def sort_records(records, spec: ExperimentSpec | None = None):
    if spec is None:
        return sorted(records, key=lambda r: (r.dataset, r.solver, r.trial))
    d_ord = {d.name: i for i, d in enumerate(spec.datasets)}
    s_ord = {s.label: i for i, s in enumerate(spec.solvers)}
    return sorted(records, key=lambda r: (d_ord[r.dataset], s_ord[r.solver], r.trial))


# aggregation and rendering --------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    experiment_id: str
    dataset: str
    solver: str
    aggregation: str
    metrics: Metrics


@dataclass(frozen=True)
class ReportTable:
    rows: tuple
    aggregation: str
    records: tuple = ()


def aggregate(records, mode: str = "best") -> ReportTable:
    """One row per (dataset, solver), in order of first appearance.

    ``best`` keeps the minimal-mse record (ties to the lowest trial).
    ``median`` takes the lower median of each numeric metric separately and
    the support counts of the median-mse trial.
    """
    if mode not in ("best", "median"):
        raise ContractError(f"unknown aggregation {mode!r}")
    records = list(records)
    if not records:
        raise ContractError("cannot aggregate an empty record list")
    groups: dict = {}
    for r in records:
        groups.setdefault((r.dataset, r.solver), []).append(r)
    rows = []
    for (dname, sname), grp in groups.items():
        grp = sorted(grp, key=lambda r: r.trial)
        ranked = sorted(grp, key=lambda r: (r.metrics.mse, r.trial))
        if mode == "best":
            m = ranked[0].metrics
        else:
            mid = ranked[(len(ranked) - 1) // 2].metrics
            walls = [r.metrics.wall_ms for r in grp]
            m = Metrics(
                mse=statistics.median_low([r.metrics.mse for r in grp]),
                recovery_hits=mid.recovery_hits,
                recovery_total=mid.recovery_total,
                extras=mid.extras,
                support_length=mid.support_length,
                w_err_sq=statistics.median_low([r.metrics.w_err_sq for r in grp]),
                generations=statistics.median_low([r.metrics.generations for r in grp]),
                wall_ms=None if None in walls else statistics.median_low(walls),
            )
        rows.append(ReportRow(grp[0].experiment_id, dname, sname, mode, m))
    return ReportTable(tuple(rows), mode, tuple(records))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(table: ReportTable, fmt: str = "csv") -> str:
    if fmt == "csv":
        return _render_csv(table)
    if fmt == "markdown":
        return _render_markdown(table)
    if fmt == "json":
        return _render_json(table)
    raise ContractError(f"unknown format {fmt!r}")


def _render_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in table.rows:
        m = asdict(row.metrics)
        w.writerow([row.experiment_id, row.dataset, row.solver, row.aggregation] + [_fmt(m[c]) for c in CSV_COLUMNS[4:]])
    return buf.getvalue()


def parse_csv(text: str) -> ReportTable:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ContractError(f"unexpected CSV header {header!r}")
    types = {f.name: f.type for f in fields(Metrics)}
    rows = []
    for line in reader:
        vals = dict(zip(CSV_COLUMNS, line))
        kw = {}
        for c in CSV_COLUMNS[4:]:
            v = vals[c]
            if v == "":
                kw[c] = None
            elif types[c] == "int":
                kw[c] = int(v)
            else:
                kw[c] = float(v)
        rows.append(ReportRow(vals["experiment_id"], vals["dataset"], vals["solver"], vals["aggregation"], Metrics(**kw)))
    mode = rows[0].aggregation if rows else "best"
    return ReportTable(tuple(rows), mode)


def recovery_cell(m: Metrics) -> str:
    cell = f"{m.recovery_hits}/{m.recovery_total}"
    if m.extras:
        cell += f" (+{m.extras} extras)"
    return cell


def _sci(v: float) -> str:
    if v == 0 or not math.isfinite(v):
        return str(v)
    return f"{v:.4g}"


def _render_markdown(table):
    out = []
    datasets = list(dict.fromkeys(r.dataset for r in table.rows))
    label = "Best" if table.aggregation == "best" else "Median"
    for dname in datasets:
        out.append(f"### {dname}\n")
        out.append(f"| Solver | {label} MSE | Recovery | Support Length | ‖w − w*‖² | Generations |")
        out.append("|---|---|---|---|---|---|")
        for r in table.rows:
            if r.dataset != dname:
                continue
            m = r.metrics
            out.append(
                f"| {r.solver} | {_sci(m.mse)} | {recovery_cell(m)} | {m.support_length} | {_sci(m.w_err_sq)} | {m.generations} |"
            )
        out.append("")
    return "\n".join(out)


def _render_json(table):
    doc = {
        "aggregation": table.aggregation,
        "rows": [{"dataset": r.dataset, "solver": r.solver, "experiment_id": r.experiment_id, **asdict(r.metrics)} for r in table.rows],
        "records": [r.to_dict() for r in table.records],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)

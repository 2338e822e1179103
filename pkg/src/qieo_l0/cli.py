"""``qieo-l0`` command line: gen, run, report, oracle, selftest.

Exit codes: 0 success, 2 configuration error, 3 solver or runtime error,
4 oracle refused by the enumeration guard. ``QIEO_L0_OUT`` sets the default
output directory of ``run``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, bench, datagen, kernels, selftest
from .numerics import ContractError
from .problems import ORACLE_LIMIT, InfeasibleBudgetError, OracleGuardError, bits_of, brute_force_oracle

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_GUARD = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# gen ------------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            _err(f"cannot read generator config {args.config}: {exc}")
            return EXIT_CONFIG
    else:
        if args.kind is None:
            _err("give --config or --kind with its size flags")
            return EXIT_CONFIG
        cfg = {"kind": args.kind, "n": args.n, "p": args.p, "seed": args.seed}
        if args.kind == "sparse":
            cfg.update(s=args.s, noise_sigma=args.noise_sigma)
        else:
            cfg.update(alpha=args.alpha, outlier_scale=args.outlier_scale)
        missing = [k for k, v in cfg.items() if v is None]
        if missing:
            _err(f"missing flags for --kind {args.kind}: {', '.join('--' + k.replace('_', '-') for k in missing)}")
            return EXIT_CONFIG
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            ds = datagen.generate(cfg)
        except (TypeError, ValueError) as exc:
            _err(f"invalid generator config: {exc}")
            return EXIT_CONFIG
    datagen.save_dataset(ds, args.out)
    print(f"wrote {args.out}: kind={ds.kind} n={ds.n} p={ds.p} budget={ds.budget} seed={ds.provenance.get('seed')}")
    print("config: " + json.dumps(ds.provenance, sort_keys=True))
    for w in caught:
        print(f"warning: {w.message}")
    return EXIT_OK


# run ------------------------------------------------------------------------


def _outputs(out: Path, spec, records, failures=()):
    eff = spec.to_dict()
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out / "records.json",
        {
            "effective_config": eff,
            "kernel_backend": kernels.BACKEND,
            "records": [r.to_dict() for r in records],
            "failures": list(failures),
        },
    )
    if not records:
        return
    table = bench.aggregate(records, spec.aggregation)
    (out / "results.csv").write_text(bench.render(table, "csv"))
    md = bench.render(table, "markdown")
    md += "\n<details><summary>effective configuration</summary>\n\n```json\n"
    md += json.dumps(eff, indent=1, sort_keys=True) + "\n```\n</details>\n"
    (out / "results.md").write_text(md)


def cmd_run(args) -> int:
    try:
        spec = bench.load_spec(args.spec)
        datasets = bench.resolve_datasets(spec, Path(args.spec).parent)
    except (OSError, ContractError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if args.jobs < 1:
        _err("--jobs must be >= 1")
        return EXIT_CONFIG
    out = Path(args.out or os.environ.get("QIEO_L0_OUT") or "qieo-results")
    try:
        records = bench.run_experiment(spec, jobs=args.jobs, datasets=datasets)
    except bench.ExperimentFailure as exc:
        _outputs(out, spec, exc.records, exc.failures)
        _err(str(exc))
        for f in exc.failures:
            _err(f"failed trial: dataset={f['dataset']} solver={f['solver']} trial={f['trial']} seed={f['seed']}")
        print(f"partial results ({len(exc.records)} records) kept in {out}", file=sys.stderr)
        return EXIT_RUNTIME
    _outputs(out, spec, records)
    print(f"{len(records)} records -> {out}")
    print((out / "results.md").read_text().split("\n<details>")[0])
    return EXIT_OK


# report ---------------------------------------------------------------------


def cmd_report(args) -> int:
    try:
        doc = json.loads(Path(args.records).read_text())
        records = [bench.TrialRecord.from_dict(r) for r in doc["records"]]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        _err(f"cannot read records from {args.records}: {exc}")
        return EXIT_CONFIG
    if not records:
        text = bench.render(bench.ReportTable((), args.aggregation or "best"), args.format)
    else:
        mode = args.aggregation or doc.get("effective_config", {}).get("aggregation", "best")
        text = bench.render(bench.aggregate(records, mode), args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# oracle ---------------------------------------------------------------------


def cmd_oracle(args) -> int:
    try:
        ds = datagen.load_dataset(args.dataset)
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    budget = ds.budget if args.budget is None else args.budget
    try:
        problem = ds.problem(budget)
        support, fitness = brute_force_oracle(problem, budget, args.limit)
    except OracleGuardError as exc:
        print(
            f"refused: C({problem.m}, {budget}) = {exc.count} supports exceeds the limit of {exc.limit}",
            file=sys.stderr,
        )
        return EXIT_GUARD
    except (ContractError, InfeasibleBudgetError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    out = problem.decode(bits_of(support, problem.m))
    report = {
        "dataset": str(args.dataset),
        "kind": ds.kind,
        "budget": budget,
        "supports_enumerated": math.comb(problem.m, budget),
        "support": support.tolist(),
        "fitness": fitness,
        "weights": np.asarray(out.weights).tolist(),
        "planted_support": ds.true_support.tolist(),
        "generator_config": ds.provenance,
    }
    print(f"optimal support ({len(support)}): {support.tolist()}")
    print(f"fitness: {fitness!r}")
    print(f"planted support: {ds.true_support.tolist()}")
    if args.out:
        _write_json(Path(args.out), report)
    return EXIT_OK


# selftest -------------------------------------------------------------------


def cmd_selftest(args) -> int:
    print(f"kernel backend: {kernels.BACKEND}")
    failed = selftest.run_all(args.suite or None)
    if failed:
        print(f"selftest failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_RUNTIME
    print("all suites passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qieo-l0", description="QIEO for l0-constrained regression: data, solvers, benchmarks.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic dataset file")
    g.add_argument("--config", help="JSON generator config with a 'kind' key")
    g.add_argument("--kind", choices=("sparse", "robust"))
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=int)
    g.add_argument("--s", type=int, help="sparsity (sparse kind)")
    g.add_argument("--alpha", type=float, help="corruption fraction (robust kind)")
    g.add_argument("--noise-sigma", type=float, default=0.0)
    g.add_argument("--outlier-scale", type=float, default=5.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="dataset file to write")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run an experiment document")
    r.add_argument("spec", help="experiment JSON file")
    r.add_argument("--out", help="output directory (default: $QIEO_L0_OUT or ./qieo-results)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes; results do not depend on it")
    r.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-render records.json")
    p.add_argument("records")
    p.add_argument("--format", choices=("csv", "markdown", "json"), default="markdown")
    p.add_argument("--aggregation", choices=("best", "median"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    o = sub.add_parser("oracle", help="exhaustive optimum over all supports of a given size")
    o.add_argument("dataset")
    o.add_argument("--budget", type=int, help="support size (default: the dataset's s or k)")
    o.add_argument("--limit", type=int, default=ORACLE_LIMIT, help="largest enumeration allowed")
    o.add_argument("--out", help="write a JSON report here")
    o.set_defaults(func=cmd_oracle)

    t = sub.add_parser("selftest", help="run the invariant suites")
    t.add_argument("--suite", action="append", choices=sorted(selftest.SUITES), help="run only this suite (repeatable)")
    t.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

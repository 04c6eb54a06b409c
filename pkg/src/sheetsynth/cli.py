"""Command-line entry points: gen-data, train, synthesize, bench, report.

Exit codes: 0 success, 1 usage or configuration error, 2 search finished
without a solution. BUSTLE_SEED in the environment overrides the default of
every --seed flag.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .benchmarks import load_benchmarks, load_case
from .datagen import GenConfig, build_dataset, build_premise_dataset, load_dataset
from .model import (
    DatasetError,
    ModelIOError,
    TrainConfig,
    load_params,
    save_params,
    train_classifier,
    train_op_classifier,
)
from .reporting import (
    ResultRow,
    histogram_rows,
    histogram_svg,
    read_histogram_csv,
    read_results_csv,
    solve_curve_svg,
    write_histogram_csv,
    write_results_csv,
)
from .search import SearchConfig, synthesize
from .dsl import eval_expr, parse_formula

BENCH_MODES = ("none", "heuristic", "model", "combined", "premise")
PAPER_SCALE_EXPRESSIONS = 10_000_000
PAPER_SCALE_SECONDS = 30.0


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("BUSTLE_SEED", "0")
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"BUSTLE_SEED must be an integer, got {raw!r}") from exc


class _Parser(argparse.ArgumentParser):
    # Usage problems exit 1, not argparse's default 2.
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sheetsynth",
                     description="Synthesize spreadsheet string formulas from examples.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a training dataset")
    p.add_argument("--out", required=True, help="dataset file to write (JSON lines)")
    p.add_argument("--kind", choices=("guidance", "premise"), default="guidance")
    p.add_argument("--searches", type=int, default=1000)
    p.add_argument("--budget", type=int, default=50_000,
                   help="expressions per collection search")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a classifier from a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="weight file to write")
    p.add_argument("--kind", choices=("guidance", "premise"), default="guidance")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synthesize", help="solve one task file")
    p.add_argument("--task", required=True)
    p.add_argument("--guidance", choices=("none", "model", "heuristic", "combined"),
                   default="none")
    p.add_argument("--model", help="guidance weight file")
    p.add_argument("--premise", help="op-ranker weight file enabling the op filter")
    p.add_argument("--premise-k", type=int, default=4)
    p.add_argument("--max-expressions", type=int, default=1_000_000)
    p.add_argument("--max-seconds", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("bench", help="run the benchmark suite")
    p.add_argument("--benchmarks", default=None, help="task directory (default: shipped suite)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--modes", default="none",
                   help=f"comma-separated subset of {','.join(BENCH_MODES)}")
    p.add_argument("--model", help="guidance weight file (model/combined modes)")
    p.add_argument("--premise", help="op-ranker weight file (premise mode)")
    p.add_argument("--premise-k", type=int, default=4)
    p.add_argument("--max-expressions", type=int, default=1_000_000)
    p.add_argument("--max-seconds", type=float, default=None)
    p.add_argument("--paper-scale", action="store_true",
                   help=f"preset: {PAPER_SCALE_EXPRESSIONS} expressions, "
                        f"{PAPER_SCALE_SECONDS}s per case")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="regenerate plots from an existing results.csv")
    p.add_argument("--results", required=True)
    p.add_argument("--histogram", default=None, help="histogram csv to re-render")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def _seed_of(args) -> int:
    return args.seed if args.seed is not None else _default_seed()


def cmd_gen_data(args) -> int:
    config = GenConfig(num_searches=args.searches, search_budget=args.budget,
                       seed=_seed_of(args))
    build = build_dataset if args.kind == "guidance" else build_premise_dataset
    stats = build(config, args.out)
    print(f"wrote {stats['records']} records to {args.out}")
    print(f"label balance: {stats['label_balance']:.3f}  "
          f"short searches: {stats['short_searches']}")
    return 0


def cmd_train(args) -> int:
    records, header = load_dataset(args.data)
    if header is not None and header.get("kind") not in (None, args.kind):
        raise UsageError(
            f"dataset {args.data} holds {header.get('kind')!r} records, not {args.kind!r}")
    config = TrainConfig(epochs=args.epochs)
    train = train_classifier if args.kind == "guidance" else train_op_classifier
    params, metrics = train(records, config, seed=_seed_of(args))
    save_params(params, args.out)
    print(f"trained on {metrics['train_records']} records "
          f"({metrics['val_records']} held out)")
    print(f"val accuracy: {metrics['val_accuracy']:.4f}")
    print(f"val auc:      {metrics['val_auc']:.4f}")
    print(f"val loss:     {metrics['val_loss']:.4f}")
    losses = " ".join(f"{x:.4f}" for x in metrics["train_loss_per_epoch"])
    print(f"train loss by epoch: {losses}")
    return 0


def _search_config(args, mode: str) -> SearchConfig:
    model = premise = None
    if mode in ("model", "combined"):
        if not args.model:
            raise UsageError(f"--guidance {mode} needs --model")
        model = load_params(args.model)
        if model.kind != "guidance":
            raise UsageError(f"{args.model} is not a guidance weight file")
    # The synthesize command composes the op filter with any guidance mode;
    # in bench runs it is its own mode on top of the unguided baseline.
    if mode == "premise" and not args.premise:
        raise UsageError("premise filtering needs --premise")
    use_filter = mode == "premise" or (args.command == "synthesize" and args.premise)
    if use_filter:
        premise = load_params(args.premise)
        if premise.kind != "premise":
            raise UsageError(f"{args.premise} is not a premise weight file")
    return SearchConfig(
        max_expressions=args.max_expressions,
        time_budget=args.max_seconds,
        guidance="none" if mode == "premise" else mode,
        model=model,
        premise=premise,
        premise_k=args.premise_k,
    )


def cmd_synthesize(args) -> int:
    _seed_of(args)  # validated even though the search itself is deterministic
    case = load_case(args.task)
    config = _search_config(args, args.guidance)
    result = synthesize(case.task, config)
    if result.solved:
        print(result.formula)
    else:
        print("UNSOLVED")
    print(f"expressions: {result.expressions_considered}")
    print(f"elapsed: {result.elapsed:.3f}s")
    print(f"termination: {result.termination}")
    return 0 if result.solved else 2


def _bench_one(case, mode, config) -> ResultRow:
    result = synthesize(case.task, config)
    if result.solved:
        check = eval_expr(parse_formula(result.formula), case.task, config.limits)
        if check.vals != case.task.outputs:
            raise RuntimeError(f"{case.name}/{mode}: formula failed re-verification")
    row = ResultRow(case.name, mode, result.solved, result.expressions_considered,
                    result.elapsed, result.solve_weight, result.formula or "")
    return row, result.score_samples


def _bench_worker(packed):
    case, mode, config = packed
    try:
        return _bench_one(case, mode, config)
    except Exception as exc:  # keep the harness going; record the failure
        return ResultRow(case.name, mode, False, 0, 0.0, None, f"ERROR: {exc}"), None


def cmd_bench(args) -> int:
    modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
    if not modes or any(m not in BENCH_MODES for m in modes):
        raise UsageError(f"--modes must be a subset of {','.join(BENCH_MODES)}")
    if args.paper_scale:
        args.max_expressions = PAPER_SCALE_EXPRESSIONS
        if args.max_seconds is None:
            args.max_seconds = PAPER_SCALE_SECONDS
    if "premise" in modes and not args.premise:
        raise UsageError("premise mode needs --premise")
    cases = load_benchmarks(args.benchmarks)
    configs = {mode: _search_config(args, mode) for mode in modes}

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(case, mode, configs[mode]) for case in cases for mode in modes]
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            outcomes = list(pool.map(_bench_worker, jobs, chunksize=1))
    else:
        outcomes = [_bench_worker(job) for job in jobs]

    rows = [row for row, _ in outcomes]
    samples = [s for (row, sample) in outcomes if sample
               for s in sample]
    write_results_csv(rows, out_dir / "results.csv")
    rows = read_results_csv(out_dir / "results.csv")  # normalized order

    totals = {}
    for mode in modes:
        mode_rows = [r for r in rows if r.mode == mode]
        totals[mode] = {
            "cases": len(mode_rows),
            "solved": sum(r.solved for r in mode_rows),
            "expressions": sum(r.expressions for r in mode_rows),
            "seconds": round(sum(r.seconds for r in mode_rows), 3),
        }
    manifest = {
        "benchmarks": str(args.benchmarks) if args.benchmarks else "shipped",
        "modes": list(modes),
        "max_expressions": args.max_expressions,
        "max_seconds": args.max_seconds,
        "model": args.model,
        "premise": args.premise,
        "premise_k": args.premise_k,
        "parallel": args.parallel,
        "seed": _seed_of(args),
        "totals": totals,
    }
    (out_dir / "run.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                      encoding="utf-8")
    (out_dir / "solved_vs_expressions.svg").write_text(
        solve_curve_svg(rows, "expressions", "solved vs expressions considered",
                        x_budget=args.max_expressions), encoding="utf-8")
    (out_dir / "solved_vs_seconds.svg").write_text(
        solve_curve_svg(rows, "seconds", "solved vs elapsed seconds",
                        x_budget=args.max_seconds), encoding="utf-8")
    if any(m in ("model", "combined") for m in modes):
        hist = histogram_rows(samples)
        write_histogram_csv(hist, out_dir / "histogram.csv")
        (out_dir / "histogram.svg").write_text(histogram_svg(hist), encoding="utf-8")

    for mode in modes:
        t = totals[mode]
        rate = t["expressions"] / t["seconds"] if t["seconds"] > 0 else 0.0
        print(f"{mode:10s} solved {t['solved']:2d}/{t['cases']}  "
              f"expressions {t['expressions']:>12,}  seconds {t['seconds']:8.1f}  "
              f"throughput {rate:>10,.0f}/s")
    print(f"report written to {out_dir}")
    return 0


def cmd_report(args) -> int:
    rows = read_results_csv(args.results)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "solved_vs_expressions.svg").write_text(
        solve_curve_svg(rows, "expressions", "solved vs expressions considered"),
        encoding="utf-8")
    (out_dir / "solved_vs_seconds.svg").write_text(
        solve_curve_svg(rows, "seconds", "solved vs elapsed seconds"),
        encoding="utf-8")
    if args.histogram:
        hist = read_histogram_csv(args.histogram)
        (out_dir / "histogram.svg").write_text(histogram_svg(hist), encoding="utf-8")
    print(f"report written to {out_dir}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, DatasetError, ModelIOError, ValueError, OSError) as exc:
        print(f"sheetsynth: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

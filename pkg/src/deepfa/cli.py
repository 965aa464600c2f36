"""Command-line surface: split, run, project, plot, report.

Every command is a thin wrapper over the library; exit codes are stable
for scripting: 0 success, 1 usage error, 2 data error, 3 component failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import driver
from .data import (
    SplitSpec,
    load_dataset,
    read_feature_matrix,
    stratified_split,
    write_split_csv,
)
from .driver import ExperimentConfig, config_from_dict
from .errors import ComponentError, DataError, EngineError, UsageError
from .extractor import BUILTIN, EXTERNAL
from .plots import BY_CONFIDENCE, BY_LABEL, PlotSpec, write_scatter
from .tsne import TsneParams, tsne_embed, write_embedding_csv, write_loss_trace_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_COMPONENT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        raise UsageError(message)


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="override the base seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="partitions to run in parallel")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config mirroring ExperimentConfig fields")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deepfa",
                     description="semi-supervised annotation engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_split = sub.add_parser("split", parents=[], help="write a stratified S/U/T split")
    p_split.add_argument("--input", required=True, type=Path)
    p_split.add_argument("--format", default="csv", choices=["csv", "dfa-binary"])
    p_split.add_argument("--x", required=True, type=float,
                         help="supervised fraction in (0,1)")
    p_split.add_argument("--test", type=float, default=0.30,
                         help="test fraction (default 0.30)")
    p_split.add_argument("--out", required=True, type=Path,
                         help="output directory for split.csv")
    _common_flags(p_split)

    p_run = sub.add_parser("run", help="run an experiment")
    p_run.add_argument("--input", required=True, type=Path)
    p_run.add_argument("--format", default="csv", choices=["csv", "dfa-binary"])
    p_run.add_argument("--mode", choices=list(driver.MODES))
    p_run.add_argument("--x", type=float)
    p_run.add_argument("--test", type=float)
    p_run.add_argument("--iterations", type=int)
    p_run.add_argument("--partitions", type=int)
    p_run.add_argument("--extractor", default=None,
                       help="'builtin' or 'cmd:<command line>'")
    p_run.add_argument("--epochs", type=int, default=None)
    p_run.add_argument("--tsne-iterations", type=int, default=None)
    p_run.add_argument("--out", required=True, type=Path)
    _common_flags(p_run)

    p_proj = sub.add_parser("project", help="project features to a 2D embedding CSV")
    p_proj.add_argument("--input", required=True, type=Path)
    p_proj.add_argument("--format", default="dfa-binary",
                        choices=["csv", "dfa-binary"])
    p_proj.add_argument("--out", required=True, type=Path)
    p_proj.add_argument("--trace", type=Path, default=None,
                        help="also write the iteration,kl loss trace")
    p_proj.add_argument("--perplexity", type=float, default=None)
    p_proj.add_argument("--iterations", type=int, default=None)
    _common_flags(p_proj)

    p_plot = sub.add_parser("plot", help="render an embedding as SVG")
    p_plot.add_argument("--embedding", required=True, type=Path)
    p_plot.add_argument("--labels", type=Path, default=None)
    p_plot.add_argument("--confidence", type=Path, default=None)
    p_plot.add_argument("--mode", default=BY_LABEL,
                        choices=[BY_LABEL, BY_CONFIDENCE])
    p_plot.add_argument("--width", type=int, default=800)
    p_plot.add_argument("--height", type=int, default=600)
    p_plot.add_argument("--radius", type=float, default=3.0)
    p_plot.add_argument("--out", required=True, type=Path)
    _common_flags(p_plot)

    p_rep = sub.add_parser("report", help="tabulate one or more run directories")
    p_rep.add_argument("--runs", required=True, nargs="+", type=Path)
    p_rep.add_argument("--out", required=True, type=Path)
    _common_flags(p_rep)

    return parser


# -- commands -------------------------------------------------------------------


def cmd_split(args) -> int:
    dataset = load_dataset(args.input, args.format)
    seed = args.seed if args.seed is not None else 0
    assignment = stratified_split(
        dataset, SplitSpec(x=args.x, test_frac=args.test, seed=seed))
    args.out.mkdir(parents=True, exist_ok=True)
    write_split_csv(args.out / "split.csv", dataset.ids, assignment)
    s, u, t = assignment.counts
    print(f"S={s} U={u} T={t}")
    return EXIT_OK


def _build_run_config(args) -> ExperimentConfig:
    if args.config is not None:
        if not args.config.exists():
            raise DataError(f"{args.config}: no such config file")
        cfg = config_from_dict(json.loads(args.config.read_text(encoding="utf-8")))
    else:
        if args.mode is None or args.x is None:
            raise UsageError("run requires --mode and --x (or --config)")
        cfg = ExperimentConfig(
            mode=args.mode,
            split=SplitSpec(x=args.x,
                            test_frac=args.test if args.test is not None else 0.30),
        )
    # explicit flags override the config file
    if args.mode is not None:
        cfg = replace(cfg, mode=args.mode, iterations=None)
    if args.x is not None or args.test is not None:
        split = cfg.split
        split = replace(split, x=args.x if args.x is not None else split.x,
                        test_frac=args.test if args.test is not None else split.test_frac)
        cfg = replace(cfg, split=split)
    if args.iterations is not None:
        cfg = replace(cfg, iterations=args.iterations)
    if args.partitions is not None:
        cfg = replace(cfg, partitions=args.partitions)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed,
                      split=replace(cfg.split, seed=args.seed),
                      tsne=replace(cfg.tsne, seed=args.seed),
                      extractor=replace(cfg.extractor, seed=args.seed))
    if args.extractor is not None:
        if args.extractor == "builtin":
            cfg = replace(cfg, extractor=replace(cfg.extractor, kind=BUILTIN,
                                                 external_command=None))
        elif args.extractor.startswith("cmd:"):
            cfg = replace(cfg, extractor=replace(
                cfg.extractor, kind=EXTERNAL,
                external_command=args.extractor[len("cmd:"):]))
        else:
            raise UsageError("--extractor must be 'builtin' or 'cmd:<command>'")
    if args.epochs is not None:
        cfg = replace(cfg, extractor=replace(cfg.extractor, epochs=args.epochs))
    if args.tsne_iterations is not None:
        cfg = replace(cfg, tsne=replace(cfg.tsne, iterations=args.tsne_iterations))
    return cfg


def cmd_run(args) -> int:
    dataset = load_dataset(args.input, args.format)
    cfg = _build_run_config(args)
    result = driver.run_experiment(dataset, cfg, out_dir=args.out,
                                   threads=args.threads)
    driver.write_summary([result], dataset, args.out)
    for t, agg in result.aggregates().items():
        prop = ("-" if agg.propagation_mean is None
                else f"{agg.propagation_mean:.4f}")
        print(f"iter {t}: accuracy={agg.accuracy_mean:.4f} "
              f"kappa={agg.kappa_mean:.4f} propagation={prop}")
    for part in result.partitions:
        if part.error:
            print(f"partition {part.partition} failed: {part.error}",
                  file=sys.stderr)
    return EXIT_OK


def cmd_project(args) -> int:
    if args.format == "dfa-binary":
        features = read_feature_matrix(args.input).astype(np.float64)
        ids = [str(i) for i in range(features.shape[0])]
    else:
        dataset = load_dataset(args.input, "csv")
        features = dataset.features
        ids = list(dataset.ids)
    params = TsneParams()
    if args.perplexity is not None:
        params = replace(params, perplexity=args.perplexity)
    if args.iterations is not None:
        params = replace(params, iterations=args.iterations)
    if args.seed is not None:
        params = replace(params, seed=args.seed)
    trace: list[float] = []
    embedding = tsne_embed(features, params, loss_trace=trace)
    write_embedding_csv(args.out, ids, embedding)
    if args.trace is not None:
        write_loss_trace_csv(args.trace, trace)
    print(f"embedded {features.shape[0]} samples -> {args.out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    spec = PlotSpec(
        embedding=args.embedding,
        labels=args.labels,
        confidence=args.confidence,
        color_mode=args.mode,
        width=args.width,
        height=args.height,
        point_radius=args.radius,
    )
    write_scatter(spec, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = []
    for run_dir in args.runs:
        summary_path = Path(run_dir) / "summary.json"
        if not summary_path.exists():
            raise DataError(f"{summary_path}: missing summary")
        try:
            summary = json.loads(summary_path.read_text(encoding="utf-8"))
            dataset = summary["dataset"]
            for run in summary["runs"]:
                final = str(run["final_iteration"])
                agg = run["iterations"][final]
                rows.append({
                    "dataset": dataset,
                    "mode": run["mode"],
                    "x": run["x"],
                    "accuracy_mean": agg["accuracy_mean"],
                    "accuracy_std": agg["accuracy_std"],
                    "kappa_mean": agg["kappa_mean"],
                    "kappa_std": agg["kappa_std"],
                    "propagation_mean": agg["propagation_mean"],
                    "propagation_std": agg["propagation_std"],
                })
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{summary_path}: corrupt summary ({exc})") from None

    # flag the best mode(s) per (dataset, x) by kappa mean; ties all win
    best: dict[tuple[str, float], float] = {}
    for row in rows:
        key = (row["dataset"], row["x"])
        best[key] = max(best.get(key, -np.inf), row["kappa_mean"])
    for row in rows:
        row["best"] = int(row["kappa_mean"] == best[(row["dataset"], row["x"])])

    rows.sort(key=lambda r: (r["dataset"], r["x"], r["mode"]))
    fields = ["dataset", "mode", "x", "accuracy_mean", "accuracy_std",
              "kappa_mean", "kappa_std", "propagation_mean", "propagation_std",
              "best"]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            out_row = dict(row)
            for key in ("propagation_mean", "propagation_std"):
                if out_row[key] is None:
                    out_row[key] = ""
            writer.writerow(out_row)
    print(f"wrote {len(rows)} rows -> {args.out}")
    return EXIT_OK


_COMMANDS = {
    "split": cmd_split,
    "run": cmd_run,
    "project": cmd_project,
    "plot": cmd_plot,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ComponentError as exc:
        print(f"component failure: {exc}", file=sys.stderr)
        return EXIT_COMPONENT
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPONENT


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``rnnevo {run,grid,compare,export-trace}``.

Every subcommand exits 0 on success.  On failure the last line written to
stderr is a JSON object ``{"error": ..., "type": ...}`` and the exit code is
nonzero.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, dump_config, load_config
from .data import DataError
from .genome import load_genome
from .experiment import compare, export_traces, grid_from_file, standard_grid, run_experiment, run_grid


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file; flags below override it")
    p.add_argument("--strategy", choices=["baseline_islands", "extinction", "neat"])
    p.add_argument("--frequency", type=int, help="genomes between extinction events")
    p.add_argument("--repop-mutations", type=int, help="mutations applied to repopulated genomes")
    p.add_argument("--repeat-rule", choices=["repeat", "no_repeat", "repeat_allowed",
                                             "no_repeat_within_5"])
    p.add_argument("--budget", type=int, help="total genomes generated per trial")
    p.add_argument("--islands", type=int)
    p.add_argument("--capacity", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--delta-t", type=float, help="NEAT speciation threshold")
    p.add_argument("--epochs", type=int)
    p.add_argument("--data-csv", nargs="+", metavar="CSV", help="one or more CSV files")
    p.add_argument("--output-column")
    p.add_argument("--input-columns", nargs="+")
    p.add_argument("--out-dir", default="runs")
    p.add_argument("--parallel-trials", type=int, default=1)
    p.add_argument("--print-config", action="store_true",
                   help="print the resolved configuration and exit")


def _overrides(args: argparse.Namespace) -> dict:
    run, ext, neat, training, data = {}, {}, {}, {}, {}
    for flag, section, key in (
        ("strategy", run, "strategy"), ("budget", run, "genome_budget"),
        ("islands", run, "n_islands"), ("capacity", run, "island_capacity"),
        ("workers", run, "worker_count"), ("seed", run, "rng_seed"),
        ("frequency", ext, "frequency"), ("repop_mutations", ext, "repop_mutations"),
        ("repeat_rule", ext, "repeat_rule"), ("delta_t", neat, "delta_t"),
        ("epochs", training, "epochs"), ("output_column", data, "output_column"),
        ("input_columns", data, "input_columns"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            section[key] = value
    if getattr(args, "data_csv", None):
        data.update(source="csv", paths=list(args.data_csv))
    for name, section in (("extinction", ext), ("neat", neat), ("training", training)):
        if section:
            run[name] = section
    out = {}
    if run:
        out["run"] = run
    if data:
        out["data"] = data
    if getattr(args, "repeats", None) is not None:
        out["repeats"] = args.repeats
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    if args.repeats is None:
        cfg.repeats = 1
    if args.print_config:
        sys.stdout.write(dump_config(cfg))
        return 0
    seed = load_genome(args.seed_genome) if args.seed_genome else None
    directory = run_experiment(cfg, args.out_dir, seed, args.save_genome, args.parallel_trials)
    print(directory)
    return 0


def cmd_grid(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    if args.standard_grid:
        entries = standard_grid(cfg)
    elif args.grid_file:
        entries = grid_from_file(cfg, args.grid_file)
    else:
        raise ConfigError("grid needs --standard-grid or --grid-file")
    if args.print_config:
        for label, entry in entries:
            sys.stdout.write(f"# {label}\n{dump_config(entry)}")
        return 0
    grid_dir, report = run_grid(entries, args.out_dir, args.baseline, args.parallel_trials,
                                args.alternative)
    print(report.table())
    print(grid_dir)
    return 0


def cmd_compare(args) -> int:
    report = compare(args.grid_dir, args.baseline, args.alternative)
    print(report.table())
    return 0


def cmd_export_trace(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = export_traces(args.run_dirs, out / args.name, args.step)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rnnevo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment (optionally repeated)")
    _config_args(p)
    p.add_argument("--seed-genome", help="start from this genome file instead of a minimal one")
    p.add_argument("--save-genome", help="also write the best genome to this path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid", help="run a grid of strategies and compare them")
    _config_args(p)
    p.add_argument("--standard-grid", action="store_true",
                   help="baseline, NEAT and 16 extinction variants")
    p.add_argument("--grid-file", help="YAML list of {label, overrides} entries")
    p.add_argument("--baseline", default="baseline_islands")
    p.add_argument("--alternative", default="two-sided", choices=["two-sided", "less", "greater"])
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("compare", help="summarize a finished grid directory")
    p.add_argument("grid_dir")
    p.add_argument("--baseline", default="baseline_islands")
    p.add_argument("--alternative", default="two-sided", choices=["two-sided", "less", "greater"])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-trace", help="write tidy convergence CSVs for plotting")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--name", default="traces.csv")
    p.add_argument("--step", type=int, default=100, help="genome grid spacing")
    p.set_defaults(func=cmd_export_trace)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DataError, ValueError, OSError) as exc:
        sys.stderr.write(json.dumps({"error": str(exc), "type": type(exc).__name__}) + "\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - last line must stay machine-readable
        sys.stderr.write(json.dumps({"error": repr(exc), "type": type(exc).__name__}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

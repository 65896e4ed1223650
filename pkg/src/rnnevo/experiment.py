"""Run single experiments and grids, persist artifacts, compare strategies."""
from __future__ import annotations

import copy
import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from .config import ExperimentConfig, dump_config, from_plain, to_plain
from .engine import ExperimentRecord, run
from .genome import Genome, load_genome, save_genome
from .islands import NO_REPEAT, REPEAT_ALLOWED
from .stats import ComparisonReport, summarize

log = logging.getLogger(__name__)

TRACE_HEADER = ("genomes_generated", "best_validation_mse")


def default_label(cfg: ExperimentConfig) -> str:
    if cfg.label:
        return cfg.label
    run_cfg = cfg.run
    if run_cfg.strategy != "extinction":
        return run_cfg.strategy
    p = run_cfg.extinction
    rule = "repeat" if p.repeat_rule == REPEAT_ALLOWED else "no_repeat"
    return f"extinction-{rule}-f{p.frequency}-m{p.repop_mutations}"


def write_trace(path: Path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for generated, fitness in trace:
            w.writerow([generated, repr(float(fitness))])


def read_trace(path: Path) -> list[tuple[int, float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [(int(r[0]), float(r[1])) for r in reader if r]


def persist(record: ExperimentRecord, cfg: ExperimentConfig, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    write_trace(directory / "trace.csv", record.trace)
    (directory / "events.log").write_text("".join(line + "\n" for line in record.events))
    if record.best_genome is not None:
        save_genome(record.best_genome, directory / "best_genome")
    (directory / "config.snapshot").write_text(dump_config(cfg))
    summary = {
        "final_fitness": record.final_fitness,
        "seed_fitness": record.seed_fitness,
        "wall_time": record.wall_time,
        "genomes_generated": len(record.issued),
        "outcomes": dict(sorted(record.outcomes.items())),
    }
    (directory / "record.json").write_text(json.dumps(summary, indent=1) + "\n")


def _unique_dir(parent: Path, stem: str) -> Path:
    stamp = time.strftime("%Y%m%d-%H%M%S")
    candidate = parent / f"{stem}-{stamp}"
    k = 1
    while candidate.exists():
        candidate = parent / f"{stem}-{stamp}-{k}"
        k += 1
    return candidate


def _run_trial(cfg: ExperimentConfig, trial: int, directory: Path,
               seed_genome: Genome | None) -> tuple[float, float]:
    trial_cfg = copy.deepcopy(cfg)
    trial_cfg.run = dataclasses.replace(cfg.run, rng_seed=cfg.run.rng_seed + trial)
    trial_cfg.repeats = 1
    data = trial_cfg.data.load()
    record = run(trial_cfg.run, data, seed_genome)
    persist(record, trial_cfg, directory)
    return record.final_fitness, record.wall_time


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path, seed_genome: Genome | None = None,
                   save_best: str | Path | None = None, parallel_trials: int = 1,
                   directory: Path | None = None) -> Path:
    """Run ``cfg.repeats`` trials (seeds ``rng_seed + i``) and persist everything.

    A single trial writes its artifacts straight into the run directory;
    repeats go to ``trial_000``, ``trial_001``, ... plus ``summary.csv``.
    """
    cfg.data.load()  # surface data errors before any compute
    label = default_label(cfg)
    directory = directory or _unique_dir(Path(out_dir), label)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.snapshot").write_text(dump_config(cfg))
    if cfg.repeats <= 1:
        _run_trial(cfg, 0, directory, seed_genome)
        trial_dirs = [directory]
    else:
        trial_dirs = [directory / f"trial_{i:03d}" for i in range(cfg.repeats)]
        if parallel_trials > 1:
            with ProcessPoolExecutor(parallel_trials) as pool:
                futures = [pool.submit(_run_trial, cfg, i, d, seed_genome)
                           for i, d in enumerate(trial_dirs)]
                for f in futures:
                    f.result()
        else:
            for i, d in enumerate(trial_dirs):
                _run_trial(cfg, i, d, seed_genome)
        report = summarize({label: collect_finals(directory)})
        (directory / "summary.csv").write_text(report.to_csv())
    if save_best is not None:
        best = best_genome_of(trial_dirs)
        if best is not None:
            save_genome(best, save_best)
    return directory


def trial_directories(run_dir: Path) -> list[Path]:
    run_dir = Path(run_dir)
    trials = sorted(p for p in run_dir.glob("trial_*") if (p / "trace.csv").exists())
    if trials:
        return trials
    return [run_dir] if (run_dir / "trace.csv").exists() else []


def collect_finals(run_dir: Path) -> list[float]:
    finals = []
    for d in trial_directories(run_dir):
        trace = read_trace(d / "trace.csv")
        finals.append(trace[-1][1] if trace else math.inf)
    return finals


def best_genome_of(dirs) -> Genome | None:
    best = None
    for d in dirs:
        path = Path(d) / "best_genome"
        if path.exists():
            g = load_genome(path)
            if best is None or g.fitness < best.fitness:
                best = g
    return best


# -- grids ------------------------------------------------------------------

def standard_grid(base: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    """Baseline islands, NEAT, and extinction over {repeat, no repeat} x
    {1000, 2000} x {0, 2, 4, 8} repopulation mutations."""
    entries = []

    def variant(label, **run_changes):
        cfg = copy.deepcopy(base)
        cfg.run = dataclasses.replace(cfg.run, **run_changes)
        cfg.label = label
        entries.append((label, cfg))

    variant("baseline_islands", strategy="baseline_islands")
    variant("neat", strategy="neat")
    for rule, tag in ((REPEAT_ALLOWED, "repeat"), (NO_REPEAT, "no_repeat")):
        for freq in (1000, 2000):
            for muts in (0, 2, 4, 8):
                policy = dataclasses.replace(base.run.extinction, frequency=freq,
                                             repop_mutations=muts, repeat_rule=rule)
                variant(f"extinction-{tag}-f{freq}-m{muts}", strategy="extinction",
                        extinction=policy)
    return entries


def grid_from_file(base: ExperimentConfig, path: str | Path) -> list[tuple[str, ExperimentConfig]]:
    """Grid file: a YAML list of ``{label: ..., overrides: {...}}`` entries."""
    from .config import deep_merge
    items = yaml.safe_load(Path(path).read_text())
    if not isinstance(items, list):
        raise ValueError(f"{path}: grid file must be a list of entries")
    entries = []
    for item in items:
        plain = deep_merge(to_plain(base), item.get("overrides", {}))
        plain["label"] = item["label"]
        entries.append((item["label"], from_plain(plain)))
    return entries


def run_grid(entries: list[tuple[str, ExperimentConfig]], out_dir: str | Path,
             baseline: str | None = "baseline_islands", parallel_trials: int = 1,
             alternative: str = "two-sided") -> tuple[Path, ComparisonReport]:
    for _, cfg in entries:
        cfg.data.load()
    grid_dir = _unique_dir(Path(out_dir), "grid")
    grid_dir.mkdir(parents=True)
    (grid_dir / "grid.yaml").write_text(yaml.safe_dump([label for label, _ in entries]))
    for label, cfg in entries:
        run_experiment(cfg, grid_dir, parallel_trials=parallel_trials, directory=grid_dir / label)
        log.info("finished %s", label)
    report = compare(grid_dir, baseline, alternative)
    return grid_dir, report


def compare(grid_dir: str | Path, baseline: str | None = "baseline_islands",
            alternative: str = "two-sided") -> ComparisonReport:
    """Summarize every strategy directory in a grid, in grid order."""
    grid_dir = Path(grid_dir)
    order_file = grid_dir / "grid.yaml"
    if order_file.exists():
        labels = yaml.safe_load(order_file.read_text())
    else:
        labels = sorted(p.name for p in grid_dir.iterdir() if p.is_dir())
    finals = {label: collect_finals(grid_dir / label) for label in labels}
    finals = {k: v for k, v in finals.items() if v}
    if baseline is not None and baseline not in finals:
        baseline = None
    report = summarize(finals, baseline, alternative)
    (grid_dir / "summary.csv").write_text(report.to_csv())
    return report


def export_traces(run_dirs, out_path: str | Path, step: int = 100) -> Path:
    """Write per-trial traces resampled on a common genome grid, plus
    min/avg/max bands per strategy, as one tidy CSV."""
    out_path = Path(out_path)
    rows = []
    bands = []
    for run_dir in map(Path, run_dirs):
        label = run_dir.name
        trials = trial_directories(run_dir)
        traces = [read_trace(d / "trace.csv") for d in trials]
        if not traces:
            continue
        horizon = max(t[-1][0] for t in traces if t)
        grid = list(range(step, horizon + step, step))
        curves = np.full((len(traces), len(grid)), np.nan)
        for k, trace in enumerate(traces):
            xs = np.array([p[0] for p in trace])
            ys = np.array([p[1] for p in trace])
            for j, g in enumerate(grid):
                idx = np.searchsorted(xs, g, side="right") - 1
                if idx >= 0:
                    curves[k, j] = ys[idx]
                    rows.append((label, trials[k].name, "trial", g, repr(float(ys[idx]))))
        for j, g in enumerate(grid):
            col = curves[:, j][~np.isnan(curves[:, j])]
            if col.size:
                for stat, value in (("min", col.min()), ("avg", col.mean()), ("max", col.max())):
                    bands.append((label, "", stat, g, repr(float(value))))
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("strategy", "trial", "series", "genomes_generated", "best_validation_mse"))
        w.writerows(rows)
        w.writerows(bands)
    return out_path

"""Multivariate time-series loading, normalization and train/validation split."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    pass


@dataclass
class TimeSeriesSet:
    """Normalized sequences with a contiguous train/validation boundary each.

    Inputs at step ``t`` predict the output column at ``t + time_offset``.
    Normalization statistics come from training rows only, so validation
    values can fall outside [0, 1].
    """
    parameter_names: list[str]
    sequences: list[np.ndarray]
    input_columns: list[int]
    output_column: int
    splits: list[int]
    minimums: np.ndarray
    maximums: np.ndarray
    time_offset: int = 1

    @property
    def rows(self) -> np.ndarray:
        return self.sequences[0] if len(self.sequences) == 1 else np.vstack(self.sequences)

    @property
    def n_inputs(self) -> int:
        return len(self.input_columns)

    @property
    def n_outputs(self) -> int:
        return 1

    def _span(self) -> np.ndarray:
        span = self.maximums - self.minimums
        return np.where(span > 0, span, 1.0)

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        return (np.asarray(raw, dtype=float) - self.minimums) / self._span()

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * self._span() + self.minimums

    def _pairs(self, lo_hi) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        k = self.time_offset
        for seq, split in zip(self.sequences, self.splits):
            lo, hi = lo_hi(seq, split)
            if hi - lo - k < 1:
                continue
            X = np.ascontiguousarray(seq[lo:hi - k, self.input_columns])
            Y = np.ascontiguousarray(seq[lo + k:hi, [self.output_column]])
            out.append((X, Y))
        return out

    def train_pairs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return self._pairs(lambda seq, split: (0, split))

    def validation_pairs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return self._pairs(lambda seq, split: (split, len(seq)))


def _resolve(names: list[str], wanted, what: str) -> list[int]:
    idx = []
    missing = []
    for w in wanted:
        if isinstance(w, int):
            if not 0 <= w < len(names):
                missing.append(str(w))
            else:
                idx.append(w)
        elif w in names:
            idx.append(names.index(w))
        else:
            missing.append(w)
    if missing:
        raise DataError(f"{what} not found in header: {', '.join(missing)}")
    return idx


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            line = reader.line_num
            if len(row) != len(header):
                raise DataError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            values = []
            for name, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: line {line}: non-numeric value {cell!r} "
                                    f"in column {name!r}") from None
                if math.isnan(v):
                    raise DataError(f"{path}: line {line}: NaN in column {name!r}")
                values.append(v)
            rows.append(values)
    return header, np.asarray(rows, dtype=float).reshape(len(rows), len(header))


def from_arrays(sequences: Sequence[np.ndarray], parameter_names: list[str],
                input_columns, output_column, split_fraction: float = 0.8,
                normalization: str = "minmax", time_offset: int = 1,
                min_rows: int = 11) -> TimeSeriesSet:
    if not 0 < split_fraction < 1:
        raise DataError("split_fraction must lie in (0, 1)")
    if normalization not in ("minmax", "none"):
        raise DataError(f"unknown normalization {normalization!r}")
    inputs = _resolve(parameter_names, list(input_columns), "input columns")
    (output,) = _resolve(parameter_names, [output_column], "output column")
    raw = [np.asarray(s, dtype=float) for s in sequences]
    splits = []
    for i, seq in enumerate(raw):
        if len(seq) < min_rows:
            raise DataError(f"sequence {i} has {len(seq)} rows, need at least {min_rows}")
        splits.append(int(round(len(seq) * split_fraction)))
    train_rows = np.vstack([seq[:s] for seq, s in zip(raw, splits)])
    if normalization == "minmax":
        lo, hi = train_rows.min(axis=0), train_rows.max(axis=0)
    else:
        lo, hi = np.zeros(train_rows.shape[1]), np.ones(train_rows.shape[1])
    ts = TimeSeriesSet(list(parameter_names), [], inputs, output, splits, lo, hi, time_offset)
    ts.sequences = [ts.normalize(seq) for seq in raw]
    return ts


def load_csv(paths, output_column, input_columns=None, split_fraction: float = 0.8,
             normalization: str = "minmax", time_offset: int = 1,
             min_rows: int = 11) -> TimeSeriesSet:
    """Load one or more CSV files (header row required) as independent sequences.

    ``input_columns`` defaults to every column, which includes the output
    column as an autoregressive input.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    header = None
    seqs = []
    for p in paths:
        names, values = _read_csv(Path(p))
        if header is None:
            header = names
        elif names != header:
            raise DataError(f"{p}: header differs from {paths[0]}")
        seqs.append(values)
    if header is None:
        raise DataError("no files given")
    if input_columns is None:
        input_columns = list(header)
    return from_arrays(seqs, header, input_columns, output_column, split_fraction,
                       normalization, time_offset, min_rows)


SINE_PERIODS = (23.0, 37.0, 11.0, 53.0)


def sine_mix_target(x1, x2, x3):
    """Output of the sine_mix generator as a function of its input columns."""
    return np.tanh(0.8 * x1 + 0.6 * x2 * x3) + 0.3 * x3


def synthetic_series(kind: str = "sine_mix", length: int = 300, noise: float = 0.0,
                     seed: int = 0, split_fraction: float = 0.8,
                     time_offset: int = 1) -> TimeSeriesSet:
    """Deterministic desk-scale series with a known cross-parameter dependence.

    ``sine_mix``: three phase-shifted sinusoids and ``y = tanh(0.8 x1 + 0.6 x2 x3) + 0.3 x3``.
    ``mackey_glass_like``: a forced delay-difference system with a lagged,
    squared companion column.
    """
    if length < 32:
        raise DataError("synthetic series need at least 32 rows")
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=float)
    if kind == "sine_mix":
        phase = rng.uniform(0, 2 * np.pi, 4)
        x1 = np.sin(2 * np.pi * t / SINE_PERIODS[0] + phase[0])
        x2 = np.sin(2 * np.pi * t / SINE_PERIODS[1] + phase[1])
        x3 = 0.5 * np.sin(2 * np.pi * t / SINE_PERIODS[2] + phase[2]) \
            + 0.5 * np.sin(2 * np.pi * t / SINE_PERIODS[3] + phase[3])
        y = sine_mix_target(x1, x2, x3)
        cols = [x1, x2, x3, y]
        names = ["x1", "x2", "x3", "y"]
    elif kind == "mackey_glass_like":
        tau, beta, gamma = 17, 0.2, 0.1
        burn = 200
        total = length + burn
        x = np.empty(total)
        x[: tau + 1] = 1.2 + 0.1 * rng.standard_normal(tau + 1)
        u = 0.05 * np.sin(2 * np.pi * np.arange(total) / 50.0)
        for i in range(tau, total - 1):
            lag = x[i - tau]
            x[i + 1] = x[i] + beta * lag / (1.0 + lag ** 10) - gamma * x[i] + u[i]
        x, u = x[burn:], u[burn:]
        z = np.concatenate([np.full(3, x[0]), x[:-3]]) ** 2
        cols = [u, z, x]
        names = ["forcing", "lagged_sq", "y"]
    else:
        raise DataError(f"unknown synthetic series kind {kind!r}")
    data = np.column_stack(cols)
    if noise > 0:
        data = data + noise * rng.standard_normal(data.shape)
    return from_arrays([data], names, names, "y", split_fraction, "minmax", time_offset)

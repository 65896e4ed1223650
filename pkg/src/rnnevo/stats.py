"""Rank-sum significance testing and repeated-trial summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import rankdata

EXACT_MAX_N = 12
_EPS = 1e-9


@dataclass(frozen=True)
class MannWhitneyResult:
    statistic: float
    pvalue: float
    method: str


def mann_whitney_u(a: Sequence[float], b: Sequence[float],
                   alternative: str = "two-sided", exact: bool | None = None) -> MannWhitneyResult:
    """Mann-Whitney U test of ``a`` against ``b``.

    ``statistic`` is U for ``a``: the number of pairs with ``a_i > b_j`` plus
    half the ties.  For combined sizes up to 12 the null distribution is
    enumerated exactly over all splits of the pooled midranks (ties
    included); larger samples use the tie-corrected normal approximation with
    continuity correction.  ``alternative="less"`` tests whether ``a`` tends
    to be smaller.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if alternative not in ("two-sided", "less", "greater"):
        raise ValueError(f"unknown alternative {alternative!r}")
    na, nb = a.size, b.size
    n = na + nb
    ranks = rankdata(np.concatenate([a, b]))
    u = float(ranks[:na].sum() - na * (na + 1) / 2.0)
    mean = na * nb / 2.0
    if exact is None:
        exact = n <= EXACT_MAX_N
    if exact:
        offset = na * (na + 1) / 2.0
        dist = np.array([sum(c) - offset for c in combinations(ranks.tolist(), na)])
        if alternative == "two-sided":
            p = np.mean(np.abs(dist - mean) >= abs(u - mean) - _EPS)
        elif alternative == "less":
            p = np.mean(dist <= u + _EPS)
        else:
            p = np.mean(dist >= u - _EPS)
        return MannWhitneyResult(u, float(min(1.0, p)), "exact")

    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float(((counts ** 3) - counts).sum()) / (n * (n - 1))
    sigma = math.sqrt(na * nb / 12.0 * ((n + 1) - tie_term))
    if sigma == 0.0:
        return MannWhitneyResult(u, 1.0, "normal")
    if alternative == "two-sided":
        z = (abs(u - mean) - 0.5) / sigma
        p = 2.0 * ndtr(-z)
    elif alternative == "less":
        p = ndtr((u - mean + 0.5) / sigma)
    else:
        p = ndtr(-(u - mean - 0.5) / sigma)
    return MannWhitneyResult(u, float(min(1.0, p)), "normal")


@dataclass(frozen=True)
class StrategyRow:
    label: str
    n: int
    worst: float
    avg: float
    best: float
    median: float
    u: float | None = None
    pvalue: float | None = None


@dataclass
class ComparisonReport:
    baseline: str | None
    alternative: str
    rows: list[StrategyRow] = field(default_factory=list)

    def row(self, label: str) -> StrategyRow:
        return next(r for r in self.rows if r.label == label)

    def to_csv(self) -> str:
        lines = ["label,n,worst,avg,best,median,u,p_value"]
        for r in self.rows:
            lines.append(",".join([r.label, str(r.n), repr(r.worst), repr(r.avg), repr(r.best),
                                   repr(r.median), "" if r.u is None else repr(r.u),
                                   "" if r.pvalue is None else repr(r.pvalue)]))
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        head = f"{'strategy':<36}{'n':>4}{'worst':>12}{'avg':>12}{'best':>12}{'p':>10}"
        out = [head, "-" * len(head)]
        for r in self.rows:
            p = "/" if r.pvalue is None else f"{r.pvalue:.3g}"
            out.append(f"{r.label:<36}{r.n:>4}{r.worst:>12.6g}{r.avg:>12.6g}{r.best:>12.6g}{p:>10}")
        return "\n".join(out)


def summarize(finals: Mapping[str, Sequence[float]], baseline: str | None = None,
              alternative: str = "two-sided") -> ComparisonReport:
    """Worst/avg/best final fitness per strategy, with U tests against ``baseline``.

    Rows follow the mapping's order.  Averages use ``math.fsum`` so the
    result does not depend on record order.
    """
    if baseline is not None and baseline not in finals:
        raise ValueError(f"baseline {baseline!r} has no records")
    report = ComparisonReport(baseline, alternative)
    for label, values in finals.items():
        vals = [float(v) for v in values]
        if not vals:
            raise ValueError(f"strategy {label!r} has no records")
        ordered = sorted(vals)
        u = p = None
        if baseline is not None and label != baseline:
            base = finals[baseline]
            if len(vals) >= 2 and len(base) >= 2:
                res = mann_whitney_u(vals, base, alternative)
                u, p = res.statistic, res.pvalue
        report.rows.append(StrategyRow(label, len(vals), ordered[-1], math.fsum(vals) / len(vals),
                                       ordered[0], float(np.median(ordered)), u, p))
    return report

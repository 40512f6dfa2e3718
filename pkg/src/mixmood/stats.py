"""Nonparametric significance testing and correlation.

The Wilcoxon signed-rank test is paired and two-sided.  Zero differences
are dropped, tied absolute differences receive average ranks, and the
statistic is the smaller of the two signed-rank sums.  For up to 25
effective pairs the p-value is exact (equivalent to enumerating all
2^n sign assignments); above that a normal approximation with tie and
continuity corrections is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

EXACT_LIMIT = 25


@dataclass(frozen=True)
class WilcoxonResult:
    w_statistic: float
    p_value: float
    n_effective: int
    method: str  # "exact" or "normal_approx"


@dataclass(frozen=True)
class PearsonResult:
    r: float
    n: int


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks starting at 1, ties sharing the average of their positions."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_two_sided_p(doubled_ranks: np.ndarray, doubled_w: int) -> float:
    """P-value by the exact null distribution of the positive rank sum.

    Counts sign assignments with rank sum <= the observed minimum via a
    generating-function convolution; identical to full 2^n enumeration.
    Ranks are doubled so average ranks become integers.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        counts[r:] = counts[r:] + counts[: total + 1 - r]
    n_le = int(counts[: doubled_w + 1].sum())
    return min(1.0, 2.0 * n_le / float(2 ** len(doubled_ranks)))


def wilcoxon_signed_rank(xs, ys) -> WilcoxonResult:
    """Two-sided paired Wilcoxon signed-rank test."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(
            f"paired samples must be equal-length 1-D, got {x.shape} vs {y.shape}"
        )
    if x.size < 1:
        raise ValidationError("need at least one pair")
    diffs = x - y
    diffs = diffs[diffs != 0.0]
    n = int(diffs.size)
    if n == 0:
        return WilcoxonResult(w_statistic=0.0, p_value=1.0, n_effective=0, method="exact")

    ranks = _average_ranks(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())
    w_minus = float(ranks[diffs < 0].sum())
    w = min(w_plus, w_minus)

    if n <= EXACT_LIMIT:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        p = _exact_two_sided_p(doubled, int(round(2.0 * w)))
        return WilcoxonResult(w_statistic=w, p_value=p, n_effective=n, method="exact")

    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(np.abs(diffs), return_counts=True)
    var -= float((tie_counts**3 - tie_counts).sum()) / 48.0
    if var <= 0.0 or w >= mean:
        p = 1.0
    else:
        z = (w - mean + 0.5) / math.sqrt(var)  # continuity correction
        p = min(1.0, 2.0 * 0.5 * math.erfc(-z / math.sqrt(2.0)))
    return WilcoxonResult(w_statistic=w, p_value=p, n_effective=n, method="normal_approx")


def pearson(xs, ys) -> PearsonResult:
    """Sample Pearson correlation, clamped to [-1, 1]."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(
            f"paired samples must be equal-length 1-D, got {x.shape} vs {y.shape}"
        )
    if x.size < 2:
        raise ValidationError("need at least two pairs")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float((dx * dx).sum())
    sy = float((dy * dy).sum())
    if sx == 0.0 or sy == 0.0:
        raise ValidationError("correlation undefined for constant input")
    r = float((dx * dy).sum()) / math.sqrt(sx * sy)
    return PearsonResult(r=max(-1.0, min(1.0, r)), n=int(x.size))

"""Medians and a paired one-tailed Wilcoxon signed-rank test.

Differences are taken as ``gsgp - gp``. The statistic is the sum of ranks
of the positive differences (W+). For up to :data:`EXACT_MAX_N` non-zero
differences the null distribution is counted exactly over every sign
assignment; larger samples fall back to the normal approximation with
continuity and tie corrections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

__all__ = ["median", "WilcoxonResult", "wilcoxon_one_tailed", "direction_symbol", "EXACT_MAX_N", "ALPHA"]

EXACT_MAX_N = 25
ALPHA = 0.05


def median(values) -> float:
    """Median; the mean of the two middle order statistics for even counts."""
    arr = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if arr.size == 0:
        raise ValueError("median of an empty sequence")
    mid = arr.size // 2
    if arr.size % 2:
        return float(arr[mid])
    return float((arr[mid - 1] + arr[mid]) / 2.0)


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    n: int
    method: str


def _exact_counts(doubled_ranks):
    # number of sign assignments reaching each doubled rank sum
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks.astype(np.int64):
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    return counts


def wilcoxon_one_tailed(gp, gsgp, alternative: str = "gsgp_less", method: str = "auto") -> WilcoxonResult:
    """Paired signed-rank test of ``gsgp`` against ``gp``.

    Parameters
    ----------
    gp, gsgp : array-like, shape (n,)
        Paired measurements, one pair per dataset.
    alternative : {"gsgp_less", "gsgp_greater"}
        ``gsgp_less`` tests whether GSGP values tend to be smaller.
    method : {"auto", "exact", "normal"}

    Raises
    ------
    ValueError
        With fewer than five non-zero differences.
    """
    if alternative not in ("gsgp_less", "gsgp_greater"):
        raise ValueError(f"unknown alternative {alternative!r}")
    a = np.asarray(gp, dtype=np.float64)
    b = np.asarray(gsgp, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("gp and gsgp must be paired 1-D samples")
    diff = b - a
    diff = diff[diff != 0]
    n = diff.size
    if n < 5:
        raise ValueError(f"need at least 5 non-zero differences, got {n}")

    ranks = rankdata(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())

    if method == "auto":
        method = "exact" if n <= EXACT_MAX_N else "normal"

    if method == "exact":
        # average ranks are multiples of 1/2, so doubling gives integers
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = _exact_counts(doubled)
        t = int(round(2 * w_plus))
        total = counts.sum()
        if alternative == "gsgp_less":
            p = counts[: t + 1].sum() / total
        else:
            p = counts[t:].sum() / total
    elif method == "normal":
        mean = n * (n + 1) / 4.0
        _, tie_sizes = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_sizes**3 - tie_sizes) / 48.0
        if alternative == "gsgp_less":
            z = (w_plus - mean + 0.5) / math.sqrt(var)
            p = norm.cdf(z)
        else:
            z = (w_plus - mean - 0.5) / math.sqrt(var)
            p = norm.sf(z)
    else:
        raise ValueError(f"unknown method {method!r}")
    return WilcoxonResult(w_plus, float(min(p, 1.0)), n, method)


def direction_symbol(p_value: float, alternative: str, better_when: str, alpha: float = ALPHA) -> str:
    """Table marker: ``▲`` GSGP significantly better, ``▼`` worse, ``♦`` neither.

    ``better_when`` names the alternative under which GSGP is the better
    method for this measure (``gsgp_less`` for errors).
    """
    if not np.isfinite(p_value) or p_value >= alpha:
        return "♦"
    return "▲" if alternative == better_when else "▼"

"""Non-differentiable forecast evaluation metrics.

MSE, hard DTW and TDI measure error, shape and timing of a forecast. The ramp
score and the Hausdorff distance between detected change points are the
shape and timing metrics used alongside them. Run-level comparisons use a
Welch t-test.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats

from .errors import UsageError
from .kernels import FloatArray, as_series, hard_dtw, pairwise_cost
from .losses import squared_penalty

METRIC_NAMES = ("mse", "dtw", "tdi", "ramp", "hausdorff")
RAMP_TOLERANCE = 0.03
SIGNIFICANCE_LEVEL = 0.05


@dataclass(frozen=True)
class ChangePointSet:
    """Sorted 1-based time indices at which a new segment starts."""

    indices: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.indices, self.indices[1:], strict=False)):
            raise UsageError(
                f"change points must be strictly increasing: {self.indices}"
            )
        if any(i < 1 for i in self.indices):
            raise UsageError(f"change points are 1-based: {self.indices}")


@dataclass(frozen=True)
class TTestResult:
    t: float
    p_value: float
    significant: bool


@dataclass(frozen=True)
class MetricSummary:
    """Mean and sample standard deviation of one metric across runs."""

    mean: float
    std: float
    n: int


@dataclass
class MetricsReport:
    """Aggregated metrics per loss label, plus pairwise significance flags."""

    summaries: dict[str, dict[str, MetricSummary]] = field(default_factory=dict)
    significance: dict[str, TTestResult] = field(default_factory=dict)
    notices: list[str] = field(default_factory=list)


def _pair_1d(pred: ArrayLike, target: ArrayLike) -> tuple[FloatArray, FloatArray]:
    p = as_series(pred)
    t = as_series(target)
    if p.shape != t.shape:
        raise UsageError(f"shape mismatch: pred {p.shape} vs target {t.shape}")
    if p.shape[1] != 1:
        raise UsageError("metric is defined for univariate series only")
    return p[:, 0], t[:, 0]


def eval_mse(pred: ArrayLike, target: ArrayLike) -> float:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise UsageError(f"shape mismatch: pred {p.shape} vs target {t.shape}")
    return float(np.mean((p - t) ** 2))


def eval_dtw(pred: ArrayLike, target: ArrayLike) -> float:
    """Hard DTW on the squared Euclidean cost."""
    value, _ = hard_dtw(pairwise_cost(pred, target))
    return value


def eval_tdi(pred: ArrayLike, target: ArrayLike) -> float:
    """Squared-lag penalty summed along the optimal hard DTW path."""
    cost = pairwise_cost(pred, target)
    _, path = hard_dtw(cost)
    omega = squared_penalty(cost.k).omega
    return float(sum(omega[h, j] for h, j in path.cells))


def detect_change_points(
    series: ArrayLike, penalty: float | None = None
) -> ChangePointSet:
    """Penalized optimal partitioning with a piecewise-constant L2 cost.

    The default penalty is ``2 * s2 * log k`` where ``s2`` is half the variance
    of the first differences. Among equally good segmentations the one with
    the earliest last boundary wins, so flat series yield no change points.
    """
    values = as_series(series)
    if values.shape[1] != 1:
        raise UsageError("change point detection needs a univariate series")
    y = values[:, 0]
    k = y.size
    if k < 2:
        return ChangePointSet()
    centered = y - y.mean()
    cs1 = np.concatenate([[0.0], np.cumsum(centered)])
    cs2 = np.concatenate([[0.0], np.cumsum(centered**2)])
    if penalty is None:
        sigma2 = float(np.var(np.diff(y))) / 2.0
        penalty = 2.0 * sigma2 * math.log(k)
    tol = 1e-12 * max(1.0, float(cs2[-1]))

    best = np.empty(k + 1)
    best[0] = -penalty
    last = np.zeros(k + 1, dtype=np.int64)
    for t in range(1, k + 1):
        s = np.arange(t)
        seg = (cs2[t] - cs2[s]) - (cs1[t] - cs1[s]) ** 2 / (t - s)
        cand = best[:t] + np.maximum(seg, 0.0) + penalty
        low = cand.min()
        pick = int(np.flatnonzero(cand <= low + tol)[0])
        best[t] = cand[pick]
        last[t] = pick

    points = []
    t = k
    while t > 0:
        s = int(last[t])
        if s > 0:
            points.append(s + 1)
        t = s
    return ChangePointSet(tuple(sorted(points)))


def hausdorff(a: ChangePointSet, b: ChangePointSet, horizon: int) -> float:
    """Symmetric Hausdorff distance between two change-point sets.

    One empty set scores ``horizon``; two empty sets score 0.
    """
    for cps in (a, b):
        if any(i > horizon for i in cps.indices):
            raise UsageError(f"change point beyond horizon {horizon}: {cps.indices}")
    if not a.indices and not b.indices:
        return 0.0
    if not a.indices or not b.indices:
        return float(horizon)
    x = np.asarray(a.indices, dtype=np.float64)
    y = np.asarray(b.indices, dtype=np.float64)
    gap = np.abs(x[:, None] - y[None, :])
    return float(max(gap.min(axis=1).max(), gap.min(axis=0).max()))


def swinging_door(values: ArrayLike, eps: float) -> list[int]:
    """Indices of the pivots kept by swinging-door compression.

    A segment from the current anchor survives as long as one line through
    the anchor stays within ``eps`` of every point it spans.
    """
    y = np.asarray(values, dtype=np.float64).ravel()
    if eps < 0:
        raise UsageError(f"tolerance must be >= 0, got {eps}")
    n = y.size
    if n == 0:
        return []
    pivots = [0]
    anchor = 0
    lo, hi = -math.inf, math.inf
    i = 1
    while i < n:
        run = i - anchor
        lo_i = (y[i] - eps - y[anchor]) / run
        hi_i = (y[i] + eps - y[anchor]) / run
        new_lo, new_hi = max(lo, lo_i), min(hi, hi_i)
        if new_lo > new_hi:
            anchor = i - 1
            pivots.append(anchor)
            lo, hi = -math.inf, math.inf
            continue
        lo, hi = new_lo, new_hi
        i += 1
    if pivots[-1] != n - 1:
        pivots.append(n - 1)
    return pivots


def _compressed_slopes(y: FloatArray, eps: float) -> FloatArray:
    pivots = swinging_door(y, eps)
    grid = np.arange(y.size, dtype=np.float64)
    approx = np.interp(grid, np.asarray(pivots, dtype=np.float64), y[pivots])
    return np.diff(approx)


def ramp_score(
    pred: ArrayLike, target: ArrayLike, tolerance: float = RAMP_TOLERANCE
) -> float:
    """Mean absolute difference of compressed slopes on the unit time grid.

    Both series are compressed with ``tolerance`` times the target's range.
    """
    p, t = _pair_1d(pred, target)
    if t.size < 2:
        raise UsageError("ramp score needs at least two time steps")
    eps = tolerance * float(t.max() - t.min())
    gap = _compressed_slopes(p, eps) - _compressed_slopes(t, eps)
    return float(np.mean(np.abs(gap)))


def welch_t_test(
    runs_a: Sequence[float], runs_b: Sequence[float], level: float = SIGNIFICANCE_LEVEL
) -> TTestResult:
    """Two-sided Welch t-test on per-run metric values."""
    a = np.asarray(runs_a, dtype=np.float64)
    b = np.asarray(runs_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise UsageError("t-test needs at least two runs on each side")
    if np.var(a) == 0.0 and np.var(b) == 0.0:
        gap = float(a.mean() - b.mean())
        if gap == 0.0:
            return TTestResult(t=0.0, p_value=1.0, significant=False)
        t_inf = math.copysign(math.inf, gap)
        return TTestResult(t=t_inf, p_value=0.0, significant=True)
    res = stats.ttest_ind(a, b, equal_var=False)
    t_stat = float(res.statistic)
    p_value = float(res.pvalue)
    return TTestResult(t=t_stat, p_value=p_value, significant=p_value < level)


def summarize(values: Sequence[float]) -> MetricSummary:
    """Mean and standard deviation (ddof=1, or 0 for a single value)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise UsageError("cannot summarize an empty sequence")
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return MetricSummary(mean=float(arr.mean()), std=std, n=int(arr.size))


def evaluate_forecasts(preds: ArrayLike, targets: ArrayLike) -> dict[str, float]:
    """Average of every metric over a batch of univariate forecasts."""
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 2 or p.shape[0] == 0:
        raise UsageError(
            f"expected matching non-empty (N, k) batches: {p.shape} vs {t.shape}"
        )
    horizon = p.shape[1]
    totals = dict.fromkeys(METRIC_NAMES, 0.0)
    for pred, target in zip(p, t, strict=True):
        totals["mse"] += eval_mse(pred, target)
        totals["dtw"] += eval_dtw(pred, target)
        totals["tdi"] += eval_tdi(pred, target)
        totals["ramp"] += ramp_score(pred, target)
        totals["hausdorff"] += hausdorff(
            detect_change_points(pred), detect_change_points(target), horizon
        )
    return {name: value / p.shape[0] for name, value in totals.items()}


def aggregate_runs(
    per_label: dict[str, list[dict[str, float]]],
    compare: tuple[str, str] | None = None,
) -> MetricsReport:
    """Summarize per-run metrics per loss label and optionally t-test two labels."""
    report = MetricsReport()
    for label, runs in per_label.items():
        if not runs:
            report.notices.append(f"{label}: no completed runs to aggregate")
            continue
        report.summaries[label] = {
            name: summarize([run[name] for run in runs]) for name in METRIC_NAMES
        }
    if compare is None:
        return report
    first, second = (per_label.get(label, []) for label in compare)
    if len(first) < 2 or len(second) < 2:
        report.notices.append(
            "significance tests skipped: fewer than two runs per loss"
        )
        return report
    for name in METRIC_NAMES:
        report.significance[name] = welch_t_test(
            [run[name] for run in first], [run[name] for run in second]
        )
    return report

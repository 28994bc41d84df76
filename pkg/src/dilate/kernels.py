"""Dynamic-programming kernels for soft and hard dynamic time warping.

Every table has shape ``(k + 1, k + 1)``. Row and column 0 form the boundary:
cell ``(0, 0)`` holds 0 and every other boundary cell holds ``SENTINEL``, a
large finite stand-in for +inf that the recursions skip explicitly so that no
``inf - inf`` ever reaches ``exp``. Interior cell ``(i, j)`` corresponds to
prediction step ``i - 1`` and target step ``j - 1`` of the cost matrix.

The numba kernels are pure functions over float64 arrays; validation lives in
the Python wrappers below them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numba import njit
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from .errors import UsageError

if TYPE_CHECKING:
    from .losses import PenaltyMatrix

FloatArray = NDArray[np.float64]

SENTINEL = 1e30


@njit(cache=True)
def _softmin3(a: float, b: float, c: float, gamma: float) -> float:
    m = min(a, min(b, c))
    if m >= SENTINEL:
        return SENTINEL
    total = 0.0
    if a < SENTINEL:
        total += math.exp(-(a - m) / gamma)
    if b < SENTINEL:
        total += math.exp(-(b - m) / gamma)
    if c < SENTINEL:
        total += math.exp(-(c - m) / gamma)
    return m - gamma * math.log(total)


@njit(cache=True)
def _transition(r_next: float, cost_next: float, r_here: float, gamma: float) -> float:
    """Softmin weight carried by ``here`` in the recursion of its successor."""
    if r_next >= SENTINEL or r_here >= SENTINEL:
        return 0.0
    return math.exp((r_next - cost_next - r_here) / gamma)


@njit(cache=True)
def _forward_kernel(delta: FloatArray, gamma: float) -> FloatArray:
    k = delta.shape[0]
    r = np.full((k + 1, k + 1), SENTINEL)
    r[0, 0] = 0.0
    for i in range(1, k + 1):
        for j in range(1, k + 1):
            cost = delta[i - 1, j - 1]
            if cost >= SENTINEL:
                continue
            smooth = _softmin3(r[i - 1, j - 1], r[i - 1, j], r[i, j - 1], gamma)
            if smooth >= SENTINEL:
                continue
            r[i, j] = cost + smooth
    return r


@njit(cache=True)
def _backward_kernel(delta: FloatArray, r: FloatArray, gamma: float) -> FloatArray:
    k = delta.shape[0]
    e = np.zeros((k + 1, k + 1))
    if r[k, k] >= SENTINEL:
        return e
    e[k, k] = 1.0
    for i in range(k, 0, -1):
        for j in range(k, 0, -1):
            if (i == k and j == k) or r[i, j] >= SENTINEL:
                continue
            acc = 0.0
            if i < k:
                acc += e[i + 1, j] * _transition(
                    r[i + 1, j], delta[i, j - 1], r[i, j], gamma
                )
            if j < k:
                acc += e[i, j + 1] * _transition(
                    r[i, j + 1], delta[i - 1, j], r[i, j], gamma
                )
            if i < k and j < k:
                acc += e[i + 1, j + 1] * _transition(
                    r[i + 1, j + 1], delta[i, j], r[i, j], gamma
                )
            e[i, j] = acc
    return e


@njit(cache=True)
def _tangent_flow(
    e_next: float,
    e_dot_next: float,
    r_next: float,
    r_dot_next: float,
    cost_next: float,
    dir_next: float,
    r_here: float,
    r_dot_here: float,
    gamma: float,
) -> float:
    weight = _transition(r_next, cost_next, r_here, gamma)
    if weight == 0.0:
        return 0.0
    weight_dot = weight * (r_dot_next - dir_next - r_dot_here) / gamma
    return e_dot_next * weight + e_next * weight_dot


@njit(cache=True)
def _jvp_kernel(
    delta: FloatArray,
    direction: FloatArray,
    r: FloatArray,
    e: FloatArray,
    gamma: float,
) -> tuple[FloatArray, FloatArray]:
    k = delta.shape[0]
    r_dot = np.zeros((k + 1, k + 1))
    for i in range(1, k + 1):
        for j in range(1, k + 1):
            if r[i, j] >= SENTINEL:
                continue
            cost = delta[i - 1, j - 1]
            acc = direction[i - 1, j - 1]
            here = r[i, j]
            acc += _transition(here, cost, r[i - 1, j - 1], gamma) * r_dot[i - 1, j - 1]
            acc += _transition(here, cost, r[i - 1, j], gamma) * r_dot[i - 1, j]
            acc += _transition(here, cost, r[i, j - 1], gamma) * r_dot[i, j - 1]
            r_dot[i, j] = acc

    e_dot = np.zeros((k + 1, k + 1))
    for i in range(k, 0, -1):
        for j in range(k, 0, -1):
            if (i == k and j == k) or r[i, j] >= SENTINEL:
                continue
            acc = 0.0
            if i < k:
                acc += _tangent_flow(
                    e[i + 1, j], e_dot[i + 1, j], r[i + 1, j], r_dot[i + 1, j],
                    delta[i, j - 1], direction[i, j - 1], r[i, j], r_dot[i, j], gamma,
                )
            if j < k:
                acc += _tangent_flow(
                    e[i, j + 1], e_dot[i, j + 1], r[i, j + 1], r_dot[i, j + 1],
                    delta[i - 1, j], direction[i - 1, j], r[i, j], r_dot[i, j], gamma,
                )
            if i < k and j < k:
                acc += _tangent_flow(
                    e[i + 1, j + 1], e_dot[i + 1, j + 1], r[i + 1, j + 1],
                    r_dot[i + 1, j + 1], delta[i, j], direction[i, j],
                    r[i, j], r_dot[i, j], gamma,
                )
            e_dot[i, j] = acc
    return r_dot, e_dot


@njit(cache=True)
def _hard_forward_kernel(delta: FloatArray) -> FloatArray:
    k = delta.shape[0]
    acc = np.full((k + 1, k + 1), SENTINEL)
    acc[0, 0] = 0.0
    for i in range(1, k + 1):
        for j in range(1, k + 1):
            cost = delta[i - 1, j - 1]
            if cost >= SENTINEL:
                continue
            best = min(acc[i - 1, j - 1], min(acc[i - 1, j], acc[i, j - 1]))
            if best >= SENTINEL:
                continue
            acc[i, j] = cost + best
    return acc


@njit(cache=True)
def _backtrack_kernel(acc: FloatArray) -> NDArray[np.int64]:
    # Ties resolve diagonal, then vertical (i - 1, j), then horizontal (i, j - 1).
    k = acc.shape[0] - 1
    cells = np.empty((2 * k - 1, 2), dtype=np.int64)
    i = k
    j = k
    n = 0
    cells[n, 0] = i - 1
    cells[n, 1] = j - 1
    while i > 1 or j > 1:
        diag = acc[i - 1, j - 1]
        vert = acc[i - 1, j]
        horiz = acc[i, j - 1]
        if diag <= vert and diag <= horiz:
            i -= 1
            j -= 1
        elif vert <= horiz:
            i -= 1
        else:
            j -= 1
        n += 1
        cells[n, 0] = i - 1
        cells[n, 1] = j - 1
    return cells[: n + 1][::-1].copy()


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise cost between prediction steps (rows) and target steps (columns)."""

    delta: FloatArray
    gamma: float = 1.0

    def __post_init__(self) -> None:
        delta = np.ascontiguousarray(self.delta, dtype=np.float64)
        if delta.ndim != 2 or delta.shape[0] != delta.shape[1] or delta.shape[0] < 1:
            raise UsageError(f"cost matrix must be square and non-empty: {delta.shape}")
        if not np.all(np.isfinite(delta)) or np.any(delta < 0):
            raise UsageError("cost matrix entries must be finite and non-negative")
        if not self.gamma > 0:
            raise UsageError(f"gamma must be > 0, got {self.gamma}")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def k(self) -> int:
        return int(self.delta.shape[0])


@dataclass
class DpTables:
    """Forward and backward tables of one soft-DTW evaluation.

    ``r`` is filled by the forward pass, ``e`` by the gradient pass and the
    dotted tables by a Hessian-vector pass. ``cost`` records the input they
    were computed from.
    """

    cost: CostMatrix
    r: FloatArray
    e: FloatArray | None = None
    r_dot: FloatArray | None = None
    e_dot: FloatArray | None = None


@dataclass(frozen=True)
class SoftAlignment:
    """Expected path occupancy A*_gamma, the gradient of soft-DTW in the cost."""

    weights: FloatArray


@dataclass(frozen=True)
class HardPath:
    """Optimal warping path as 0-based ``(h, j)`` cells from (0, 0) to (k-1, k-1)."""

    cells: tuple[tuple[int, int], ...]

    def as_matrix(self, k: int) -> FloatArray:
        """Binary k x k matrix with ones on the path."""
        matrix = np.zeros((k, k))
        for h, j in self.cells:
            matrix[h, j] = 1.0
        return matrix


def as_series(values: ArrayLike) -> FloatArray:
    """Return a time series as a float array of shape ``(k, d)``."""
    series = np.asarray(values, dtype=np.float64)
    if series.ndim == 1:
        series = series[:, None]
    if series.ndim != 2 or series.shape[0] < 1 or series.shape[1] < 1:
        raise UsageError(f"time series must have shape (k,) or (k, d): {series.shape}")
    if not np.all(np.isfinite(series)):
        raise UsageError("time series entries must be finite")
    return series


def softmin(values: ArrayLike, gamma: float) -> float:
    """Smoothed minimum ``-gamma * log(sum(exp(-a_i / gamma)))``.

    Entries at or above ``SENTINEL`` are ignored; if every entry is a sentinel
    the sentinel is returned.
    """
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise UsageError("softmin of an empty sequence")
    if not gamma > 0:
        raise UsageError(f"gamma must be > 0, got {gamma}")
    live = arr[arr < SENTINEL]
    if live.size == 0:
        return SENTINEL
    return float(-gamma * logsumexp(-live / gamma))


def pairwise_cost(pred: ArrayLike, target: ArrayLike, gamma: float = 1.0) -> CostMatrix:
    """Squared Euclidean cost ``delta[h, j] = |pred[h] - target[j]|^2``."""
    p = as_series(pred)
    t = as_series(target)
    if p.shape != t.shape:
        raise UsageError(f"shape mismatch: pred {p.shape} vs target {t.shape}")
    diff = p[:, None, :] - t[None, :, :]
    return CostMatrix(np.einsum("hjd,hjd->hj", diff, diff), gamma)


def soft_dtw_forward(cost: CostMatrix) -> tuple[float, DpTables]:
    """Soft-DTW value and the forward accumulated-cost table."""
    r = _forward_kernel(cost.delta, cost.gamma)
    return float(r[cost.k, cost.k]), DpTables(cost=cost, r=r)


def _check_tables(cost: CostMatrix, tables: DpTables) -> None:
    if tables.cost is cost:
        return
    same = (
        tables.cost.gamma == cost.gamma
        and tables.cost.delta.shape == cost.delta.shape
        and np.array_equal(tables.cost.delta, cost.delta)
    )
    if not same or tables.r.shape != (cost.k + 1, cost.k + 1):
        raise UsageError("DP tables were computed from a different cost matrix")


def soft_dtw_grad(cost: CostMatrix, tables: DpTables) -> SoftAlignment:
    """Gradient of soft-DTW in the cost matrix, reusing the forward table."""
    _check_tables(cost, tables)
    if tables.e is None:
        tables.e = _backward_kernel(cost.delta, tables.r, cost.gamma)
    return SoftAlignment(weights=tables.e[1:, 1:].copy())


def soft_dtw_value_and_grad(cost: CostMatrix) -> tuple[float, SoftAlignment, DpTables]:
    """One forward and one backward pass."""
    value, tables = soft_dtw_forward(cost)
    return value, soft_dtw_grad(cost, tables), tables


def soft_dtw_grad_jvp(
    cost: CostMatrix,
    direction: ArrayLike | PenaltyMatrix,
    tables: DpTables | None = None,
) -> FloatArray:
    """Hessian of soft-DTW applied to ``direction``.

    Equals the directional derivative of the gradient map in ``direction`` and,
    by symmetry of the Hessian, the gradient of ``<A*_gamma(delta), direction>``
    with respect to ``delta``. Forward and backward tables are reused when
    given.
    """
    omega = getattr(direction, "omega", direction)
    matrix = np.ascontiguousarray(omega, dtype=np.float64)
    if matrix.shape != cost.delta.shape:
        raise UsageError(
            f"direction shape {matrix.shape} does not match cost {cost.delta.shape}"
        )
    if not np.all(np.isfinite(matrix)) or np.any(np.abs(matrix) >= SENTINEL):
        raise UsageError("direction entries must be finite")
    if tables is None:
        _, tables = soft_dtw_forward(cost)
    else:
        _check_tables(cost, tables)
    if tables.e is None:
        tables.e = _backward_kernel(cost.delta, tables.r, cost.gamma)
    r_dot, e_dot = _jvp_kernel(cost.delta, matrix, tables.r, tables.e, cost.gamma)
    tables.r_dot = r_dot
    tables.e_dot = e_dot
    return e_dot[1:, 1:].copy()


def hard_dtw(cost: CostMatrix) -> tuple[float, HardPath]:
    """Classic DTW value and its optimal path (gamma is ignored)."""
    acc = _hard_forward_kernel(cost.delta)
    cells = _backtrack_kernel(acc)
    path = HardPath(cells=tuple((int(h), int(j)) for h, j in cells))
    return float(acc[cost.k, cost.k]), path


def delannoy(k: int) -> int:
    """Number of monotone warping paths through a k x k grid."""
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    counts = [[1] * k for _ in range(k)]
    for i in range(1, k):
        for j in range(1, k):
            counts[i][j] = counts[i - 1][j] + counts[i][j - 1] + counts[i - 1][j - 1]
    return counts[k - 1][k - 1]

"""Timing of the soft-DTW kernels and their quadratic scaling.

The analytic gradient is compared against a central finite-difference
gradient, which needs two forward passes per cost entry.
"""

from __future__ import annotations

import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .kernels import CostMatrix, soft_dtw_forward, soft_dtw_grad, soft_dtw_grad_jvp
from .logger import get_logger

logger = get_logger(__name__)


@dataclass
class KernelTiming:
    """Median seconds per call for one horizon."""

    k: int
    forward: float
    grad: float
    jvp: float


@dataclass
class BenchReport:
    timings: list[KernelTiming]
    exponents: dict[str, float]
    fd_k: int
    fd_seconds: float
    analytic_seconds: float
    speedup: float
    repeats: int
    gamma: float


def _median_seconds(fn: Callable[[], object], repeats: int) -> float:
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return float(np.median(samples))


def _random_cost(k: int, gamma: float, rng: np.random.Generator) -> CostMatrix:
    return CostMatrix(rng.random((k, k)), gamma)


def finite_difference_grad(cost: CostMatrix, step: float = 1e-6) -> np.ndarray:
    """Central differences of soft-DTW in every cost entry."""
    grad = np.empty_like(cost.delta)
    for idx in np.ndindex(*cost.delta.shape):
        plus = cost.delta.copy()
        minus = cost.delta.copy()
        plus[idx] += step
        minus[idx] = max(minus[idx] - step, 0.0)
        width = plus[idx] - minus[idx]
        hi, _ = soft_dtw_forward(CostMatrix(plus, cost.gamma))
        lo, _ = soft_dtw_forward(CostMatrix(minus, cost.gamma))
        grad[idx] = (hi - lo) / width
    return grad


def scaling_exponent(k_values: Sequence[int], seconds: Sequence[float]) -> float:
    """Slope of log(time) against log(k)."""
    log_k = np.log(np.asarray(k_values, dtype=np.float64))
    slope, _ = np.polyfit(log_k, np.log(seconds), 1)
    return float(slope)


def bench_kernels(
    k_values: Sequence[int] = (16, 32, 64, 128),
    repeats: int = 5,
    fd_k: int = 20,
    gamma: float = 0.1,
    seed: int = 0,
) -> BenchReport:
    """Median forward, forward+gradient and Hessian-vector timings per horizon."""
    if len(k_values) < 2 or any(k < 2 for k in k_values):
        raise UsageError("benchmark needs at least two horizons, each >= 2")
    if repeats < 1 or fd_k < 2:
        raise UsageError("repeats must be >= 1 and the finite-difference horizon >= 2")
    rng = np.random.default_rng(seed)

    # compile the jitted kernels before timing anything
    warm = _random_cost(2, gamma, rng)
    _, warm_tables = soft_dtw_forward(warm)
    soft_dtw_grad(warm, warm_tables)
    soft_dtw_grad_jvp(warm, np.ones((2, 2)), warm_tables)

    timings = []
    for k in k_values:
        cost = _random_cost(k, gamma, rng)
        direction = rng.random((k, k))
        _, tables = soft_dtw_forward(cost)

        def grad_only(cost: CostMatrix = cost) -> object:
            _, fresh = soft_dtw_forward(cost)
            return soft_dtw_grad(cost, fresh)

        timings.append(
            KernelTiming(
                k=k,
                forward=_median_seconds(lambda c=cost: soft_dtw_forward(c), repeats),
                grad=_median_seconds(grad_only, repeats),
                jvp=_median_seconds(
                    lambda c=cost, d=direction, t=tables: soft_dtw_grad_jvp(c, d, t),
                    repeats,
                ),
            )
        )
    ks = [t.k for t in timings]
    exponents = {
        name: scaling_exponent(ks, [getattr(t, name) for t in timings])
        for name in ("forward", "grad", "jvp")
    }

    fd_cost = _random_cost(fd_k, gamma, rng)
    fd_seconds = _median_seconds(lambda: finite_difference_grad(fd_cost), 1)

    def analytic() -> object:
        _, tables = soft_dtw_forward(fd_cost)
        return soft_dtw_grad(fd_cost, tables)

    analytic_seconds = _median_seconds(analytic, max(repeats, 5))
    speedup = fd_seconds / analytic_seconds if analytic_seconds > 0 else float("inf")
    report = BenchReport(
        timings=timings,
        exponents=exponents,
        fd_k=fd_k,
        fd_seconds=fd_seconds,
        analytic_seconds=analytic_seconds,
        speedup=speedup,
        repeats=repeats,
        gamma=gamma,
    )
    logger.info(
        "Kernel benchmark finished",
        extra={"exponents": exponents, "fd_k": fd_k, "speedup": speedup},
    )
    return report

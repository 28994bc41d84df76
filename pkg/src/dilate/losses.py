"""Trainable losses and their gradients with respect to the prediction.

All losses take a prediction and a target of identical shape ``(k,)`` or
``(k, d)`` and return a :class:`LossResult` whose gradient has the shape of
the prediction. Gradients in the cost matrix are chained through
``delta[h, j] = |pred[h] - target[j]|^2``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .errors import DegenerateCostError, UsageError
from .kernels import (
    SENTINEL,
    CostMatrix,
    FloatArray,
    as_series,
    pairwise_cost,
    soft_dtw_forward,
    soft_dtw_grad,
    soft_dtw_grad_jvp,
)
from .status import LossKind, OmegaKind


@dataclass(frozen=True)
class PenaltyMatrix:
    """Temporal penalty Omega; banded entries outside the band are SENTINEL."""

    omega: FloatArray
    kind: OmegaKind
    band_width: int | None = None

    @property
    def k(self) -> int:
        return int(self.omega.shape[0])

    @property
    def is_finite(self) -> bool:
        return not bool(np.any(self.omega >= SENTINEL))


def _lag(k: int) -> FloatArray:
    idx = np.arange(k, dtype=np.float64)
    return np.abs(idx[:, None] - idx[None, :])


def squared_penalty(k: int) -> PenaltyMatrix:
    """``omega[h, j] = (h - j)^2 / k^2``."""
    if k < 1:
        raise UsageError(f"horizon must be >= 1, got {k}")
    return PenaltyMatrix(_lag(k) ** 2 / k**2, OmegaKind.SQUARED)


def sakoe_chiba_penalty(k: int, band_width: int) -> PenaltyMatrix:
    """Zero inside the band ``|h - j| <= band_width``, SENTINEL outside."""
    if k < 1:
        raise UsageError(f"horizon must be >= 1, got {k}")
    if band_width < 0:
        raise UsageError(f"band width must be >= 0, got {band_width}")
    omega = np.where(_lag(k) > band_width, SENTINEL, 0.0)
    return PenaltyMatrix(omega, OmegaKind.SAKOE_CHIBA, band_width)


def weighted_penalty(
    k: int, weight_fn: Callable[[FloatArray], FloatArray] | None = None
) -> PenaltyMatrix:
    """``omega[h, j] = f(|h - j|)`` for a nondecreasing f with f(0) = 0.

    The default is ``f(m) = m / k``.
    """
    if k < 1:
        raise UsageError(f"horizon must be >= 1, got {k}")
    fn = weight_fn if weight_fn is not None else (lambda m: m / k)
    profile = np.asarray(fn(np.arange(k, dtype=np.float64)), dtype=np.float64)
    if profile.shape != (k,) or not np.all(np.isfinite(profile)):
        raise UsageError("weight function must map lags to finite values")
    if profile[0] != 0.0 or np.any(np.diff(profile) < 0):
        raise UsageError("weight function must be nondecreasing with f(0) = 0")
    omega = np.asarray(fn(_lag(k)), dtype=np.float64)
    return PenaltyMatrix(omega, OmegaKind.WEIGHTED)


def build_penalty(
    k: int, kind: OmegaKind, band_width: int | None = None
) -> PenaltyMatrix:
    """Penalty of the given kind for horizon k."""
    if kind is OmegaKind.SQUARED:
        return squared_penalty(k)
    if kind is OmegaKind.WEIGHTED:
        return weighted_penalty(k)
    if band_width is None:
        raise UsageError("sakoe_chiba penalty requires a band width")
    return sakoe_chiba_penalty(k, band_width)


class LossConfig(BaseModel):
    """Shape/time balance and smoothing of the DILATE family."""

    model_config = ConfigDict(frozen=True)

    alpha: float = 0.5
    gamma: float = 0.01
    omega_kind: OmegaKind = OmegaKind.SQUARED
    band_width: int | None = None

    @field_validator("alpha")
    @classmethod
    def validate_alpha(cls, v: float) -> float:
        """Ensure alpha lies in [0, 1]."""
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"alpha must be in [0, 1]: {v}")
        return v

    @field_validator("gamma")
    @classmethod
    def validate_gamma(cls, v: float) -> float:
        """Ensure gamma is strictly positive."""
        if not v > 0.0:
            raise ValueError(f"gamma must be > 0: {v}")
        return v

    @model_validator(mode="after")
    def validate_band(self) -> LossConfig:
        """Require a non-negative band width for the banded penalty."""
        if self.omega_kind is OmegaKind.SAKOE_CHIBA and (
            self.band_width is None or self.band_width < 0
        ):
            raise ValueError("sakoe_chiba penalty requires band_width >= 0")
        return self


@dataclass(frozen=True)
class LossResult:
    """Loss value, gradient in the prediction and the two weighted parts."""

    value: float
    grad: FloatArray | None
    shape_part: float
    temporal_part: float


class LossFn(Protocol):
    def __call__(
        self, pred: ArrayLike, target: ArrayLike, *, need_grad: bool = True
    ) -> LossResult: ...


def _pair(
    pred: ArrayLike, target: ArrayLike
) -> tuple[FloatArray, FloatArray, tuple[int, ...]]:
    shape = np.shape(pred)
    p = as_series(pred)
    t = as_series(target)
    if p.shape != t.shape:
        raise UsageError(f"shape mismatch: pred {p.shape} vs target {t.shape}")
    return p, t, shape


def _chain(p: FloatArray, t: FloatArray, g_delta: FloatArray) -> FloatArray:
    """Pull a cost-matrix gradient back to the prediction."""
    return 2.0 * (g_delta.sum(axis=1)[:, None] * p - g_delta @ t)


def _penalty_for(
    k: int, omega: PenaltyMatrix | None, config: LossConfig | None
) -> PenaltyMatrix:
    if omega is None:
        if config is None:
            return squared_penalty(k)
        omega = build_penalty(k, config.omega_kind, config.band_width)
    if omega.k != k:
        raise UsageError(f"penalty is {omega.k}x{omega.k} but horizon is {k}")
    return omega


def shape_loss(
    pred: ArrayLike, target: ArrayLike, gamma: float, *, need_grad: bool = True
) -> LossResult:
    """Soft-DTW between prediction and target."""
    p, t, shape = _pair(pred, target)
    cost = pairwise_cost(p, t, gamma)
    value, tables = soft_dtw_forward(cost)
    grad = None
    if need_grad:
        alignment = soft_dtw_grad(cost, tables)
        grad = _chain(p, t, alignment.weights).reshape(shape)
    return LossResult(value=value, grad=grad, shape_part=value, temporal_part=0.0)


def temporal_loss(
    pred: ArrayLike,
    target: ArrayLike,
    gamma: float,
    omega: PenaltyMatrix | None = None,
    *,
    need_grad: bool = True,
) -> LossResult:
    """Smoothed time distortion ``<A*_gamma(delta), omega>``.

    Banded penalties are rejected: their infinite entries only make sense
    inside the tangled loss.
    """
    p, t, shape = _pair(pred, target)
    penalty = _penalty_for(p.shape[0], omega, None)
    if not penalty.is_finite:
        raise UsageError("banded penalty is only valid for the tangled loss")
    cost = pairwise_cost(p, t, gamma)
    _, tables = soft_dtw_forward(cost)
    alignment = soft_dtw_grad(cost, tables)
    value = float(np.sum(alignment.weights * penalty.omega))
    grad = None
    if need_grad:
        g_delta = soft_dtw_grad_jvp(cost, penalty, tables)
        grad = _chain(p, t, g_delta).reshape(shape)
    return LossResult(value=value, grad=grad, shape_part=0.0, temporal_part=value)


def dilate_loss(
    pred: ArrayLike,
    target: ArrayLike,
    config: LossConfig,
    omega: PenaltyMatrix | None = None,
    *,
    need_grad: bool = True,
) -> LossResult:
    """``alpha * shape + (1 - alpha) * temporal`` from one shared DP pass."""
    p, t, shape = _pair(pred, target)
    penalty = _penalty_for(p.shape[0], omega, config)
    if not penalty.is_finite:
        raise UsageError("banded penalty is only valid for the tangled loss")
    alpha = config.alpha
    cost = pairwise_cost(p, t, config.gamma)
    shape_value, tables = soft_dtw_forward(cost)
    alignment = soft_dtw_grad(cost, tables)
    temporal_value = float(np.sum(alignment.weights * penalty.omega))
    value = alpha * shape_value + (1.0 - alpha) * temporal_value
    grad = None
    if need_grad:
        g_delta = alpha * alignment.weights
        if alpha < 1.0:
            g_delta = g_delta + (1.0 - alpha) * soft_dtw_grad_jvp(cost, penalty, tables)
        grad = _chain(p, t, g_delta).reshape(shape)
    return LossResult(
        value=value,
        grad=grad,
        shape_part=shape_value,
        temporal_part=temporal_value,
    )


def dilate_tangled_loss(
    pred: ArrayLike,
    target: ArrayLike,
    config: LossConfig,
    omega: PenaltyMatrix | None = None,
    *,
    need_grad: bool = True,
) -> LossResult:
    """Soft-DTW on the blended cost ``alpha * delta + (1 - alpha) * omega``.

    Cells where omega is SENTINEL stay SENTINEL in the blend. The parts report
    ``<A, delta>`` and ``<A, omega>`` under the blended alignment A.
    """
    p, t, shape = _pair(pred, target)
    penalty = _penalty_for(p.shape[0], omega, config)
    alpha = config.alpha
    if alpha == 0.0 and not penalty.is_finite:
        raise DegenerateCostError(
            "alpha = 0 with a banded penalty ignores the prediction"
        )
    delta = pairwise_cost(p, t).delta
    banned = penalty.omega >= SENTINEL
    blended = np.where(banned, SENTINEL, alpha * delta + (1.0 - alpha) * penalty.omega)
    cost = CostMatrix(blended, config.gamma)
    value, tables = soft_dtw_forward(cost)
    if value >= SENTINEL:
        raise DegenerateCostError("blended cost admits no finite warping path")
    alignment = soft_dtw_grad(cost, tables)
    weights = alignment.weights
    grad = _chain(p, t, alpha * weights).reshape(shape) if need_grad else None
    return LossResult(
        value=value,
        grad=grad,
        shape_part=float(np.sum(weights * delta)),
        temporal_part=float(np.sum(np.where(banned, 0.0, weights * penalty.omega))),
    )


def mse_loss(
    pred: ArrayLike, target: ArrayLike, *, need_grad: bool = True
) -> LossResult:
    """Mean squared error over all entries."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise UsageError(f"shape mismatch: pred {p.shape} vs target {t.shape}")
    diff = p - t
    value = float(np.mean(diff**2))
    grad = 2.0 * diff / diff.size if need_grad else None
    return LossResult(value=value, grad=grad, shape_part=0.0, temporal_part=0.0)


def select_loss(kind: LossKind, config: LossConfig, horizon: int) -> LossFn:
    """Per-sample loss for a CLI loss selector, with omega built once."""
    if kind is LossKind.MSE:

        def _mse(
            pred: ArrayLike, target: ArrayLike, *, need_grad: bool = True
        ) -> LossResult:
            return mse_loss(pred, target, need_grad=need_grad)

        return _mse

    if kind is LossKind.DTW:

        def _dtw(
            pred: ArrayLike, target: ArrayLike, *, need_grad: bool = True
        ) -> LossResult:
            return shape_loss(pred, target, config.gamma, need_grad=need_grad)

        return _dtw

    if kind is LossKind.DILATE:
        penalty = build_penalty(horizon, config.omega_kind, config.band_width)

        def _dilate(
            pred: ArrayLike, target: ArrayLike, *, need_grad: bool = True
        ) -> LossResult:
            return dilate_loss(pred, target, config, penalty, need_grad=need_grad)

        return _dilate

    if kind is LossKind.DILATE_T_WEIGHTED:
        penalty = weighted_penalty(horizon)
    else:
        if config.band_width is None:
            raise UsageError("dilate-t-band requires a band width")
        penalty = sakoe_chiba_penalty(horizon, config.band_width)

    def _tangled(
        pred: ArrayLike, target: ArrayLike, *, need_grad: bool = True
    ) -> LossResult:
        return dilate_tangled_loss(pred, target, config, penalty, need_grad=need_grad)

    return _tangled

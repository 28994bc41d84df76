"""One-hidden-layer forecaster with hand-written backpropagation and ADAM.

The network maps an input window of length n to a forecast of length k:
``pred = W2 @ relu(W1 @ x + b1) + b2``. Training minimizes any per-sample
loss from :mod:`dilate.losses` with minibatch ADAM and early stopping on a
validation split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .dataset import Dataset
from .errors import DataError, TrainingDivergedError, UsageError
from .kernels import FloatArray
from .logger import get_logger
from .losses import LossConfig, LossFn, select_loss
from .status import LossKind

logger = get_logger(__name__)

CHECKPOINT_VERSION = "dilate-mlp/1"


@dataclass(frozen=True)
class MlpParams:
    """Weights of the forecaster; w1 is (H, n), w2 is (k, H)."""

    w1: FloatArray
    b1: FloatArray
    w2: FloatArray
    b2: FloatArray

    def __post_init__(self) -> None:
        hidden, n = self.w1.shape
        k = self.w2.shape[0]
        expected = {"b1": (hidden,), "w2": (k, hidden), "b2": (k,)}
        if any(getattr(self, name).shape != shape for name, shape in expected.items()):
            raise UsageError(
                "inconsistent parameter shapes: "
                f"w1 {self.w1.shape}, b1 {self.b1.shape}, "
                f"w2 {self.w2.shape}, b2 {self.b2.shape}"
            )
        if n < 1 or k < 1 or hidden < 1:
            raise UsageError("parameter dimensions must be >= 1")

    @property
    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(block))) for block in self.blocks())

    @property
    def input_len(self) -> int:
        return int(self.w1.shape[1])

    @property
    def horizon(self) -> int:
        return int(self.w2.shape[0])

    @property
    def hidden(self) -> int:
        return int(self.w1.shape[0])

    def blocks(self) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
        return self.w1, self.b1, self.w2, self.b2


def init_mlp(
    input_len: int, horizon: int, hidden: int = 128, seed: int = 0
) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases per layer."""
    if input_len < 1 or horizon < 1 or hidden < 1:
        raise UsageError("input length, horizon and hidden size must be >= 1")
    rng = np.random.default_rng(seed)
    lim1 = 1.0 / math.sqrt(input_len)
    lim2 = 1.0 / math.sqrt(hidden)
    return MlpParams(
        w1=rng.uniform(-lim1, lim1, size=(hidden, input_len)),
        b1=rng.uniform(-lim1, lim1, size=hidden),
        w2=rng.uniform(-lim2, lim2, size=(horizon, hidden)),
        b2=rng.uniform(-lim2, lim2, size=horizon),
    )


@dataclass(frozen=True)
class MlpCache:
    """Intermediate values of one forward pass, tied to its parameters."""

    params: MlpParams
    inputs: FloatArray
    pre_activation: FloatArray
    hidden: FloatArray
    squeeze: bool


def mlp_forward(params: MlpParams, inputs: ArrayLike) -> tuple[FloatArray, MlpCache]:
    """Forecast for one input vector (n,) or a batch (N, n)."""
    x = np.asarray(inputs, dtype=np.float64)
    squeeze = x.ndim == 1
    batch = x[None, :] if squeeze else x
    if batch.ndim != 2 or batch.shape[1] != params.input_len:
        raise UsageError(
            f"input shape {x.shape} does not match input length {params.input_len}"
        )
    z = batch @ params.w1.T + params.b1
    h = np.maximum(z, 0.0)
    out = h @ params.w2.T + params.b2
    cache = MlpCache(
        params=params, inputs=batch, pre_activation=z, hidden=h, squeeze=squeeze
    )
    return (out[0] if squeeze else out), cache


def mlp_backward(params: MlpParams, cache: MlpCache, grad_pred: ArrayLike) -> MlpParams:
    """Parameter gradients of ``<pred, grad_pred>``, summed over the batch.

    The ReLU subgradient at zero is zero.
    """
    if cache.params is not params:
        raise UsageError(
            "stale forward cache: parameters changed since the forward pass"
        )
    g = np.asarray(grad_pred, dtype=np.float64)
    g = g[None, :] if cache.squeeze else g
    if g.shape != (cache.inputs.shape[0], params.horizon):
        raise UsageError(f"gradient shape {g.shape} does not match forecast shape")
    gw2 = g.T @ cache.hidden
    gb2 = g.sum(axis=0)
    gz = (g @ params.w2) * (cache.pre_activation > 0)
    gw1 = gz.T @ cache.inputs
    gb1 = gz.sum(axis=0)
    return MlpParams(w1=gw1, b1=gb1, w2=gw2, b2=gb2)


def predict(params: MlpParams, inputs: ArrayLike) -> FloatArray:
    out, _ = mlp_forward(params, inputs)
    return out


@dataclass(frozen=True)
class AdamState:
    """First and second moment estimates for every parameter block."""

    m: tuple[FloatArray, ...]
    v: tuple[FloatArray, ...]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: MlpParams, lr: float = 1e-3) -> AdamState:
    zeros = tuple(np.zeros_like(block) for block in params.blocks())
    return AdamState(m=zeros, v=tuple(z.copy() for z in zeros), lr=lr)


def adam_step(
    state: AdamState, params: MlpParams, grads: MlpParams
) -> tuple[MlpParams, AdamState]:
    """One bias-corrected ADAM update."""
    t = state.t + 1
    new_m, new_v, new_blocks = [], [], []
    blocks = zip(params.blocks(), grads.blocks(), state.m, state.v, strict=True)
    for p, g, m, v in blocks:
        if g.shape != p.shape:
            raise UsageError(
                f"gradient shape {g.shape} does not match parameter {p.shape}"
            )
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        new_blocks.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return MlpParams(*new_blocks), replace(state, m=tuple(new_m), v=tuple(new_v), t=t)


class TrainConfig(BaseModel):
    """Optimization schedule and the training loss."""

    model_config = ConfigDict(frozen=True)

    max_epochs: int = Field(default=1000, ge=1)
    patience: int = Field(default=20, ge=1)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    hidden_size: int = Field(default=128, ge=1)
    seed: int = 0
    loss: LossKind = LossKind.MSE
    loss_config: LossConfig = LossConfig()

    @field_validator("loss", mode="before")
    @classmethod
    def parse_loss(cls, v: object) -> object:
        """Accept the loss selector as its command-line spelling."""
        return LossKind(v) if isinstance(v, str) else v


@dataclass
class TrainingTrace:
    """Per-epoch mean losses and the epoch whose parameters were kept."""

    train_loss: list[float] = field(default_factory=list)
    valid_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_valid: float = math.inf
    stopped_early: bool = False


def _mean_loss(params: MlpParams, data: Dataset, loss_fn: LossFn) -> float:
    preds = predict(params, data.inputs)
    if not np.all(np.isfinite(preds)):
        return math.inf
    total = 0.0
    for pred, target in zip(preds, data.targets, strict=True):
        total += loss_fn(pred, target, need_grad=False).value
    return total / len(data)


def train(
    params: MlpParams,
    train_set: Dataset,
    valid_set: Dataset,
    config: TrainConfig,
) -> tuple[MlpParams, TrainingTrace]:
    """Minibatch ADAM with early stopping on the validation loss.

    Returns the parameters of the best validation epoch. Deterministic for a
    given seed.
    """
    if len(train_set) == 0 or len(valid_set) == 0:
        raise DataError("training and validation sets must be non-empty")
    if (train_set.input_len, train_set.horizon) != (params.input_len, params.horizon):
        raise UsageError("dataset window sizes do not match the model")
    loss_fn = select_loss(config.loss, config.loss_config, params.horizon)
    rng = np.random.default_rng(config.seed)
    state = adam_init(params, config.learning_rate)
    trace = TrainingTrace()
    best = params
    stale = 0

    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_set))
        epoch_total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            preds, cache = mlp_forward(params, train_set.inputs[batch])
            if not np.all(np.isfinite(preds)):
                raise TrainingDivergedError(f"non-finite forecast at epoch {epoch}")
            grad_pred = np.empty_like(preds)
            for row, idx in enumerate(batch):
                result = loss_fn(preds[row], train_set.targets[idx])
                if not math.isfinite(result.value):
                    raise TrainingDivergedError(
                        f"non-finite training loss at epoch {epoch}"
                    )
                assert result.grad is not None
                grad_pred[row] = result.grad / len(batch)
                epoch_total += result.value
            grads = mlp_backward(params, cache, grad_pred)
            params, state = adam_step(state, params, grads)
            if not params.is_finite:
                raise TrainingDivergedError(f"non-finite parameters at epoch {epoch}")

        train_loss = epoch_total / len(train_set)
        valid_loss = _mean_loss(params, valid_set, loss_fn)
        if not math.isfinite(valid_loss):
            raise TrainingDivergedError(f"non-finite validation loss at epoch {epoch}")
        trace.train_loss.append(train_loss)
        trace.valid_loss.append(valid_loss)
        logger.debug(
            "Epoch completed",
            extra={"epoch": epoch, "train_loss": train_loss, "valid_loss": valid_loss},
        )
        if valid_loss < trace.best_valid:
            trace.best_valid = valid_loss
            trace.best_epoch = epoch
            best = params
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                trace.stopped_early = True
                break

    logger.info(
        "Training finished",
        extra={
            "loss": config.loss.value,
            "seed": config.seed,
            "epochs": len(trace.train_loss),
            "best_epoch": trace.best_epoch,
            "best_valid": trace.best_valid,
        },
    )
    return best, trace


class Checkpoint(BaseModel):
    """Serialized parameters: shapes plus row-major values."""

    version: str
    input_len: int
    horizon: int
    hidden: int
    w1: list[float]
    b1: list[float]
    w2: list[float]
    b2: list[float]


def save_checkpoint(params: MlpParams, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    ckpt = Checkpoint(
        version=CHECKPOINT_VERSION,
        input_len=params.input_len,
        horizon=params.horizon,
        hidden=params.hidden,
        w1=params.w1.ravel().tolist(),
        b1=params.b1.tolist(),
        w2=params.w2.ravel().tolist(),
        b2=params.b2.tolist(),
    )
    out.write_text(ckpt.model_dump_json(), encoding="utf-8")
    return out


def load_checkpoint(path: str | Path) -> MlpParams:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    src = Path(path)
    if not src.is_file():
        raise DataError(f"checkpoint not found: {src}")
    try:
        ckpt = Checkpoint.model_validate_json(src.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DataError(f"malformed checkpoint {src}: {e}") from e
    if ckpt.version != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {ckpt.version!r} in {src}")
    n, k, hidden = ckpt.input_len, ckpt.horizon, ckpt.hidden
    sizes = {"w1": hidden * n, "b1": hidden, "w2": k * hidden, "b2": k}
    for name, size in sizes.items():
        if len(getattr(ckpt, name)) != size:
            raise DataError(f"checkpoint block {name} has wrong size in {src}")
    try:
        params = MlpParams(
            w1=np.asarray(ckpt.w1).reshape(hidden, n),
            b1=np.asarray(ckpt.b1),
            w2=np.asarray(ckpt.w2).reshape(k, hidden),
            b2=np.asarray(ckpt.b2),
        )
    except UsageError as e:
        raise DataError(f"invalid checkpoint {src}: {e}") from e
    if not params.is_finite:
        raise DataError(f"checkpoint {src} holds non-finite values")
    return params

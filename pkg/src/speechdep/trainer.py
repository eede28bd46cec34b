"""Mini-batch training with Adadelta and a geometric learning-rate decay.

Adadelta keeps running averages of squared gradients and squared updates.
Per step, with decay rho and stabiliser eps:

    eg2   <- rho*eg2 + (1-rho)*g^2
    delta  = -g * sqrt(edx2 + eps) / sqrt(eg2 + eps)   (edx2 from the prior step)
    edx2  <- rho*edx2 + (1-rho)*delta^2
    theta <- theta + lr*delta

The global learning rate decays geometrically from lr_start to lr_end across
epochs. Shuffling and initialisation are fully seeded, so a rerun with the
same config is bitwise identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import (
    NetworkConfig,
    NetworkParams,
    backward_batch,
    batch_loss,
    forward_batch,
    init_params,
    map_params,
    zeros_like_params,
)


class TrainingDivergedError(RuntimeError):
    """Raised when a batch loss stops being finite."""


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 80
    lr_start: float = 1.0
    lr_end: float = 0.01
    rho: float = 0.95
    eps: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not 0.0 <= self.lr_end <= self.lr_start:
            raise ValueError("need 0 <= lr_end <= lr_start")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must be in [0, 1)")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")


@dataclass
class AdadeltaState:
    eg2: NetworkParams
    edx2: NetworkParams

    @classmethod
    def zeros(cls, params: NetworkParams) -> "AdadeltaState":
        return cls(zeros_like_params(params), zeros_like_params(params))


@dataclass
class TrainHistory:
    lr: list[float] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)


def lr_schedule(cfg: TrainConfig, epoch: int) -> float:
    """Learning rate for a zero-based epoch index, geometric in the epoch."""
    if not 0 <= epoch < cfg.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {cfg.epochs})")
    if cfg.epochs == 1 or cfg.lr_start == 0.0:
        return cfg.lr_start
    ratio = cfg.lr_end / cfg.lr_start
    return cfg.lr_start * ratio ** (epoch / (cfg.epochs - 1))


def adadelta_step(
    params: NetworkParams, grads: NetworkParams, state: AdadeltaState, lr: float, rho: float, eps: float
) -> tuple[NetworkParams, AdadeltaState]:
    """One functional Adadelta update; inputs are never mutated."""
    eg2 = map_params(lambda e, g: rho * e + (1.0 - rho) * g * g, state.eg2, grads)
    delta = map_params(
        lambda g, e_new, d_old: -g * np.sqrt(d_old + eps) / np.sqrt(e_new + eps),
        grads,
        eg2,
        state.edx2,
    )
    edx2 = map_params(lambda d_old, d: rho * d_old + (1.0 - rho) * d * d, state.edx2, delta)
    new_params = map_params(lambda p, d: p + lr * d, params, delta)
    return new_params, AdadeltaState(eg2, edx2)


def _stack(features) -> tuple[np.ndarray, np.ndarray]:
    xs = np.stack([np.asarray(f.values, dtype=np.float64) for f in features])
    ys = np.asarray([f.label for f in features], dtype=np.float64)
    return xs, ys


def evaluate_loss(params: NetworkParams, cfg: NetworkConfig, xs, ys, batch_size: int = 256):
    """(mean BCE, accuracy at threshold 0.5) over a feature set."""
    losses = []
    correct = 0
    for lo in range(0, xs.shape[0], batch_size):
        chunk_x = xs[lo : lo + batch_size]
        chunk_y = ys[lo : lo + batch_size]
        probs = forward_batch(params, chunk_x, cfg).probs
        losses.append(batch_loss(probs, chunk_y) * chunk_x.shape[0])
        correct += int(np.sum((probs >= 0.5).astype(np.int64) == chunk_y.astype(np.int64)))
    n = xs.shape[0]
    return sum(losses) / n, correct / n


def train(
    features,
    net_cfg: NetworkConfig,
    cfg: TrainConfig,
    init_seed: int | None = None,
    val_features=None,
) -> tuple[NetworkParams, TrainHistory]:
    """Train one network on a list of labelled feature matrices.

    init_seed defaults to cfg.seed; the shuffle order always derives from
    cfg.seed alone so ensemble members can share it while differing in
    initialisation.
    """
    if not features:
        raise ValueError("no training samples")
    xs, ys = _stack(features)
    if xs.shape[1:] != (net_cfg.freq_bins, net_cfg.time_steps):
        raise ValueError(f"feature shape {xs.shape[1:]} does not match network config")
    val = _stack(val_features) if val_features else None

    params = init_params(net_cfg, seed=cfg.seed if init_seed is None else init_seed)
    state = AdadeltaState.zeros(params)
    order_rng = np.random.default_rng(cfg.seed)
    history = TrainHistory()

    n = xs.shape[0]
    for epoch in range(cfg.epochs):
        lr = lr_schedule(cfg, epoch)
        order = order_rng.permutation(n)
        epoch_loss = 0.0
        for batch_index, lo in enumerate(range(0, n, cfg.batch_size)):
            take = order[lo : lo + cfg.batch_size]
            bx, by = xs[take], ys[take]
            cache = forward_batch(params, bx, net_cfg)
            loss = batch_loss(cache.probs, by)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batch_index}"
                )
            grads = backward_batch(params, cache, bx, by, net_cfg)
            params, state = adadelta_step(params, grads, state, lr, cfg.rho, cfg.eps)
            epoch_loss += loss * bx.shape[0]

        history.lr.append(lr)
        history.train_loss.append(epoch_loss / n)
        if val is not None:
            val_loss, val_acc = evaluate_loss(params, net_cfg, *val)
            history.val_loss.append(val_loss)
            history.val_acc.append(val_acc)
        else:
            history.val_loss.append(float("nan"))
            history.val_acc.append(float("nan"))

    return params, history


def train_ensemble(
    features,
    net_cfg: NetworkConfig,
    cfg: TrainConfig,
    machines: int,
    val_features=None,
) -> tuple[list[NetworkParams], list[TrainHistory]]:
    """Train `machines` networks that differ only in weight initialisation.

    Machine m initialises from seed cfg.seed + m; all machines visit the
    training data in the same shuffled order.
    """
    if machines < 1:
        raise ValueError("need at least one machine")
    all_params, all_histories = [], []
    for m in range(machines):
        params, history = train(
            features, net_cfg, cfg, init_seed=cfg.seed + m, val_features=val_features
        )
        all_params.append(params)
        all_histories.append(history)
    return all_params, all_histories


def write_history_csv(path, history: TrainHistory) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr", "train_loss", "val_loss", "val_acc"])
        for epoch, row in enumerate(
            zip(history.lr, history.train_loss, history.val_loss, history.val_acc)
        ):
            writer.writerow([epoch, *(format(v, ".10g") for v in row)])

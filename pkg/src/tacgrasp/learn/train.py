"""Training loop: Adam + plateau decay + early stopping with best-epoch
restore, epoch-level logging, and deterministic shuffling/augmentation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError, NumericError, TrainingError
from .augment import AugmentConfig, augment_sequence
from .network import Network
from .optim import Adam, EarlyStopping, PlateauScheduler


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    dropout_rate: float = 0.5
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    plateau_patience: int = 5
    plateau_factor: float = 0.25
    early_stop_patience: int = 15
    min_delta: float = 1e-4
    weight_init_std: float = 0.01
    max_epochs: int = 60
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.learning_rate < 1.0:
            raise InvalidInputError("learning_rate must be in (0,1)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidInputError("dropout_rate must be in [0,1)")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise InvalidInputError("batch_size and max_epochs must be >= 1")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise InvalidInputError("patience values must be positive")

    def to_text(self) -> str:
        pairs = [(k, getattr(self, k)) for k in self.__dataclass_fields__]
        return "".join(f"{k}={v!r}\n" for k, v in pairs)


def sequences_to_tensor(seqs: np.ndarray) -> np.ndarray:
    """uint8 (n, frames, h, w) -> float32 (n, frames, h, w, 1) in [0, 1]."""
    seqs = np.asarray(seqs)
    if seqs.ndim != 4:
        raise InvalidInputError(f"expected (n, frames, h, w), got {seqs.shape}")
    return (seqs.astype(np.float32) / 255.0)[..., None]


def predict_batch(network: Network, sequences: np.ndarray,
                  batch_size: int = 64) -> np.ndarray:
    """Per-sequence class probabilities in eval mode."""
    x = sequences_to_tensor(sequences) if sequences.ndim == 4 else sequences
    probs = [
        network.forward(x[i : i + batch_size], training=False)
        for i in range(0, x.shape[0], batch_size)
    ]
    return np.concatenate(probs, axis=0)


def mean_prediction(probs: np.ndarray) -> int:
    """Class decision for one grasp: argmax of the mean probability vector
    over its sequences (ties go to the lower class index)."""
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise InvalidInputError("need a non-empty (n, classes) matrix")
    return int(np.argmax(probs.mean(axis=0)))


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    lr: float


def _evaluate(network, x_val, labels, batch_size):
    probs = predict_batch(network, x_val, batch_size)
    picked = probs[np.arange(labels.shape[0]), labels]
    loss = float(-np.log(np.maximum(picked, 1e-12)).mean())
    acc = float((probs.argmax(axis=1) == labels).mean())
    return loss, acc


def fit(
    network: Network,
    train_seqs: np.ndarray,
    train_labels: np.ndarray,
    val_seqs: np.ndarray,
    val_labels: np.ndarray,
    config: TrainConfig,
    augment_cfg: AugmentConfig | None = None,
    log_cb=None,
):
    """Train ``network`` in place; returns the per-epoch history.

    Shuffling, dropout and augmentation are all driven by generators
    derived from ``config.seed``, so a rerun reproduces the exact same
    trajectory.  The parameters of the best validation epoch are restored
    at the end (whether stopping early or exhausting max_epochs).
    """
    train_labels = np.asarray(train_labels, dtype=np.int64)
    val_labels = np.asarray(val_labels, dtype=np.int64)
    if train_seqs.shape[0] != train_labels.shape[0]:
        raise InvalidInputError("train sequences/labels length mismatch")
    if val_seqs.shape[0] != val_labels.shape[0]:
        raise InvalidInputError("val sequences/labels length mismatch")

    optimizer = Adam(network.params(), config.learning_rate,
                     config.beta1, config.beta2, config.eps)
    plateau = PlateauScheduler(config.learning_rate, config.plateau_factor,
                               config.plateau_patience, config.min_delta)
    stopper = EarlyStopping(config.early_stop_patience, config.min_delta)
    network.seed_dropout(config.seed ^ 0x5EED)

    x_val = sequences_to_tensor(val_seqs)
    n = train_seqs.shape[0]
    shuffle_rng = np.random.default_rng(config.seed)
    aug_root = np.random.SeedSequence(config.seed)

    history: list[EpochStats] = []
    best_snapshot = network.snapshot()
    try:
        for epoch in range(config.max_epochs):
            order = shuffle_rng.permutation(n)
            aug_seeds = aug_root.spawn(1)[0].generate_state(n) if augment_cfg \
                else None
            losses = []
            for start in range(0, n, config.batch_size):
                idx = order[start : start + config.batch_size]
                batch = train_seqs[idx]
                if augment_cfg is not None:
                    batch = np.stack([
                        augment_sequence(seq, augment_cfg,
                                         int(aug_seeds[i]) + epoch)
                        for seq, i in zip(batch, idx)
                    ])
                x = sequences_to_tensor(batch)
                loss, _ = network.loss_and_grads(x, train_labels[idx])
                optimizer.step(network.grads())
                losses.append(loss)

            train_loss = float(np.mean(losses))
            val_loss, val_acc = _evaluate(network, x_val, val_labels,
                                          config.batch_size)
            optimizer.lr = plateau.step(val_loss)
            stop = stopper.step(val_loss)
            if stopper.improved:
                best_snapshot = network.snapshot()
            history.append(EpochStats(epoch, train_loss, val_loss, val_acc,
                                      optimizer.lr))
            if log_cb is not None:
                log_cb(history[-1])
            if stop:
                break
    except NumericError as err:
        trace = [(h.epoch, h.train_loss, h.val_loss) for h in history]
        raise TrainingError(f"training diverged: {err}", trace) from err

    network.restore(best_snapshot)
    return history

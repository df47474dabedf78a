"""Mini-batch training loop and batch inference."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .loss import weighted_cross_entropy
from .model import N_CLASSES, Model
from .optim import Adam


class TrainingDiverged(RuntimeError):
    """Raised when the loss turns non-finite; message names epoch and batch."""


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    class_weights: np.ndarray | None = None  # None = uniform

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning rate must be > 0, got {self.learning_rate}")


@dataclass
class EpochStats:
    loss: float
    weighted_accuracy: float  # percent, samples weighted by their class weight


def train(model: Model, x: np.ndarray, y: np.ndarray, config: TrainConfig,
          verbose: bool = False) -> list[EpochStats]:
    """Shuffled mini-batch training; deterministic for a fixed config seed.

    One generator seeded with ``config.seed`` drives both the per-epoch
    shuffles and the dropout masks, in a fixed consumption order.
    """
    x = np.asarray(x, dtype=model.dtype)
    y = np.asarray(y, dtype=np.int64)
    n = x.shape[0]
    if n == 0:
        raise ValueError("training set is empty")
    weights = (np.ones(N_CLASSES) if config.class_weights is None
               else np.asarray(config.class_weights, dtype=np.float64))

    rng = np.random.default_rng(config.seed)
    model.set_dropout_rng(rng)
    optimizer = Adam(model.parameter_arrays(), config.learning_rate,
                     config.beta1, config.beta2, config.epsilon)

    history: list[EpochStats] = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        w_correct = 0.0
        w_total = 0.0
        for batch_no, start in enumerate(range(0, n, config.batch_size), start=1):
            idx = order[start:start + config.batch_size]
            xb, yb = x[idx], y[idx]
            logits = model.forward_logits(xb, train=True)
            loss, dlogits = weighted_cross_entropy(logits, yb, weights)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}")
            model.backward_logits(dlogits)
            optimizer.step(model.gradient_arrays())

            loss_sum += loss * idx.size
            batch_w = weights[yb]
            w_correct += float((batch_w * (logits.argmax(axis=-1) == yb)).sum())
            w_total += float(batch_w.sum())
        stats = EpochStats(loss_sum / n, 100.0 * w_correct / w_total)
        history.append(stats)
        if verbose:
            print(f"epoch {epoch:3d}  loss {stats.loss:.4f}  "
                  f"weighted acc {stats.weighted_accuracy:.2f}%")
    return history


def predict(model: Model, segments: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Class probabilities [N, 9] with dropout off; rows sum to 1."""
    return model.predict(segments, batch_size=batch_size)

"""Class-weighted categorical cross-entropy, fused with softmax for training."""
from __future__ import annotations

import warnings

import numpy as np

PROB_FLOOR = 1e-12


def softmax(z: np.ndarray) -> np.ndarray:
    """Stable row-wise softmax; accepts [K] or [B, K]."""
    z = np.asarray(z)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def weighted_cross_entropy(logits: np.ndarray, labels: np.ndarray,
                           weights: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean of w[y_b] * -log softmax(logits)[b, y_b]; returns (loss, dL/dlogits).

    Probabilities at the true label are floored at 1e-12 before the log so a
    saturated wrong prediction yields a large finite loss, not an inf.
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    B = logits.shape[0]
    if labels.shape != (B,):
        raise ValueError(f"expected {B} labels, got shape {labels.shape}")

    probs = softmax(logits)
    p_true = probs[np.arange(B), labels]
    if np.any(p_true < PROB_FLOOR):
        warnings.warn("clamping true-class probabilities below 1e-12", RuntimeWarning)
    sample_w = weights[labels]
    loss = float(np.mean(sample_w * -np.log(np.maximum(p_true, PROB_FLOOR))))

    dlogits = probs.astype(np.float64)
    dlogits[np.arange(B), labels] -= 1.0
    dlogits *= sample_w[:, None] / B
    return loss, dlogits.astype(logits.dtype)

"""The classifier: three conv blocks, an LSTM, and a dense softmax head."""
from __future__ import annotations

import numpy as np

from .layers import LSTM, Conv1D, Dense, Dropout, Layer, MaxPool1D, ReLU, Softmax
from .loss import softmax as _softmax

INPUT_LENGTH = 500
N_CLASSES = 9

# conv/pool feature-length chain for a 500-sample input, asserted at build
EXPECTED_FEATURE_LENGTHS = (451, 216, 207, 99, 95, 46)
EXPECTED_PARAM_COUNT = 34361


def canonical_layers() -> list[tuple[str, dict]]:
    """Layer kinds and hyperparameters of the reference architecture, in order."""
    return [
        ("conv1d", {"in_channels": 1, "out_channels": 64, "kernel": 50}),
        ("relu", {}),
        ("maxpool1d", {"pool": 20, "stride": 2}),
        ("dropout", {"rate": 0.1}),
        ("conv1d", {"in_channels": 64, "out_channels": 32, "kernel": 10}),
        ("relu", {}),
        ("maxpool1d", {"pool": 10, "stride": 2}),
        ("dropout", {"rate": 0.1}),
        ("conv1d", {"in_channels": 32, "out_channels": 16, "kernel": 5}),
        ("relu", {}),
        ("maxpool1d", {"pool": 5, "stride": 2}),
        ("dropout", {"rate": 0.1}),
        ("lstm", {"in_features": 16, "hidden": 32}),
        ("dense", {"in_features": 32, "out_features": 32, "relu": True}),
        ("dropout", {"rate": 0.1}),
        ("dense", {"in_features": 32, "out_features": 16, "relu": True}),
        ("dense", {"in_features": 16, "out_features": N_CLASSES, "relu": False}),
        ("softmax", {}),
    ]


def make_layer(kind: str, hyper: dict, rng: np.random.Generator | None = None,
               dtype=np.float32) -> Layer:
    if kind == "conv1d":
        return Conv1D(rng=rng, dtype=dtype, **hyper)
    if kind == "relu":
        return ReLU()
    if kind == "maxpool1d":
        return MaxPool1D(**hyper)
    if kind == "dropout":
        return Dropout(**hyper)
    if kind == "lstm":
        return LSTM(rng=rng, dtype=dtype, **hyper)
    if kind == "dense":
        return Dense(rng=rng, dtype=dtype, **hyper)
    if kind == "softmax":
        return Softmax()
    raise ValueError(f"unknown layer kind {kind!r}")


def layer_hyper(layer: Layer) -> dict:
    """Hyperparameters needed to reconstruct ``layer`` (inverse of make_layer)."""
    if isinstance(layer, Conv1D):
        return {"in_channels": layer.in_channels, "out_channels": layer.out_channels,
                "kernel": layer.kernel}
    if isinstance(layer, MaxPool1D):
        return {"pool": layer.pool, "stride": layer.stride}
    if isinstance(layer, Dropout):
        return {"rate": layer.rate}
    if isinstance(layer, LSTM):
        return {"in_features": layer.in_features, "hidden": layer.hidden}
    if isinstance(layer, Dense):
        return {"in_features": layer.in_features, "out_features": layer.out_features,
                "relu": layer.relu}
    return {}


class Model:
    """Ordered layer stack ending in Softmax; input is [B, INPUT_LENGTH]."""

    def __init__(self, layers: list[Layer], input_length: int = INPUT_LENGTH):
        if not layers or not isinstance(layers[-1], Softmax):
            raise ValueError("model must end with a Softmax layer")
        self.layers = layers
        self.input_length = input_length

    @property
    def dtype(self):
        for layer in self.layers:
            if layer.params:
                return next(iter(layer.params.values())).dtype
        return np.dtype(np.float32)

    def feature_lengths(self) -> list[int]:
        """Feature-axis length after each conv and pool layer."""
        length = self.input_length
        chain = []
        for layer in self.layers:
            if isinstance(layer, (Conv1D, MaxPool1D)):
                length = layer.out_length(length)
                chain.append(length)
        return chain

    def parameter_count(self) -> int:
        return sum(layer.param_count() for layer in self.layers)

    def parameter_arrays(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params.values()]

    def gradient_arrays(self) -> list[np.ndarray]:
        grads = []
        for layer in self.layers:
            for name in layer.params:
                grads.append(layer.grads[name])
        return grads

    def set_dropout_rng(self, rng: np.random.Generator) -> None:
        for layer in self.layers:
            if isinstance(layer, Dropout):
                layer.rng = rng

    def _to_batch(self, segments: np.ndarray) -> np.ndarray:
        x = np.asarray(segments, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_length:
            raise ValueError(
                f"expected segments shaped [N, {self.input_length}], got {x.shape}")
        return x[:, None, :]  # single input channel

    def forward_logits(self, segments: np.ndarray, train: bool = False) -> np.ndarray:
        """Run every layer but the final softmax."""
        h = self._to_batch(segments)
        for layer in self.layers[:-1]:
            h = layer.forward(h, train=train)
        return h

    def backward_logits(self, dlogits: np.ndarray) -> None:
        d = dlogits
        for layer in reversed(self.layers[:-1]):
            d = layer.backward(d)

    def predict(self, segments: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Class probabilities [N, 9]; dropout off."""
        x = np.asarray(segments, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        outputs = []
        for start in range(0, x.shape[0], batch_size):
            logits = self.forward_logits(x[start:start + batch_size], train=False)
            outputs.append(_softmax(logits))
        return np.concatenate(outputs, axis=0)


def build_model(seed: int = 0, dtype=np.float32) -> Model:
    """Construct the reference stack with one seeded initializer.

    Asserts the conv/pool length chain 500 -> 451, 216, 207, 99, 95, 46 and
    the 34,361 trainable-parameter budget.
    """
    rng = np.random.default_rng(seed)
    layers = [make_layer(kind, hyper, rng=rng, dtype=dtype)
              for kind, hyper in canonical_layers()]
    model = Model(layers)
    chain = tuple(model.feature_lengths())
    if chain != EXPECTED_FEATURE_LENGTHS:
        raise AssertionError(f"feature-length chain {chain} != {EXPECTED_FEATURE_LENGTHS}")
    count = model.parameter_count()
    if count != EXPECTED_PARAM_COUNT:
        raise AssertionError(f"parameter count {count} != {EXPECTED_PARAM_COUNT}")
    return model

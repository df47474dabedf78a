"""Analytic gradients vs central finite differences at 64-bit precision."""
import numpy as np
import pytest

from gradcheck import check_layer_gradients, numerical_gradient, relative_error

from ecglite.nn import LSTM, Conv1D, Dense, MaxPool1D, ReLU
from ecglite.nn.loss import weighted_cross_entropy

TOL = 1e-4


def well_separated_pool_input(rng, shape, pool, stride):
    """Random input whose pooling windows have a clear top-2 gap (keeps the
    finite-difference perturbation from flipping the argmax)."""
    while True:
        x = rng.normal(size=shape)
        L = shape[-1]
        ok = True
        for s in range(0, L - pool + 1, stride):
            for b in range(shape[0]):
                for c in range(shape[1]):
                    window = np.sort(x[b, c, s:s + pool])
                    if window.size > 1 and window[-1] - window[-2] < 1e-3:
                        ok = False
        if ok:
            return x


def test_conv1d_gradients(rng):
    for trial in range(20):
        B = int(rng.integers(1, 3))
        C = int(rng.integers(1, 4))
        O = int(rng.integers(1, 4))
        K = int(rng.integers(1, 6))
        L = K + int(rng.integers(0, 8))
        layer = Conv1D(C, O, K, rng=rng, dtype=np.float64)
        x = rng.normal(size=(B, C, L))
        assert check_layer_gradients(layer, x, rng) < TOL


def test_maxpool_gradients(rng):
    for trial in range(20):
        B = int(rng.integers(1, 3))
        C = int(rng.integers(1, 3))
        pool = int(rng.integers(2, 5))
        stride = int(rng.integers(1, 3))
        L = pool + int(rng.integers(0, 8))
        layer = MaxPool1D(pool, stride)
        x = well_separated_pool_input(rng, (B, C, L), pool, stride)
        assert check_layer_gradients(layer, x, rng) < TOL


def test_relu_gradients(rng):
    layer = ReLU()
    for trial in range(20):
        x = rng.normal(size=(2, 3, int(rng.integers(2, 10))))
        x = np.where(np.abs(x) < 1e-3, x + 0.1, x)  # stay away from the kink
        assert check_layer_gradients(layer, x, rng) < TOL


def test_dense_gradients(rng):
    for trial in range(20):
        fin = int(rng.integers(1, 6))
        fout = int(rng.integers(1, 6))
        layer = Dense(fin, fout, relu=bool(trial % 2), rng=rng, dtype=np.float64)
        x = rng.normal(size=(int(rng.integers(1, 4)), fin))
        if layer.relu:  # keep pre-activations away from the kink
            z = x @ layer.params["w"].T + layer.params["b"]
            if np.any(np.abs(z) < 1e-3):
                layer.params["b"] += 0.01
        assert check_layer_gradients(layer, x, rng) < TOL


def test_lstm_gradients(rng):
    for trial in range(20):
        F = int(rng.integers(1, 4))
        H = int(rng.integers(1, 5))
        T = int(rng.integers(1, 6))
        layer = LSTM(F, H, rng=rng, dtype=np.float64)
        x = rng.normal(size=(int(rng.integers(1, 3)), F, T))
        assert check_layer_gradients(layer, x, rng) < TOL


def test_softmax_cross_entropy_gradients(rng):
    for trial in range(20):
        B = int(rng.integers(1, 5))
        logits = rng.normal(size=(B, 9))
        labels = rng.integers(0, 9, size=B)
        weights = rng.uniform(0.2, 3.0, size=9)
        _, analytic = weighted_cross_entropy(logits, labels, weights)

        def objective():
            return weighted_cross_entropy(logits, labels, weights)[0]

        numeric = numerical_gradient(objective, logits)
        assert relative_error(analytic, numeric) < TOL

"""Differentiable layers over numpy arrays, batch-first: [B, C, L] or [B, F]."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _kernels

_DEBUG = False


def set_debug(enabled: bool) -> None:
    """Enable finite-value assertions at layer boundaries (slow, for debugging)."""
    global _DEBUG
    _DEBUG = enabled


def _check_finite(name: str, arr: np.ndarray) -> None:
    if _DEBUG and not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values leaving {name}")


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Common surface: forward caches what backward needs; grads mirror params."""

    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def out_length(self, length: int) -> int:
        """Feature-axis length bookkeeping; identity unless overridden."""
        return length

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())


class Conv1D(Layer):
    """Valid (no padding) stride-1 cross-correlation on [B, C, L]."""

    kind = "conv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        rng = rng or np.random.default_rng()
        self.params = {
            "w": _glorot(rng, (out_channels, in_channels, kernel),
                         in_channels * kernel, out_channels * kernel, dtype),
            "b": np.zeros(out_channels, dtype=dtype),
        }
        self._cols = None
        self._x_shape = None

    def out_length(self, length: int) -> int:
        return length - self.kernel + 1

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        B, C, L = x.shape
        K = self.kernel
        if C != self.in_channels:
            raise ValueError(f"expected {self.in_channels} channels, got {C}")
        if L < K:
            raise ValueError(f"input length {L} shorter than kernel {K}")
        w, b = self.params["w"], self.params["b"]
        # im2col: [B, L_out, C*K] rows against [C*K, O] weights
        windows = sliding_window_view(x, K, axis=2)  # [B, C, L_out, K]
        cols = np.ascontiguousarray(windows.transpose(0, 2, 1, 3)).reshape(B, -1, C * K)
        out = cols @ w.reshape(self.out_channels, C * K).T + b
        self._cols = cols
        self._x_shape = x.shape
        out = np.ascontiguousarray(out.transpose(0, 2, 1))
        _check_finite(self.kind, out)
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        B, C, L = self._x_shape
        K, O = self.kernel, self.out_channels
        L_out = L - K + 1
        w = self.params["w"]
        dy_rows = np.ascontiguousarray(dy.transpose(0, 2, 1)).reshape(B * L_out, O)
        cols = self._cols.reshape(B * L_out, C * K)
        self.grads["w"] = (dy_rows.T @ cols).reshape(O, C, K)
        self.grads["b"] = dy_rows.sum(axis=0)
        dcols = (dy_rows @ w.reshape(O, C * K)).reshape(B, L_out, C, K)
        dx = np.zeros(self._x_shape, dtype=dy.dtype)
        _kernels.col2im(dcols, dx)
        return dx


class ReLU(Layer):
    kind = "relu"

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, np.zeros((), dtype=x.dtype))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return np.where(self._mask, dy, np.zeros((), dtype=dy.dtype))


class MaxPool1D(Layer):
    """Max pooling on [B, C, L]; gradient goes to the first argmax on ties."""

    kind = "maxpool1d"

    def __init__(self, pool: int, stride: int):
        super().__init__()
        self.pool = pool
        self.stride = stride

    def out_length(self, length: int) -> int:
        return (length - self.pool) // self.stride + 1

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        B, C, L = x.shape
        if L < self.pool:
            raise ValueError(f"input length {L} shorter than pool {self.pool}")
        L_out = self.out_length(L)
        out = np.empty((B, C, L_out), dtype=x.dtype)
        argmax = np.empty((B, C, L_out), dtype=np.int64)
        _kernels.maxpool_forward(np.ascontiguousarray(x), self.pool, self.stride,
                                 out, argmax)
        self._argmax = argmax
        self._x_shape = x.shape
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx = np.zeros(self._x_shape, dtype=dy.dtype)
        _kernels.maxpool_backward(np.ascontiguousarray(dy), self._argmax,
                                  self.stride, dx)
        return dx


class Dropout(Layer):
    """Inverted dropout: identity at inference, kept units scaled by 1/(1-rate)."""

    kind = "dropout"

    def __init__(self, rate: float, rng: np.random.Generator | None = None):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng or np.random.default_rng()
        self._mask = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        keep = np.asarray(1.0 - self.rate, dtype=x.dtype)
        draw_dtype = x.dtype if x.dtype in (np.float32, np.float64) else np.float64
        draws = self.rng.random(x.shape, dtype=draw_dtype)
        self._mask = (draws >= self.rate).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return dy
        return dy * self._mask


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class LSTM(Layer):
    """Single LSTM returning the last hidden state.

    Input is channel-first [B, F, T] to chain directly after the conv stack;
    the feature axis becomes the per-step input. Gate blocks are ordered
    i, f, o, g inside the fused [4H, .] matrices. Exact BPTT over all steps.
    """

    kind = "lstm"

    def __init__(self, in_features: int, hidden: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        super().__init__()
        self.in_features = in_features
        self.hidden = hidden
        rng = rng or np.random.default_rng()
        H, F = hidden, in_features
        w = np.concatenate([_glorot(rng, (H, F), F, H, dtype) for _ in range(4)])
        u = np.concatenate([_glorot(rng, (H, H), H, H, dtype) for _ in range(4)])
        b = np.zeros(4 * H, dtype=dtype)
        b[H:2 * H] = 1.0  # forget-gate bias starts open
        self.params = {"w": w, "u": u, "b": b}

    def out_length(self, length: int) -> int:
        return 1  # sequence collapses to the final state

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        B, F, T = x.shape
        if F != self.in_features:
            raise ValueError(f"expected {self.in_features} features, got {F}")
        H = self.hidden
        w, u, b = self.params["w"], self.params["u"], self.params["b"]
        xs = np.ascontiguousarray(x.transpose(2, 0, 1))  # [T, B, F]
        h = np.zeros((B, H), dtype=x.dtype)
        c = np.zeros((B, H), dtype=x.dtype)
        gates = np.empty((T, B, 4 * H), dtype=x.dtype)
        cells = np.empty((T, B, H), dtype=x.dtype)
        tanh_c = np.empty((T, B, H), dtype=x.dtype)
        h_prev = np.empty((T, B, H), dtype=x.dtype)
        c_prev = np.empty((T, B, H), dtype=x.dtype)
        for t in range(T):
            h_prev[t], c_prev[t] = h, c
            a = xs[t] @ w.T + h @ u.T + b
            i = _sigmoid(a[:, :H])
            f = _sigmoid(a[:, H:2 * H])
            o = _sigmoid(a[:, 2 * H:3 * H])
            g = np.tanh(a[:, 3 * H:])
            c = f * c + i * g
            h = o * np.tanh(c)
            gates[t, :, :H], gates[t, :, H:2 * H] = i, f
            gates[t, :, 2 * H:3 * H], gates[t, :, 3 * H:] = o, g
            cells[t] = c
            tanh_c[t] = np.tanh(c)
        self._cache = (xs, gates, cells, tanh_c, h_prev, c_prev)
        _check_finite(self.kind, h)
        return h

    def backward(self, dh_last: np.ndarray) -> np.ndarray:
        xs, gates, cells, tanh_c, h_prev, c_prev = self._cache
        T, B, F = xs.shape
        H = self.hidden
        w, u = self.params["w"], self.params["u"]
        dw = np.zeros_like(w, dtype=np.float64)
        du = np.zeros_like(u, dtype=np.float64)
        db = np.zeros(4 * H, dtype=np.float64)
        dxs = np.empty_like(xs)
        dh = dh_last
        dc = np.zeros((B, H), dtype=dh_last.dtype)
        for t in range(T - 1, -1, -1):
            i, f = gates[t, :, :H], gates[t, :, H:2 * H]
            o, g = gates[t, :, 2 * H:3 * H], gates[t, :, 3 * H:]
            do = dh * tanh_c[t]
            dc = dc + dh * o * (1.0 - tanh_c[t] ** 2)
            da = np.concatenate([
                dc * g * i * (1.0 - i),
                dc * c_prev[t] * f * (1.0 - f),
                do * o * (1.0 - o),
                dc * i * (1.0 - g ** 2),
            ], axis=1)
            dw += da.T @ xs[t]
            du += da.T @ h_prev[t]
            db += da.sum(axis=0)
            dxs[t] = da @ w
            dh = da @ u
            dc = dc * f
        self.grads = {
            "w": dw.astype(w.dtype),
            "u": du.astype(u.dtype),
            "b": db.astype(w.dtype),
        }
        return np.ascontiguousarray(dxs.transpose(1, 2, 0))


class Dense(Layer):
    """Affine layer on [B, F_in], optionally with a fused ReLU."""

    kind = "dense"

    def __init__(self, in_features: int, out_features: int, relu: bool = False,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.relu = relu
        rng = rng or np.random.default_rng()
        self.params = {
            "w": _glorot(rng, (out_features, in_features), in_features, out_features, dtype),
            "b": np.zeros(out_features, dtype=dtype),
        }

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.shape[-1] != self.in_features:
            raise ValueError(f"expected {self.in_features} features, got {x.shape[-1]}")
        z = x @ self.params["w"].T + self.params["b"]
        self._x = x
        if self.relu:
            self._mask = z > 0
            z = np.where(self._mask, z, np.zeros((), dtype=z.dtype))
        _check_finite(self.kind, z)
        return z

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self.relu:
            dy = np.where(self._mask, dy, np.zeros((), dtype=dy.dtype))
        self.grads["w"] = dy.T @ self._x
        self.grads["b"] = dy.sum(axis=0)
        return dy @ self.params["w"]


class Softmax(Layer):
    """Row-wise, numerically stabilized softmax on [B, K]."""

    kind = "softmax"

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        self._p = e / e.sum(axis=-1, keepdims=True)
        return self._p

    def backward(self, dy: np.ndarray) -> np.ndarray:
        p = self._p
        return p * (dy - (dy * p).sum(axis=-1, keepdims=True))

import numpy as np
import pytest
from numpy.lib.stride_tricks import sliding_window_view

from ecglite.nn import LSTM, Adam, Conv1D, Dense, Dropout, MaxPool1D, ReLU, Softmax
from ecglite.nn import softmax, weighted_cross_entropy
from ecglite.nn import _kernels


def make_conv(in_c, out_c, k, w=None, b=None):
    conv = Conv1D(in_c, out_c, k, rng=np.random.default_rng(0), dtype=np.float64)
    if w is not None:
        conv.params["w"] = np.asarray(w, dtype=np.float64).reshape(out_c, in_c, k)
    if b is not None:
        conv.params["b"] = np.asarray(b, dtype=np.float64).reshape(out_c)
    return conv


class TestConv1D:
    def test_hand_cross_correlation(self):
        conv = make_conv(1, 1, 2, w=[1.0, 1.0], b=[0.0])
        out = conv.forward(np.array([[[1.0, 2, 3, 4, 5]]]))
        assert out[0, 0].tolist() == [3, 5, 7, 9]

    def test_zero_weights_give_bias(self):
        conv = make_conv(1, 1, 3, w=[0.0, 0, 0], b=[4.5])
        out = conv.forward(np.ones((1, 1, 8)))
        assert np.all(out == 4.5)

    def test_kernel_one_scales(self):
        conv = make_conv(1, 1, 1, w=[2.0], b=[0.0])
        x = np.array([[[1.0, -2, 3]]])
        assert np.array_equal(conv.forward(x), 2 * x)

    def test_too_short_input(self):
        conv = make_conv(1, 4, 50)
        with pytest.raises(ValueError, match="5.*50"):
            conv.forward(np.zeros((1, 1, 5)))

    def test_channel_mismatch(self):
        conv = make_conv(2, 4, 3)
        with pytest.raises(ValueError, match="channels"):
            conv.forward(np.zeros((1, 1, 10)))

    def test_output_length(self):
        conv = make_conv(1, 64, 50)
        assert conv.forward(np.zeros((2, 1, 500))).shape == (2, 64, 451)
        assert conv.out_length(500) == 451


class TestMaxPool1D:
    def test_hand_max(self):
        pool = MaxPool1D(2, 2)
        out = pool.forward(np.array([[[1.0, 3, 2, 5]]]))
        assert out[0, 0].tolist() == [3, 5]

    def test_length_formula(self):
        pool = MaxPool1D(20, 2)
        assert pool.forward(np.zeros((1, 1, 451))).shape == (1, 1, 216)
        assert pool.out_length(451) == 216

    def test_constant_input(self):
        pool = MaxPool1D(5, 2)
        out = pool.forward(np.full((1, 2, 11), 3.25))
        assert np.all(out == 3.25)

    def test_too_short_input(self):
        with pytest.raises(ValueError, match="shorter than pool"):
            MaxPool1D(10, 2).forward(np.zeros((1, 1, 5)))

    def test_tie_routes_gradient_to_first(self):
        pool = MaxPool1D(2, 2)
        pool.forward(np.array([[[7.0, 7.0]]]))
        dx = pool.backward(np.array([[[1.0]]]))
        assert dx[0, 0].tolist() == [1.0, 0.0]

    def test_overlapping_windows_accumulate_gradient(self):
        pool = MaxPool1D(3, 1)
        x = np.array([[[0.0, 9.0, 0.0, 0.0]]])
        pool.forward(x)  # both windows pick index 1
        dx = pool.backward(np.array([[[1.0, 1.0]]]))
        assert dx[0, 0].tolist() == [0.0, 2.0, 0.0, 0.0]

    def test_matches_numpy_reference(self, rng):
        for _ in range(25):
            B, C = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            pool_k = int(rng.integers(1, 8))
            stride = int(rng.integers(1, 4))
            L = int(rng.integers(pool_k, 40))
            x = rng.normal(size=(B, C, L))
            layer = MaxPool1D(pool_k, stride)
            out = layer.forward(x)
            windows = sliding_window_view(x, pool_k, axis=2)[:, :, ::stride]
            assert np.array_equal(out, windows.max(axis=3))
            assert np.array_equal(layer._argmax, windows.argmax(axis=3))
            dy = rng.normal(size=out.shape)
            dx = layer.backward(dy)
            # reference scatter via bincount
            L_out = out.shape[2]
            pos = np.arange(L_out) * stride + layer._argmax
            base = (np.arange(B)[:, None, None] * C
                    + np.arange(C)[None, :, None]) * L
            ref = np.bincount((base + pos).ravel(), weights=dy.ravel(),
                              minlength=B * C * L).reshape(B, C, L)
            assert np.allclose(dx, ref)


class TestReLU:
    def test_examples(self):
        relu = ReLU()
        assert relu.forward(np.array([-1.0, 0.0, 2.0])).tolist() == [0, 0, 2]
        assert np.all(relu.forward(-np.ones(5)) == 0)
        x = np.arange(1.0, 5.0)
        assert np.array_equal(relu.forward(x), x)

    def test_backward_masks(self):
        relu = ReLU()
        relu.forward(np.array([-1.0, 2.0, 0.0]))
        assert relu.backward(np.ones(3)).tolist() == [0, 1, 0]


class TestDropout:
    def test_rate_zero_identity(self):
        layer = Dropout(0.0)
        x = np.arange(12.0).reshape(3, 4)
        assert layer.forward(x, train=True) is x

    def test_infer_identity(self):
        layer = Dropout(0.5)
        x = np.arange(12.0).reshape(3, 4)
        assert layer.forward(x, train=False) is x

    def test_inverted_scaling_preserves_mean(self):
        layer = Dropout(0.1, rng=np.random.default_rng(5))
        x = np.ones(1_000_000, dtype=np.float32)
        out = layer.forward(x, train=True)
        assert abs(out.mean() - 1.0) < 0.01

    def test_backward_uses_same_mask(self):
        layer = Dropout(0.4, rng=np.random.default_rng(6))
        x = np.ones((10, 10))
        out = layer.forward(x, train=True)
        grad = layer.backward(np.ones_like(x))
        assert np.array_equal(grad, out)

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            Dropout(1.0)
        with pytest.raises(ValueError):
            Dropout(-0.1)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


class TestLSTM:
    def test_zero_parameters_give_zero_state(self):
        lstm = LSTM(3, 4, rng=np.random.default_rng(0), dtype=np.float64)
        for name in lstm.params:
            lstm.params[name] = np.zeros_like(lstm.params[name])
        out = lstm.forward(np.ones((2, 3, 6)))
        assert np.array_equal(out, np.zeros((2, 4)))

    def test_single_step_matches_direct_formula(self, rng):
        F, H = 3, 4
        lstm = LSTM(F, H, rng=np.random.default_rng(1), dtype=np.float64)
        lstm.params["u"] = np.zeros_like(lstm.params["u"])
        x = rng.normal(size=(1, F, 1))
        out = lstm.forward(x)

        w, b = lstm.params["w"], lstm.params["b"]
        a = w @ x[0, :, 0] + b
        i, f = sigmoid(a[:H]), sigmoid(a[H:2 * H])
        o, g = sigmoid(a[2 * H:3 * H]), np.tanh(a[3 * H:])
        c = i * g  # c_prev is zero
        assert np.allclose(out[0], o * np.tanh(c), atol=1e-12)

    def test_matches_scalar_recurrence_oracle(self, rng):
        lstm = LSTM(1, 1, rng=np.random.default_rng(2), dtype=np.float64)
        T = 7
        x = rng.normal(size=(1, 1, T))
        x[0, 0, 1:] = 0.0  # input only at the first step; c decays through f
        out = lstm.forward(x)

        w = lstm.params["w"].ravel()
        u = lstm.params["u"].ravel()
        b = lstm.params["b"].ravel()
        h = c = 0.0
        for t in range(T):
            xt = x[0, 0, t]
            i = sigmoid(w[0] * xt + u[0] * h + b[0])
            f = sigmoid(w[1] * xt + u[1] * h + b[1])
            o = sigmoid(w[2] * xt + u[2] * h + b[2])
            g = np.tanh(w[3] * xt + u[3] * h + b[3])
            c = f * c + i * g
            h = o * np.tanh(c)
        assert np.allclose(out[0, 0], h, atol=1e-12)

    def test_forget_bias_initialized_to_one(self):
        lstm = LSTM(4, 8, rng=np.random.default_rng(3))
        b = lstm.params["b"]
        assert np.all(b[8:16] == 1.0)
        assert np.all(b[:8] == 0.0)


class TestDense:
    def test_identity(self):
        layer = Dense(3, 3, rng=np.random.default_rng(0), dtype=np.float64)
        layer.params["w"] = np.eye(3)
        layer.params["b"] = np.zeros(3)
        x = np.array([[1.0, -2.0, 3.0]])
        assert np.array_equal(layer.forward(x), x)

    def test_zero_weights_give_bias(self):
        layer = Dense(2, 2, rng=np.random.default_rng(0), dtype=np.float64)
        layer.params["w"] = np.zeros((2, 2))
        layer.params["b"] = np.array([5.0, -1.0])
        assert layer.forward(np.ones((3, 2))).tolist() == [[5, -1]] * 3

    def test_hand_product(self):
        layer = Dense(2, 1, rng=np.random.default_rng(0), dtype=np.float64)
        layer.params["w"] = np.array([[1.0, 1.0]])
        layer.params["b"] = np.zeros(1)
        assert layer.forward(np.array([[2.0, 3.0]]))[0, 0] == 5.0

    def test_relu_variant_clamps(self):
        layer = Dense(1, 1, relu=True, rng=np.random.default_rng(0), dtype=np.float64)
        layer.params["w"] = np.array([[1.0]])
        layer.params["b"] = np.zeros(1)
        assert layer.forward(np.array([[-2.0]]))[0, 0] == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="features"):
            Dense(4, 2, rng=np.random.default_rng(0)).forward(np.zeros((1, 3)))


class TestSoftmax:
    def test_uniform_on_zeros(self):
        out = softmax(np.zeros((2, 9)))
        assert np.allclose(out, 1 / 9)

    def test_shift_invariance(self, rng):
        z = rng.normal(size=(4, 9))
        assert np.allclose(softmax(z), softmax(z + 123.4), atol=1e-12)

    def test_large_logit_dominates(self):
        z = np.zeros(9)
        z[2] = 1000.0
        out = softmax(z)
        assert out[2] > 0.999999
        assert np.isfinite(out).all()

    def test_rows_sum_to_one(self, rng):
        out = softmax(rng.normal(size=(30, 9)) * 50)
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-6)

    def test_layer_backward_is_jvp(self, rng):
        layer = Softmax()
        z = rng.normal(size=(3, 5))
        p = layer.forward(z)
        dy = rng.normal(size=(3, 5))
        dz = layer.backward(dy)
        # J^T dy with J = diag(p) - p p^T, rowwise
        expected = p * (dy - (dy * p).sum(axis=1, keepdims=True))
        assert np.allclose(dz, expected)


class TestWeightedCrossEntropy:
    def test_perfect_prediction_zero_loss(self):
        logits = np.full((2, 9), -1000.0)
        logits[0, 3] = logits[1, 7] = 1000.0
        loss, _ = weighted_cross_entropy(logits, np.array([3, 7]), np.ones(9))
        assert loss < 1e-6

    def test_uniform_probs_log_nine(self):
        loss, _ = weighted_cross_entropy(np.zeros((4, 9)), np.array([0, 1, 2, 3]),
                                         np.ones(9))
        assert np.isclose(loss, np.log(9), atol=1e-9)

    def test_doubling_weights_doubles_loss(self, rng):
        logits = rng.normal(size=(6, 9))
        labels = rng.integers(0, 9, size=6)
        w = rng.uniform(0.5, 2.0, size=9)
        loss1, g1 = weighted_cross_entropy(logits, labels, w)
        loss2, g2 = weighted_cross_entropy(logits, labels, 2 * w)
        assert np.isclose(loss2, 2 * loss1)
        assert np.allclose(g2, 2 * g1, atol=1e-6)

    def test_gradient_formula(self, rng):
        logits = rng.normal(size=(5, 9))
        labels = rng.integers(0, 9, size=5)
        w = rng.uniform(0.5, 2.0, size=9)
        _, grad = weighted_cross_entropy(logits, labels, w)
        probs = softmax(logits)
        onehot = np.eye(9)[labels]
        expected = w[labels][:, None] * (probs - onehot) / 5
        assert np.allclose(grad, expected, atol=1e-7)

    def test_clamped_probability_warns_but_finite(self):
        logits = np.zeros((1, 9))
        logits[0, 0] = 1e4  # drives the true-class probability to ~0
        with pytest.warns(RuntimeWarning):
            loss, _ = weighted_cross_entropy(logits, np.array([5]), np.ones(9))
        assert np.isfinite(loss)


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        p = np.array([1.0, 2.0, 3.0])
        opt = Adam([p])
        opt.step([np.zeros(3)])
        assert p.tolist() == [1, 2, 3]

    def test_first_step_equals_learning_rate(self):
        p = np.array([1.0])
        opt = Adam([p], learning_rate=1e-3)
        opt.step([np.ones(1)])
        # bias correction makes m_hat = v_hat = 1, so the step is ~lr
        assert np.isclose(1.0 - p[0], 1e-3, rtol=1e-6)

    def test_identical_params_update_identically(self):
        a, b = np.array([0.5, -0.5]), np.array([0.5, -0.5])
        opt = Adam([a, b])
        g = np.array([0.3, -0.7])
        for _ in range(5):
            opt.step([g, g])
        assert np.array_equal(a, b)

    def test_bad_learning_rate(self):
        with pytest.raises(ValueError):
            Adam([np.ones(1)], learning_rate=0.0)

    def test_gradient_count_mismatch(self):
        opt = Adam([np.ones(1)])
        with pytest.raises(ValueError):
            opt.step([])


class TestKernelsAgainstNumpy:
    def test_col2im_matches_loop(self, rng):
        B, L_out, C, K = 3, 7, 4, 5
        L = L_out + K - 1
        dcols = rng.normal(size=(B, L_out, C, K))
        dx = np.zeros((B, C, L))
        _kernels.col2im(dcols, dx)
        ref = np.zeros_like(dx)
        for k in range(K):
            ref[:, :, k:k + L_out] += dcols[:, :, :, k].transpose(0, 2, 1)
        assert np.allclose(dx, ref)

    def test_maxpool_kernel_matches_windows(self, rng):
        x = rng.normal(size=(2, 3, 29))
        out = np.empty((2, 3, (29 - 4) // 3 + 1))
        arg = np.empty(out.shape, dtype=np.int64)
        _kernels.maxpool_forward(x, 4, 3, out, arg)
        windows = sliding_window_view(x, 4, axis=2)[:, :, ::3]
        assert np.array_equal(out, windows.max(axis=3))
        assert np.array_equal(arg, windows.argmax(axis=3))

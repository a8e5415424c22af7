import numpy as np
import pytest

from lobtrend.nncore import kernels as K


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def naive_causal_conv(x, w, b):
    """Quadruple-loop convolution oracle with explicit left zero padding."""
    B, T, N = x.shape
    S, D, _ = w.shape
    xp = np.zeros((B, T + D - 1, N))
    xp[:, D - 1:, :] = x
    out = np.zeros((B, T, S))
    for bi in range(B):
        for t in range(T):
            for s in range(S):
                acc = b[s]
                for d in range(D):
                    for n in range(N):
                        acc += w[s, d, n] * xp[bi, t + d, n]
                out[bi, t, s] = acc
    return out


def scalar_lstm_oracle(x, w_in, w_rec, bg, w_os, w_or, bo, sigmoid_cell):
    """Step-by-step per-gate recomputation of the recurrence."""
    T, B, N = x.shape
    H = w_rec.shape[0]
    h = np.zeros((T, B, H))
    h_prev = np.zeros((B, H))
    c_prev = np.zeros((B, H))
    for t in range(T):
        for bi in range(B):
            zf = x[t, bi] @ w_in[:, :H] + h_prev[bi] @ w_rec[:, :H] + bg[:H]
            zi = x[t, bi] @ w_in[:, H:2 * H] + h_prev[bi] @ w_rec[:, H:2 * H] + bg[H:2 * H]
            zg = x[t, bi] @ w_in[:, 2 * H:] + h_prev[bi] @ w_rec[:, 2 * H:] + bg[2 * H:]
            f, i, g = sigmoid(zf), sigmoid(zi), np.tanh(zg)
            c = f * c_prev[bi] + i * g
            if sigmoid_cell:
                zo = c @ w_os + h_prev[bi] @ w_or + bo
                s = sigmoid(c)
            else:
                zo = x[t, bi] @ w_os + h_prev[bi] @ w_or + bo
                s = np.tanh(c)
            h[t, bi] = sigmoid(zo) * s
            c_prev[bi] = c
        h_prev = h[t]
    return h


def lstm_params(rng, N, H, sigmoid_cell):
    w_in = rng.standard_normal((N, 3 * H)) * 0.4
    w_rec = rng.standard_normal((H, 3 * H)) * 0.3
    bg = rng.standard_normal(3 * H) * 0.1
    src = H if sigmoid_cell else N
    w_os = rng.standard_normal((src, H)) * 0.3
    w_or = rng.standard_normal((H, H)) * 0.3
    bo = rng.standard_normal(H) * 0.1
    return w_in, w_rec, bg, w_os, w_or, bo


LANES = [("numpy", K.conv1d_forward_numpy, K.conv1d_backward_numpy,
          K.lstm_forward_numpy, K.lstm_backward_numpy,
          K.dense_forward_strict_numpy)]
if K.HAVE_NUMBA:
    LANES.append(("numba", K.conv1d_forward_numba, K.conv1d_backward_numba,
                  K.lstm_forward_numba, K.lstm_backward_numba,
                  K.dense_forward_strict_numba))


@pytest.mark.parametrize("lane", LANES, ids=[l[0] for l in LANES])
def test_conv_forward_matches_quadruple_loop(lane, rng):
    _, conv_fwd, _, _, _, _ = lane
    x = rng.standard_normal((2, 15, 4))
    w = rng.standard_normal((3, 5, 4))
    b = rng.standard_normal(3)
    np.testing.assert_allclose(conv_fwd(x, w, b), naive_causal_conv(x, w, b),
                               atol=1e-10)


@pytest.mark.parametrize("lane", LANES, ids=[l[0] for l in LANES])
def test_conv_identity_kernel(lane, rng):
    _, conv_fwd, _, _, _, _ = lane
    x = np.ascontiguousarray(rng.standard_normal((2, 9, 3)))
    w = np.zeros((1, 1, 3))
    w[0, 0, 1] = 1.0       # width-1 filter picking channel 1
    out = conv_fwd(x, w, np.zeros(1))
    np.testing.assert_allclose(out[:, :, 0], x[:, :, 1], atol=0)


@pytest.mark.parametrize("lane", LANES, ids=[l[0] for l in LANES])
def test_conv_zero_input_gives_bias(lane):
    _, conv_fwd, _, _, _, _ = lane
    x = np.zeros((2, 7, 3))
    w = np.ones((4, 3, 3))
    b = np.array([1.0, -2.0, 0.5, 3.0])
    out = conv_fwd(x, w, b)
    np.testing.assert_allclose(out, np.broadcast_to(b, out.shape), atol=0)


@pytest.mark.parametrize("lane", LANES, ids=[l[0] for l in LANES])
def test_conv_causality_exact(lane, rng):
    _, conv_fwd, _, _, _, _ = lane
    x = np.ascontiguousarray(rng.standard_normal((1, 20, 3)))
    w = rng.standard_normal((2, 6, 3))
    b = rng.standard_normal(2)
    base = conv_fwd(x, w, b)
    t0 = 11
    x2 = x.copy()
    x2[:, t0 + 1:, :] += rng.standard_normal(x2[:, t0 + 1:, :].shape)
    out2 = conv_fwd(np.ascontiguousarray(x2), w, b)
    np.testing.assert_array_equal(base[:, :t0 + 1, :], out2[:, :t0 + 1, :])


@pytest.mark.parametrize("sigmoid_cell", [True, False])
@pytest.mark.parametrize("lane", LANES, ids=[l[0] for l in LANES])
def test_lstm_forward_matches_scalar_oracle(lane, sigmoid_cell, rng):
    _, _, _, lstm_fwd, _, _ = lane
    T, B, N, H = 3, 2, 4, 5
    x = np.ascontiguousarray(rng.standard_normal((T, B, N)))
    params = lstm_params(rng, N, H, sigmoid_cell)
    h, *_ = lstm_fwd(x, *params, sigmoid_cell)
    np.testing.assert_allclose(h, scalar_lstm_oracle(x, *params, sigmoid_cell),
                               atol=1e-10)


@pytest.mark.parametrize("lane", LANES, ids=[l[0] for l in LANES])
def test_lstm_zero_weights_quarter(lane):
    # sigma(0)=0.5 everywhere, cell stays 0, h = 0.5 * sigma(0) = 0.25
    _, _, _, lstm_fwd, _, _ = lane
    T, B, N, H = 4, 2, 3, 6
    x = np.ascontiguousarray(np.random.default_rng(3).standard_normal((T, B, N)))
    z = np.zeros
    h, gates, o, c, s = lstm_fwd(x, z((N, 3 * H)), z((H, 3 * H)), z(3 * H),
                                 z((H, H)), z((H, H)), z(H), True)
    np.testing.assert_array_equal(c, 0.0)
    np.testing.assert_allclose(gates[:, :, :2 * H], 0.5, atol=0)
    np.testing.assert_allclose(h, 0.25, atol=1e-15)


@pytest.mark.parametrize("lane", LANES, ids=[l[0] for l in LANES])
def test_lstm_no_input_drive_constant_h(lane, rng):
    # x = 0 and zero recurrent weights: the cell candidate stays 0 (zero
    # cell bias), so the cell never moves and h repeats every step
    _, _, _, lstm_fwd, _, _ = lane
    T, B, N, H = 5, 1, 3, 4
    x = np.zeros((T, B, N))
    w_in = rng.standard_normal((N, 3 * H))
    bg = rng.standard_normal(3 * H)
    bg[2 * H:] = 0.0
    w_os = rng.standard_normal((H, H))
    bo = rng.standard_normal(H)
    h, *_ = lstm_fwd(x, w_in, np.zeros((H, 3 * H)), bg, w_os,
                     np.zeros((H, H)), bo, True)
    assert not np.allclose(h[0], 0.25)   # gate biases actually matter
    for t in range(1, T):
        np.testing.assert_allclose(h[t], h[t - 1], atol=1e-15)


def test_lanes_agree_bitwise_tolerance(rng):
    if not K.HAVE_NUMBA:
        pytest.skip("numba lane unavailable")
    x = np.ascontiguousarray(rng.standard_normal((2, 10, 4)))
    w = rng.standard_normal((3, 4, 4))
    b = rng.standard_normal(3)
    np.testing.assert_allclose(K.conv1d_forward_numpy(x, w, b),
                               K.conv1d_forward_numba(x, w, b), rtol=1e-10)
    dy = np.ascontiguousarray(rng.standard_normal((2, 10, 3)))
    for a, bb in zip(K.conv1d_backward_numpy(x, w, dy),
                     K.conv1d_backward_numba(x, w, dy)):
        np.testing.assert_allclose(a, bb, rtol=1e-10, atol=1e-12)
    T, B, N, H = 6, 3, 4, 5
    xt = np.ascontiguousarray(rng.standard_normal((T, B, N)))
    for pc in (True, False):
        params = lstm_params(rng, N, H, pc)
        out_np = K.lstm_forward_numpy(xt, *params, pc)
        out_nb = K.lstm_forward_numba(xt, *params, pc)
        for a, bb in zip(out_np, out_nb):
            np.testing.assert_allclose(a, bb, rtol=1e-10, atol=1e-12)
        dh = np.ascontiguousarray(rng.standard_normal((T, B, H)))
        g_np = K.lstm_backward_numpy(xt, *params, pc, *out_np, dh)
        g_nb = K.lstm_backward_numba(xt, *params, pc, *out_nb, dh)
        for a, bb in zip(g_np, g_nb):
            np.testing.assert_allclose(a, bb, rtol=1e-9, atol=1e-11)


@pytest.mark.parametrize("lane", LANES, ids=[l[0] for l in LANES])
def test_dense_strict_row_independent(lane, rng):
    _, _, _, _, _, dense_fwd = lane
    x = rng.standard_normal((64, 33)).astype(np.float32)
    w = rng.standard_normal((33, 17)).astype(np.float32)
    b = rng.standard_normal(17).astype(np.float32)
    full = dense_fwd(x, w, b)
    for bs in (1, 2, 7):
        parts = np.concatenate([dense_fwd(np.ascontiguousarray(x[i:i + bs]), w, b)
                                for i in range(0, 64, bs)])
        np.testing.assert_array_equal(full, parts)

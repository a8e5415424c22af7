"""Hot numeric kernels: causal 1-d convolution, LSTM recurrence, strict dense.

Two lanes with identical signatures:

* numba lane: ``@njit`` loop kernels, the default when numba imports.
* numpy lane: vectorized fallback, selected by ``LOBTREND_DISABLE_NUMBA=1``
  (or automatically when numba is missing).

``benchmarks/bench_kernels.py`` times both lanes side by side.

Conventions: conv tensors are (B, T, C); LSTM tensors are (T, B, C) so the
per-step slices are contiguous. The strict dense kernel accumulates each
output row independently of the others, which makes batched application
bit-identical to a per-row loop (BLAS GEMM does not guarantee that).
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("LOBTREND_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _env in {"1", "true", "yes", "on"}

try:
    if NUMBA_DISABLED:
        raise ImportError("disabled via LOBTREND_DISABLE_NUMBA")
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # pragma: no cover - only hit without numba
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# causal conv1d — numpy lane
# ---------------------------------------------------------------------------

def conv1d_forward_numpy(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x (B,T,N), w (S,D,N), b (S,) -> (B,T,S); left-padded so step t sees <= t."""
    B, T, N = x.shape
    S, D, _ = w.shape
    out = np.empty((B, T, S), dtype=x.dtype)
    out[:] = b
    for d in range(D):
        shift = D - 1 - d
        tap = w[:, d, :].T.copy()          # (N, S)
        if shift == 0:
            out += x @ tap
        elif shift < T:
            out[:, shift:, :] += x[:, :T - shift, :] @ tap
    return out


def conv1d_backward_numpy(x, w, dy):
    B, T, N = x.shape
    S, D, _ = w.shape
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    db = dy.sum(axis=(0, 1))
    for d in range(D):
        shift = D - 1 - d
        if shift >= T:
            continue
        dy_part = dy[:, shift:, :]         # (B, T-shift, S)
        x_part = x[:, :T - shift, :]       # (B, T-shift, N)
        dw[:, d, :] = np.tensordot(dy_part, x_part, axes=([0, 1], [0, 1]))
        dx[:, :T - shift, :] += dy_part @ w[:, d, :]
    return dx, dw, db


# ---------------------------------------------------------------------------
# causal conv1d — numba lane
# ---------------------------------------------------------------------------

def _conv1d_forward_loops(x, w, b):
    # same tap-by-tap algorithm as the numpy lane; per-tap GEMM via np.dot
    B, T, N = x.shape
    S, D, _ = w.shape
    out = np.empty((B, T, S), dtype=x.dtype)
    for bi in range(B):
        for t in range(T):
            for s in range(S):
                out[bi, t, s] = b[s]
    for d in range(D):
        shift = D - 1 - d
        if shift >= T:
            continue
        tap = w[:, d, :].T.copy()          # (N, S)
        for bi in range(B):
            xb = x[bi]                     # C-contiguous 2-d view
            seg = np.dot(xb[:T - shift], tap)
            out[bi, shift:, :] += seg
    return out


def _conv1d_backward_loops(x, w, dy):
    B, T, N = x.shape
    S, D, _ = w.shape
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    db = np.zeros(S, dtype=x.dtype)
    for bi in range(B):
        for t in range(T):
            for s in range(S):
                db[s] += dy[bi, t, s]
    for d in range(D):
        shift = D - 1 - d
        if shift >= T:
            continue
        wd = w[:, d, :].copy()             # (S, N)
        for bi in range(B):
            dyb = dy[bi]
            xb = x[bi]
            dy_part = dyb[shift:]
            x_part = xb[:T - shift]
            dw[:, d, :] += np.dot(dy_part.T.copy(), x_part)
            dx[bi, :T - shift, :] += np.dot(dy_part, wd)
    return dx, dw, db


# ---------------------------------------------------------------------------
# LSTM — shared math, two lanes
#
# gates fused [forget, input, cell] in w_in (N,3H), w_rec (H,3H), b (3H,).
# output gate: z_o = src @ w_out_src + h_prev @ w_out_rec + b_out where
# src is the current cell state (sigmoid_cell=True) or x_t (sigmoid_cell=False).
# hidden: h = o * sigmoid(c) (sigmoid_cell) or o * tanh(c) (conventional).
# ---------------------------------------------------------------------------

def lstm_forward_numpy(x, w_in, w_rec, b, w_out_src, w_out_rec, b_out, sigmoid_cell):
    """x (T,B,N) -> h (T,B,H) plus caches (gates, o, c, s)."""
    T, B, N = x.shape
    H = w_rec.shape[0]
    zin = x.reshape(T * B, N) @ w_in + b
    zin = zin.reshape(T, B, 3 * H)
    if not sigmoid_cell:
        zo_in = (x.reshape(T * B, N) @ w_out_src + b_out).reshape(T, B, H)
    gates = np.empty((T, B, 3 * H), dtype=x.dtype)
    o_all = np.empty((T, B, H), dtype=x.dtype)
    c_all = np.empty((T, B, H), dtype=x.dtype)
    s_all = np.empty((T, B, H), dtype=x.dtype)
    h_all = np.empty((T, B, H), dtype=x.dtype)
    h_prev = np.zeros((B, H), dtype=x.dtype)
    c_prev = np.zeros((B, H), dtype=x.dtype)
    for t in range(T):
        z = zin[t] + h_prev @ w_rec
        f = _sigmoid_np(z[:, :H])
        i = _sigmoid_np(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:])
        c = f * c_prev + i * g
        if sigmoid_cell:
            zo = c @ w_out_src + h_prev @ w_out_rec + b_out
            s = _sigmoid_np(c)
        else:
            zo = zo_in[t] + h_prev @ w_out_rec
            s = np.tanh(c)
        o = _sigmoid_np(zo)
        h = o * s
        gates[t, :, :H] = f
        gates[t, :, H:2 * H] = i
        gates[t, :, 2 * H:] = g
        o_all[t] = o
        c_all[t] = c
        s_all[t] = s
        h_all[t] = h
        h_prev = h
        c_prev = c
    return h_all, gates, o_all, c_all, s_all


def _sigmoid_np(z):
    return 1.0 / (1.0 + np.exp(-z))


def lstm_backward_numpy(x, w_in, w_rec, b, w_out_src, w_out_rec, b_out,
                        sigmoid_cell, h_all, gates, o_all, c_all, s_all, dh_out):
    T, B, N = x.shape
    H = w_rec.shape[0]
    dz_all = np.empty((T, B, 3 * H), dtype=x.dtype)
    dzo_all = np.empty((T, B, H), dtype=x.dtype)
    dw_rec = np.zeros_like(w_rec)
    dw_out_src = np.zeros_like(w_out_src)
    dw_out_rec = np.zeros_like(w_out_rec)
    dh_rec = np.zeros((B, H), dtype=x.dtype)
    dc_rec = np.zeros((B, H), dtype=x.dtype)
    for t in range(T - 1, -1, -1):
        f = gates[t, :, :H]
        i = gates[t, :, H:2 * H]
        g = gates[t, :, 2 * H:]
        o = o_all[t]
        c = c_all[t]
        s = s_all[t]
        c_prev = c_all[t - 1] if t > 0 else np.zeros((B, H), dtype=x.dtype)
        dh = dh_out[t] + dh_rec
        do = dh * s
        ds = dh * o
        dzo = do * o * (1.0 - o)
        if sigmoid_cell:
            dc = ds * s * (1.0 - s) + dc_rec + dzo @ w_out_src.T
            dw_out_src += c.T @ dzo
        else:
            dc = ds * (1.0 - s * s) + dc_rec
        df = dc * c_prev
        di = dc * g
        dg = dc * i
        dz = dz_all[t]
        dz[:, :H] = df * f * (1.0 - f)
        dz[:, H:2 * H] = di * i * (1.0 - i)
        dz[:, 2 * H:] = dg * (1.0 - g * g)
        dzo_all[t] = dzo
        dh_rec = dz @ w_rec.T + dzo @ w_out_rec.T
        dc_rec = dc * f
        if t > 0:
            h_prev = h_all[t - 1]
            dw_rec += h_prev.T @ dz
            dw_out_rec += h_prev.T @ dzo
    x2d = x.reshape(T * B, N)
    dz2d = dz_all.reshape(T * B, 3 * H)
    dzo2d = dzo_all.reshape(T * B, H)
    dw_in = x2d.T @ dz2d
    db = dz2d.sum(axis=0)
    db_out = dzo2d.sum(axis=0)
    dx = (dz2d @ w_in.T).reshape(T, B, N)
    if not sigmoid_cell:
        dw_out_src += x2d.T @ dzo2d
        dx += (dzo2d @ w_out_src.T).reshape(T, B, N)
    return dx, dw_in, dw_rec, db, dw_out_src, dw_out_rec, db_out


def _lstm_forward_loops(x, w_in, w_rec, b, w_out_src, w_out_rec, b_out, sigmoid_cell):
    T, B, N = x.shape
    H = w_rec.shape[0]
    x2d = x.reshape(T * B, N)
    zin = np.dot(x2d, w_in).reshape(T, B, 3 * H)
    zo_in = np.zeros((T, B, H), dtype=x.dtype)
    if not sigmoid_cell:
        zo_in = np.dot(x2d, w_out_src).reshape(T, B, H)
    gates = np.empty((T, B, 3 * H), dtype=x.dtype)
    o_all = np.empty((T, B, H), dtype=x.dtype)
    c_all = np.empty((T, B, H), dtype=x.dtype)
    s_all = np.empty((T, B, H), dtype=x.dtype)
    h_all = np.empty((T, B, H), dtype=x.dtype)
    h_prev = np.zeros((B, H), dtype=x.dtype)
    c_prev = np.zeros((B, H), dtype=x.dtype)
    for t in range(T):
        z = zin[t] + np.dot(h_prev, w_rec)
        zo = np.dot(h_prev, w_out_rec)
        for bi in range(B):
            for j in range(H):
                f = 1.0 / (1.0 + np.exp(-(z[bi, j] + b[j])))
                i = 1.0 / (1.0 + np.exp(-(z[bi, H + j] + b[H + j])))
                g = np.tanh(z[bi, 2 * H + j] + b[2 * H + j])
                c = f * c_prev[bi, j] + i * g
                gates[t, bi, j] = f
                gates[t, bi, H + j] = i
                gates[t, bi, 2 * H + j] = g
                c_all[t, bi, j] = c
        if sigmoid_cell:
            zo = zo + np.dot(c_all[t], w_out_src)
        else:
            zo = zo + zo_in[t]
        for bi in range(B):
            for j in range(H):
                c = c_all[t, bi, j]
                o = 1.0 / (1.0 + np.exp(-(zo[bi, j] + b_out[j])))
                if sigmoid_cell:
                    s = 1.0 / (1.0 + np.exp(-c))
                else:
                    s = np.tanh(c)
                o_all[t, bi, j] = o
                s_all[t, bi, j] = s
                h_all[t, bi, j] = o * s
        h_prev = h_all[t]
        c_prev = c_all[t]
    return h_all, gates, o_all, c_all, s_all


def _lstm_backward_loops(x, w_in, w_rec, b, w_out_src, w_out_rec, b_out,
                         sigmoid_cell, h_all, gates, o_all, c_all, s_all, dh_out):
    T, B, N = x.shape
    H = w_rec.shape[0]
    dz_all = np.empty((T, B, 3 * H), dtype=x.dtype)
    dzo_all = np.empty((T, B, H), dtype=x.dtype)
    dw_rec = np.zeros_like(w_rec)
    dw_out_src = np.zeros_like(w_out_src)
    dw_out_rec = np.zeros_like(w_out_rec)
    dh_rec = np.zeros((B, H), dtype=x.dtype)
    dc_rec = np.zeros((B, H), dtype=x.dtype)
    dc = np.empty((B, H), dtype=x.dtype)
    for t in range(T - 1, -1, -1):
        dzo = dzo_all[t]
        for bi in range(B):
            for j in range(H):
                o = o_all[t, bi, j]
                s = s_all[t, bi, j]
                dh = dh_out[t, bi, j] + dh_rec[bi, j]
                do = dh * s
                ds = dh * o
                dzo[bi, j] = do * o * (1.0 - o)
                if sigmoid_cell:
                    dc[bi, j] = ds * s * (1.0 - s) + dc_rec[bi, j]
                else:
                    dc[bi, j] = ds * (1.0 - s * s) + dc_rec[bi, j]
        if sigmoid_cell:
            dc += np.dot(dzo, w_out_src.T.copy())
            dw_out_src += np.dot(c_all[t].T.copy(), dzo)
        dz = dz_all[t]
        for bi in range(B):
            for j in range(H):
                f = gates[t, bi, j]
                i = gates[t, bi, H + j]
                g = gates[t, bi, 2 * H + j]
                c_prev = c_all[t - 1, bi, j] if t > 0 else 0.0
                df = dc[bi, j] * c_prev
                di = dc[bi, j] * g
                dg = dc[bi, j] * i
                dz[bi, j] = df * f * (1.0 - f)
                dz[bi, H + j] = di * i * (1.0 - i)
                dz[bi, 2 * H + j] = dg * (1.0 - g * g)
                dc_rec[bi, j] = dc[bi, j] * f
        dh_rec = np.dot(dz, w_rec.T.copy()) + np.dot(dzo, w_out_rec.T.copy())
        if t > 0:
            h_prev_t = h_all[t - 1].T.copy()
            dw_rec += np.dot(h_prev_t, dz)
            dw_out_rec += np.dot(h_prev_t, dzo)
    x2d = x.reshape(T * B, N)
    dz2d = dz_all.reshape(T * B, 3 * H)
    dzo2d = dzo_all.reshape(T * B, H)
    dw_in = np.dot(x2d.T.copy(), dz2d)
    db = np.zeros(3 * H, dtype=x.dtype)
    for r in range(T * B):
        for j in range(3 * H):
            db[j] += dz2d[r, j]
    db_out = np.zeros(H, dtype=x.dtype)
    for r in range(T * B):
        for j in range(H):
            db_out[j] += dzo2d[r, j]
    dx = np.dot(dz2d, w_in.T.copy()).reshape(T, B, N)
    if not sigmoid_cell:
        dw_out_src += np.dot(x2d.T.copy(), dzo2d)
        dx += np.dot(dzo2d, w_out_src.T.copy()).reshape(T, B, N)
    return dx, dw_in, dw_rec, db, dw_out_src, dw_out_rec, db_out


# ---------------------------------------------------------------------------
# strict dense forward: per-row accumulation, independent of batch slicing
# ---------------------------------------------------------------------------

def dense_forward_strict_numpy(x, w, b):
    return np.einsum("ik,kn->in", x, w) + b


def _dense_forward_strict_loops(x, w, b):
    m, k = x.shape
    n = w.shape[1]
    out = np.empty((m, n), dtype=x.dtype)
    for r in range(m):
        acc = b.copy()
        for p in range(k):
            xv = x[r, p]
            for j in range(n):
                acc[j] += xv * w[p, j]
        out[r] = acc
    return out


# ---------------------------------------------------------------------------
# lane selection
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    conv1d_forward_numba = njit(cache=True)(_conv1d_forward_loops)
    conv1d_backward_numba = njit(cache=True)(_conv1d_backward_loops)
    lstm_forward_numba = njit(cache=True)(_lstm_forward_loops)
    lstm_backward_numba = njit(cache=True)(_lstm_backward_loops)
    dense_forward_strict_numba = njit(cache=True)(_dense_forward_strict_loops)

    conv1d_forward = conv1d_forward_numba
    conv1d_backward = conv1d_backward_numba
    lstm_forward = lstm_forward_numba
    lstm_backward = lstm_backward_numba
    dense_forward_strict = dense_forward_strict_numba
else:
    conv1d_forward = conv1d_forward_numpy
    conv1d_backward = conv1d_backward_numpy
    lstm_forward = lstm_forward_numpy
    lstm_backward = lstm_backward_numpy
    dense_forward_strict = dense_forward_strict_numpy


def active_lane() -> str:
    return "numba" if HAVE_NUMBA else "numpy"

"""Pure NumPy kernels: LSTM recurrence and linear-chain CRF dynamic programs.

Drop-in equivalent of the compiled `_fast` extension; selected at import when
the extension is unavailable or OMNER_BACKEND=pure.
"""

from __future__ import annotations

import numpy as np

NAME = "pure"


def lstm_forward(x, Wx, Wh, b):
    """Run an LSTM over x (L, D); returns (h_seq, cache arrays i,f,g,o,c)."""
    L = x.shape[0]
    h_dim = Wh.shape[1]
    h_seq = np.zeros((L, h_dim))
    i_s = np.zeros((L, h_dim))
    f_s = np.zeros((L, h_dim))
    g_s = np.zeros((L, h_dim))
    o_s = np.zeros((L, h_dim))
    c_s = np.zeros((L, h_dim))
    h_prev = np.zeros(h_dim)
    c_prev = np.zeros(h_dim)
    pre = x @ Wx.T + b  # (L, 4h)
    for t in range(L):
        a = pre[t] + Wh @ h_prev
        i = _sigmoid(a[:h_dim])
        f = _sigmoid(a[h_dim:2 * h_dim])
        g = np.tanh(a[2 * h_dim:3 * h_dim])
        o = _sigmoid(a[3 * h_dim:])
        c = f * c_prev + i * g
        h = o * np.tanh(c)
        i_s[t], f_s[t], g_s[t], o_s[t], c_s[t], h_seq[t] = i, f, g, o, c, h
        h_prev, c_prev = h, c
    return h_seq, (i_s, f_s, g_s, o_s, c_s)


def lstm_backward(dh_seq, x, Wx, Wh, h_seq, cache):
    """Backprop through lstm_forward; returns (dx, dWx, dWh, db)."""
    i_s, f_s, g_s, o_s, c_s = cache
    L, h_dim = h_seq.shape
    dx = np.zeros_like(x)
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * h_dim)
    dh_rec = np.zeros(h_dim)
    dc_rec = np.zeros(h_dim)
    for t in range(L - 1, -1, -1):
        dh = dh_seq[t] + dh_rec
        tc = np.tanh(c_s[t])
        do = dh * tc
        dc = dc_rec + dh * o_s[t] * (1.0 - tc * tc)
        c_prev = c_s[t - 1] if t > 0 else np.zeros(h_dim)
        h_prev = h_seq[t - 1] if t > 0 else np.zeros(h_dim)
        df = dc * c_prev
        di = dc * g_s[t]
        dg = dc * i_s[t]
        dc_rec = dc * f_s[t]
        da = np.concatenate([
            di * i_s[t] * (1.0 - i_s[t]),
            df * f_s[t] * (1.0 - f_s[t]),
            dg * (1.0 - g_s[t] * g_s[t]),
            do * o_s[t] * (1.0 - o_s[t]),
        ])
        dWx += np.outer(da, x[t])
        dWh += np.outer(da, h_prev)
        db += da
        dx[t] = Wx.T @ da
        dh_rec = Wh.T @ da
    return dx, dWx, dWh, db


def crf_forward(emissions, T, s, e):
    """Log-space forward algorithm; returns (logZ, alpha (L, K))."""
    L, K = emissions.shape
    alpha = np.zeros((L, K))
    alpha[0] = s + emissions[0]
    for t in range(1, L):
        scores = alpha[t - 1][:, None] + T  # (K_prev, K)
        alpha[t] = emissions[t] + _logsumexp_cols(scores)
    return _logsumexp_vec(alpha[L - 1] + e), alpha


def crf_backward(emissions, T, e):
    """Log-space backward recursion; returns beta (L, K)."""
    L, K = emissions.shape
    beta = np.zeros((L, K))
    beta[L - 1] = e
    for t in range(L - 2, -1, -1):
        scores = T + (emissions[t + 1] + beta[t + 1])[None, :]
        beta[t] = _logsumexp_cols(scores.T)
    return beta


def crf_viterbi(emissions, T, s, e):
    """Max-score decode; ties prefer the smaller tag index. Returns (path, score)."""
    L, K = emissions.shape
    delta = s + emissions[0]
    back = np.zeros((L, K), dtype=np.intp)
    for t in range(1, L):
        scores = delta[:, None] + T
        back[t] = np.argmax(scores, axis=0)  # first max = smallest index
        delta = emissions[t] + scores[back[t], np.arange(K)]
    last = int(np.argmax(delta + e))
    score = float(delta[last] + e[last])
    path = np.zeros(L, dtype=np.intp)
    path[L - 1] = last
    for t in range(L - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, score


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _logsumexp_vec(v):
    m = np.max(v)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(v - m))))


def _logsumexp_cols(scores):
    """logsumexp over axis 0 of (K, K), tolerating -inf columns."""
    m = np.max(scores, axis=0)
    safe = np.where(np.isfinite(m), m, 0.0)
    out = safe + np.log(np.sum(np.exp(scores - safe), axis=0))
    return np.where(np.isfinite(m), out, m)

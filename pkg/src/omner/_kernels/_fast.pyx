# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: LSTM recurrence and linear-chain CRF dynamic programs.

Same contracts as the `_pure` NumPy module; the inner time loops are plain C.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, tanh, INFINITY

cnp.import_array()

NAME = "fast"


cdef inline double _sig(double x) nogil:
    return 1.0 / (1.0 + exp(-x))


def lstm_forward(double[:, ::1] x not None, double[:, ::1] Wx not None,
                 double[:, ::1] Wh not None, double[::1] b not None):
    """Run an LSTM over x (L, D); returns (h_seq, cache arrays i,f,g,o,c)."""
    cdef Py_ssize_t L = x.shape[0]
    cdef Py_ssize_t D = x.shape[1]
    cdef Py_ssize_t H = Wh.shape[1]
    cdef Py_ssize_t t, j, k

    pre_np = np.asarray(x) @ np.asarray(Wx).T + np.asarray(b)
    cdef double[:, ::1] pre = np.ascontiguousarray(pre_np)

    h_np = np.zeros((L, H)); i_np = np.zeros((L, H)); f_np = np.zeros((L, H))
    g_np = np.zeros((L, H)); o_np = np.zeros((L, H)); c_np = np.zeros((L, H))
    cdef double[:, ::1] h_seq = h_np
    cdef double[:, ::1] i_s = i_np
    cdef double[:, ::1] f_s = f_np
    cdef double[:, ::1] g_s = g_np
    cdef double[:, ::1] o_s = o_np
    cdef double[:, ::1] c_s = c_np

    a_np = np.zeros(4 * H)
    cdef double[::1] a = a_np
    cdef double iv, fv, gv, ov, cv, cprev

    with nogil:
        for t in range(L):
            for j in range(4 * H):
                a[j] = pre[t, j]
                if t > 0:
                    for k in range(H):
                        a[j] += Wh[j, k] * h_seq[t - 1, k]
            for j in range(H):
                iv = _sig(a[j])
                fv = _sig(a[H + j])
                gv = tanh(a[2 * H + j])
                ov = _sig(a[3 * H + j])
                cprev = c_s[t - 1, j] if t > 0 else 0.0
                cv = fv * cprev + iv * gv
                i_s[t, j] = iv
                f_s[t, j] = fv
                g_s[t, j] = gv
                o_s[t, j] = ov
                c_s[t, j] = cv
                h_seq[t, j] = ov * tanh(cv)
    return h_np, (i_np, f_np, g_np, o_np, c_np)


def lstm_backward(double[:, ::1] dh_seq not None, double[:, ::1] x not None,
                  double[:, ::1] Wx not None, double[:, ::1] Wh not None,
                  double[:, ::1] h_seq not None, cache):
    """Backprop through lstm_forward; returns (dx, dWx, dWh, db)."""
    i_np, f_np, g_np, o_np, c_np = cache
    cdef double[:, ::1] i_s = i_np
    cdef double[:, ::1] f_s = f_np
    cdef double[:, ::1] g_s = g_np
    cdef double[:, ::1] o_s = o_np
    cdef double[:, ::1] c_s = c_np

    cdef Py_ssize_t L = h_seq.shape[0]
    cdef Py_ssize_t H = h_seq.shape[1]
    cdef Py_ssize_t D = x.shape[1]
    cdef Py_ssize_t t, j, k

    dx_np = np.zeros((L, D)); dWx_np = np.zeros((4 * H, D))
    dWh_np = np.zeros((4 * H, H)); db_np = np.zeros(4 * H)
    cdef double[:, ::1] dx = dx_np
    cdef double[:, ::1] dWx = dWx_np
    cdef double[:, ::1] dWh = dWh_np
    cdef double[::1] db = db_np

    da_np = np.zeros(4 * H)
    dh_rec_np = np.zeros(H)
    dc_rec_np = np.zeros(H)
    cdef double[::1] da = da_np
    cdef double[::1] dh_rec = dh_rec_np
    cdef double[::1] dc_rec = dc_rec_np
    cdef double dh, tc, do_, dc, c_prev, df, di, dg, dav

    with nogil:
        for t in range(L - 1, -1, -1):
            for j in range(H):
                dh = dh_seq[t, j] + dh_rec[j]
                tc = tanh(c_s[t, j])
                do_ = dh * tc
                dc = dc_rec[j] + dh * o_s[t, j] * (1.0 - tc * tc)
                c_prev = c_s[t - 1, j] if t > 0 else 0.0
                df = dc * c_prev
                di = dc * g_s[t, j]
                dg = dc * i_s[t, j]
                dc_rec[j] = dc * f_s[t, j]
                da[j] = di * i_s[t, j] * (1.0 - i_s[t, j])
                da[H + j] = df * f_s[t, j] * (1.0 - f_s[t, j])
                da[2 * H + j] = dg * (1.0 - g_s[t, j] * g_s[t, j])
                da[3 * H + j] = do_ * o_s[t, j] * (1.0 - o_s[t, j])
            for j in range(H):
                dh_rec[j] = 0.0
            for j in range(4 * H):
                dav = da[j]
                db[j] += dav
                for k in range(D):
                    dWx[j, k] += dav * x[t, k]
                    dx[t, k] += Wx[j, k] * dav
                if t > 0:
                    for k in range(H):
                        dWh[j, k] += dav * h_seq[t - 1, k]
                for k in range(H):
                    dh_rec[k] += Wh[j, k] * dav
    return dx_np, dWx_np, dWh_np, db_np


cdef double _lse_row(double[::1] row, Py_ssize_t K) nogil:
    cdef double m = -INFINITY
    cdef Py_ssize_t k
    cdef double s = 0.0
    for k in range(K):
        if row[k] > m:
            m = row[k]
    if m == -INFINITY:
        return m
    for k in range(K):
        s += exp(row[k] - m)
    return m + log(s)


def crf_forward(double[:, ::1] emissions not None, double[:, ::1] T not None,
                double[::1] s not None, double[::1] e not None):
    """Log-space forward algorithm; returns (logZ, alpha (L, K))."""
    cdef Py_ssize_t L = emissions.shape[0]
    cdef Py_ssize_t K = emissions.shape[1]
    cdef Py_ssize_t t, a, b_
    alpha_np = np.zeros((L, K))
    cdef double[:, ::1] alpha = alpha_np
    work_np = np.zeros(K)
    cdef double[::1] work = work_np
    cdef double logz

    with nogil:
        for b_ in range(K):
            alpha[0, b_] = s[b_] + emissions[0, b_]
        for t in range(1, L):
            for b_ in range(K):
                for a in range(K):
                    work[a] = alpha[t - 1, a] + T[a, b_]
                alpha[t, b_] = emissions[t, b_] + _lse_row(work, K)
        for b_ in range(K):
            work[b_] = alpha[L - 1, b_] + e[b_]
        logz = _lse_row(work, K)
    return logz, alpha_np


def crf_backward(double[:, ::1] emissions not None, double[:, ::1] T not None,
                 double[::1] e not None):
    """Log-space backward recursion; returns beta (L, K)."""
    cdef Py_ssize_t L = emissions.shape[0]
    cdef Py_ssize_t K = emissions.shape[1]
    cdef Py_ssize_t t, a, b_
    beta_np = np.zeros((L, K))
    cdef double[:, ::1] beta = beta_np
    work_np = np.zeros(K)
    cdef double[::1] work = work_np

    with nogil:
        for a in range(K):
            beta[L - 1, a] = e[a]
        for t in range(L - 2, -1, -1):
            for a in range(K):
                for b_ in range(K):
                    work[b_] = T[a, b_] + emissions[t + 1, b_] + beta[t + 1, b_]
                beta[t, a] = _lse_row(work, K)
    return beta_np


def crf_viterbi(double[:, ::1] emissions not None, double[:, ::1] T not None,
                double[::1] s not None, double[::1] e not None):
    """Max-score decode; ties prefer the smaller tag index. Returns (path, score)."""
    cdef Py_ssize_t L = emissions.shape[0]
    cdef Py_ssize_t K = emissions.shape[1]
    cdef Py_ssize_t t, a, b_, best
    cdef double cand, best_score

    delta_np = np.zeros((L, K))
    cdef double[:, ::1] delta = delta_np
    back_np = np.zeros((L, K), dtype=np.intp)
    cdef Py_ssize_t[:, ::1] back = back_np
    path_np = np.zeros(L, dtype=np.intp)
    cdef Py_ssize_t[::1] path = path_np
    cdef double score

    with nogil:
        for b_ in range(K):
            delta[0, b_] = s[b_] + emissions[0, b_]
        for t in range(1, L):
            for b_ in range(K):
                best = 0
                best_score = delta[t - 1, 0] + T[0, b_]
                for a in range(1, K):
                    cand = delta[t - 1, a] + T[a, b_]
                    if cand > best_score:
                        best_score = cand
                        best = a
                delta[t, b_] = emissions[t, b_] + best_score
                back[t, b_] = best
        best = 0
        best_score = delta[L - 1, 0] + e[0]
        for b_ in range(1, K):
            cand = delta[L - 1, b_] + e[b_]
            if cand > best_score:
                best_score = cand
                best = b_
        score = best_score
        path[L - 1] = best
        for t in range(L - 1, 0, -1):
            path[t - 1] = back[t, path[t]]
    return path_np, score

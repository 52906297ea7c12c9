# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: same contracts as the numpy reference backend.

Straight C loops over typed memoryviews; no BLAS, no threading. Results
agree with the reference backend to floating-point accumulation order.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sigmoid(double v) noexcept nogil:
    cdef double e
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


def conv1d_forward(object x_in, object w_in, object b_in, int stride):
    cdef double[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[:, :, ::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef double[::1] bias = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t B = x.shape[0], L = x.shape[1], Cin = x.shape[2]
    cdef Py_ssize_t Cout = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t Lout = (L - K) // stride + 1
    out = np.empty((B, Lout, Cout), dtype=np.float64)
    cdef double[:, :, ::1] y = out
    cdef Py_ssize_t b, t, co, ci, k, base
    cdef double acc
    with nogil:
        for b in range(B):
            for t in range(Lout):
                base = t * stride
                for co in range(Cout):
                    acc = bias[co]
                    for ci in range(Cin):
                        for k in range(K):
                            acc += x[b, base + k, ci] * w[co, ci, k]
                    y[b, t, co] = acc
    return out


def conv1d_backward(object x_in, object w_in, int stride, object dy_in):
    cdef double[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[:, :, ::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef double[:, :, ::1] dy = np.ascontiguousarray(dy_in, dtype=np.float64)
    cdef Py_ssize_t B = x.shape[0], L = x.shape[1], Cin = x.shape[2]
    cdef Py_ssize_t Cout = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t Lout = dy.shape[1]
    dx_out = np.zeros((B, L, Cin), dtype=np.float64)
    dw_out = np.zeros((Cout, Cin, K), dtype=np.float64)
    db_out = np.zeros(Cout, dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_out
    cdef double[:, :, ::1] dw = dw_out
    cdef double[::1] db = db_out
    cdef Py_ssize_t b, t, co, ci, k, base
    cdef double g
    with nogil:
        for b in range(B):
            for t in range(Lout):
                base = t * stride
                for co in range(Cout):
                    g = dy[b, t, co]
                    db[co] += g
                    for ci in range(Cin):
                        for k in range(K):
                            dw[co, ci, k] += g * x[b, base + k, ci]
                            dx[b, base + k, ci] += g * w[co, ci, k]
    return dx_out, dw_out, db_out


def maxpool1d_forward(object x_in, int pool, int stride):
    cdef double[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef Py_ssize_t B = x.shape[0], L = x.shape[1], C = x.shape[2]
    cdef Py_ssize_t Lout = (L - pool) // stride + 1
    y_out = np.empty((B, Lout, C), dtype=np.float64)
    arg_out = np.empty((B, Lout, C), dtype=np.int64)
    cdef double[:, :, ::1] y = y_out
    cdef cnp.int64_t[:, :, ::1] arg = arg_out
    cdef Py_ssize_t b, t, c, k, base, best_k
    cdef double best, v
    with nogil:
        for b in range(B):
            for t in range(Lout):
                base = t * stride
                for c in range(C):
                    best = x[b, base, c]
                    best_k = base
                    for k in range(1, pool):
                        v = x[b, base + k, c]
                        if v > best:  # strict: ties keep the earliest index
                            best = v
                            best_k = base + k
                    y[b, t, c] = best
                    arg[b, t, c] = best_k
    return y_out, arg_out


def maxpool1d_backward(object dy_in, object arg_in, int length):
    cdef double[:, :, ::1] dy = np.ascontiguousarray(dy_in, dtype=np.float64)
    cdef cnp.int64_t[:, :, ::1] arg = np.ascontiguousarray(arg_in, dtype=np.int64)
    cdef Py_ssize_t B = dy.shape[0], Lout = dy.shape[1], C = dy.shape[2]
    dx_out = np.zeros((B, length, C), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_out
    cdef Py_ssize_t b, t, c
    with nogil:
        for b in range(B):
            for t in range(Lout):
                for c in range(C):
                    dx[b, arg[b, t, c], c] += dy[b, t, c]
    return dx_out


def lstm_forward(object x_in, object wx_in, object wh_in, object b_in):
    cdef double[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[:, ::1] wx = np.ascontiguousarray(wx_in, dtype=np.float64)
    cdef double[:, ::1] wh = np.ascontiguousarray(wh_in, dtype=np.float64)
    cdef double[::1] bias = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t B = x.shape[0], T = x.shape[1], D = x.shape[2]
    cdef Py_ssize_t H = wh.shape[0], G = 4 * H
    hs_out = np.zeros((B, T + 1, H), dtype=np.float64)
    cs_out = np.zeros((B, T + 1, H), dtype=np.float64)
    ifgo_out = np.empty((B, T, G), dtype=np.float64)
    tanh_c_out = np.empty((B, T, H), dtype=np.float64)
    cdef double[:, :, ::1] hs = hs_out
    cdef double[:, :, ::1] cs = cs_out
    cdef double[:, :, ::1] ifgo = ifgo_out
    cdef double[:, :, ::1] tanh_c = tanh_c_out
    z_buf = np.empty(G, dtype=np.float64)
    cdef double[::1] z = z_buf
    cdef Py_ssize_t b, t, d, h, j
    cdef double xv, hv, iv, fv, gv, ov, c, tc
    with nogil:
        for b in range(B):
            for t in range(T):
                for j in range(G):
                    z[j] = bias[j]
                for d in range(D):
                    xv = x[b, t, d]
                    for j in range(G):
                        z[j] += xv * wx[d, j]
                for h in range(H):
                    hv = hs[b, t, h]
                    for j in range(G):
                        z[j] += hv * wh[h, j]
                for h in range(H):
                    iv = _sigmoid(z[h])
                    fv = _sigmoid(z[H + h])
                    gv = tanh(z[2 * H + h])
                    ov = _sigmoid(z[3 * H + h])
                    c = fv * cs[b, t, h] + iv * gv
                    tc = tanh(c)
                    cs[b, t + 1, h] = c
                    hs[b, t + 1, h] = ov * tc
                    ifgo[b, t, h] = iv
                    ifgo[b, t, H + h] = fv
                    ifgo[b, t, 2 * H + h] = gv
                    ifgo[b, t, 3 * H + h] = ov
                    tanh_c[b, t, h] = tc
    return hs_out, cs_out, ifgo_out, tanh_c_out


def lstm_backward(object x_in, object wx_in, object wh_in, object hs_in,
                  object cs_in, object ifgo_in, object tanh_c_in, object dh_last_in):
    cdef double[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[:, ::1] wx = np.ascontiguousarray(wx_in, dtype=np.float64)
    cdef double[:, ::1] wh = np.ascontiguousarray(wh_in, dtype=np.float64)
    cdef double[:, :, ::1] hs = np.ascontiguousarray(hs_in, dtype=np.float64)
    cdef double[:, :, ::1] cs = np.ascontiguousarray(cs_in, dtype=np.float64)
    cdef double[:, :, ::1] ifgo = np.ascontiguousarray(ifgo_in, dtype=np.float64)
    cdef double[:, :, ::1] tanh_c = np.ascontiguousarray(tanh_c_in, dtype=np.float64)
    cdef double[:, ::1] dh0 = np.ascontiguousarray(dh_last_in, dtype=np.float64)
    cdef Py_ssize_t B = x.shape[0], T = x.shape[1], D = x.shape[2]
    cdef Py_ssize_t H = wh.shape[0], G = 4 * H
    dx_out = np.empty((B, T, D), dtype=np.float64)
    dwx_out = np.zeros((D, G), dtype=np.float64)
    dwh_out = np.zeros((H, G), dtype=np.float64)
    db_out = np.zeros(G, dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_out
    cdef double[:, ::1] dwx = dwx_out
    cdef double[:, ::1] dwh = dwh_out
    cdef double[::1] db = db_out
    dh_buf = np.array(dh_last_in, dtype=np.float64, copy=True)
    cdef double[:, ::1] dh = dh_buf
    dc_buf = np.zeros((B, H), dtype=np.float64)
    cdef double[:, ::1] dc = dc_buf
    dz_buf = np.empty(G, dtype=np.float64)
    cdef double[::1] dz = dz_buf
    cdef Py_ssize_t b, t, d, h, j
    cdef double iv, fv, gv, ov, tc, dcv, acc, xv
    with nogil:
        for b in range(B):
            for t in range(T - 1, -1, -1):
                for h in range(H):
                    iv = ifgo[b, t, h]
                    fv = ifgo[b, t, H + h]
                    gv = ifgo[b, t, 2 * H + h]
                    ov = ifgo[b, t, 3 * H + h]
                    tc = tanh_c[b, t, h]
                    dcv = dc[b, h] + dh[b, h] * ov * (1.0 - tc * tc)
                    dz[h] = dcv * gv * iv * (1.0 - iv)
                    dz[H + h] = dcv * cs[b, t, h] * fv * (1.0 - fv)
                    dz[2 * H + h] = dcv * iv * (1.0 - gv * gv)
                    dz[3 * H + h] = dh[b, h] * tc * ov * (1.0 - ov)
                    dc[b, h] = dcv * fv
                for j in range(G):
                    db[j] += dz[j]
                for d in range(D):
                    xv = x[b, t, d]
                    acc = 0.0
                    for j in range(G):
                        dwx[d, j] += xv * dz[j]
                        acc += dz[j] * wx[d, j]
                    dx[b, t, d] = acc
                for h in range(H):
                    xv = hs[b, t, h]
                    acc = 0.0
                    for j in range(G):
                        dwh[h, j] += xv * dz[j]
                        acc += dz[j] * wh[h, j]
                    dh[b, h] = acc
    return dx_out, dwx_out, dwh_out, db_out


def rnn_forward(object x_in, object wx_in, object wh_in, object b_in):
    cdef double[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[:, ::1] wx = np.ascontiguousarray(wx_in, dtype=np.float64)
    cdef double[:, ::1] wh = np.ascontiguousarray(wh_in, dtype=np.float64)
    cdef double[::1] bias = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t B = x.shape[0], T = x.shape[1], D = x.shape[2]
    cdef Py_ssize_t H = wh.shape[0]
    hs_out = np.zeros((B, T + 1, H), dtype=np.float64)
    cdef double[:, :, ::1] hs = hs_out
    z_buf = np.empty(H, dtype=np.float64)
    cdef double[::1] z = z_buf
    cdef Py_ssize_t b, t, d, h, j
    cdef double xv, hv
    with nogil:
        for b in range(B):
            for t in range(T):
                for j in range(H):
                    z[j] = bias[j]
                for d in range(D):
                    xv = x[b, t, d]
                    for j in range(H):
                        z[j] += xv * wx[d, j]
                for h in range(H):
                    hv = hs[b, t, h]
                    for j in range(H):
                        z[j] += hv * wh[h, j]
                for j in range(H):
                    hs[b, t + 1, j] = tanh(z[j])
    return hs_out


def rnn_backward(object x_in, object wx_in, object wh_in, object hs_in, object dh_last_in):
    cdef double[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[:, ::1] wx = np.ascontiguousarray(wx_in, dtype=np.float64)
    cdef double[:, ::1] wh = np.ascontiguousarray(wh_in, dtype=np.float64)
    cdef double[:, :, ::1] hs = np.ascontiguousarray(hs_in, dtype=np.float64)
    cdef Py_ssize_t B = x.shape[0], T = x.shape[1], D = x.shape[2]
    cdef Py_ssize_t H = wh.shape[0]
    dx_out = np.empty((B, T, D), dtype=np.float64)
    dwx_out = np.zeros((D, H), dtype=np.float64)
    dwh_out = np.zeros((H, H), dtype=np.float64)
    db_out = np.zeros(H, dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_out
    cdef double[:, ::1] dwx = dwx_out
    cdef double[:, ::1] dwh = dwh_out
    cdef double[::1] db = db_out
    dh_buf = np.array(dh_last_in, dtype=np.float64, copy=True)
    cdef double[:, ::1] dh = dh_buf
    dz_buf = np.empty(H, dtype=np.float64)
    cdef double[::1] dz = dz_buf
    cdef Py_ssize_t b, t, d, h, j
    cdef double hv, xv, acc
    with nogil:
        for b in range(B):
            for t in range(T - 1, -1, -1):
                for j in range(H):
                    hv = hs[b, t + 1, j]
                    dz[j] = dh[b, j] * (1.0 - hv * hv)
                    db[j] += dz[j]
                for d in range(D):
                    xv = x[b, t, d]
                    acc = 0.0
                    for j in range(H):
                        dwx[d, j] += xv * dz[j]
                        acc += dz[j] * wx[d, j]
                    dx[b, t, d] = acc
                for h in range(H):
                    xv = hs[b, t, h]
                    acc = 0.0
                    for j in range(H):
                        dwh[h, j] += xv * dz[j]
                        acc += dz[j] * wh[h, j]
                    dh[b, h] = acc
    return dx_out, dwx_out, dwh_out, db_out

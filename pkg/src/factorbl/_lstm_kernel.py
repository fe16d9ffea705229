"""Numba-jitted fused forward/backward pass for the sequence model.

Optional fast path: viewgen falls back to the pure-numpy implementation when
numba is unavailable. The math here mirrors SequenceModel.loss_and_grads
exactly (same gate packing [input | forget | output | cell], same clipping).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def lstm_loss_and_grads(x_t, y, wx, wh, b, wo, bo):
    """x_t is time-major (L, S, N); returns (loss, dwx, dwh, db, dwo, dbo)."""
    length, s, n = x_t.shape
    h_dim = wh.shape[0]
    three_h = 3 * h_dim
    four_h = 4 * h_dim
    n_cls = wo.shape[1]

    xw = x_t.copy().reshape(length * s, n) @ wx
    xw = xw.reshape(length, s, four_h)

    sig = np.empty((length, s, three_h))
    gg = np.empty((length, s, h_dim))
    c_prev = np.empty((length, s, h_dim))
    tanh_c = np.empty((length, s, h_dim))
    h_prev = np.empty((length, s, h_dim))
    h = np.zeros((s, h_dim))
    c = np.zeros((s, h_dim))

    for t in range(length):
        a = xw[t] + h @ wh
        for i in range(s):
            for j in range(three_h):
                z = a[i, j] + b[j]
                if z > 60.0:
                    z = 60.0
                elif z < -60.0:
                    z = -60.0
                sig[t, i, j] = 1.0 / (1.0 + np.exp(-z))
            for j in range(h_dim):
                gg[t, i, j] = np.tanh(a[i, three_h + j] + b[three_h + j])
            for j in range(h_dim):
                c_prev[t, i, j] = c[i, j]
                h_prev[t, i, j] = h[i, j]
                cn = sig[t, i, h_dim + j] * c[i, j] + sig[t, i, j] * gg[t, i, j]
                c[i, j] = cn
                tc = np.tanh(cn)
                tanh_c[t, i, j] = tc
                h[i, j] = sig[t, i, 2 * h_dim + j] * tc

    logits = h @ wo
    loss = 0.0
    dlogits = np.empty((s, n_cls))
    for i in range(s):
        m = logits[i, 0] + bo[0]
        for k in range(1, n_cls):
            v = logits[i, k] + bo[k]
            if v > m:
                m = v
        denom = 0.0
        for k in range(n_cls):
            dlogits[i, k] = np.exp(logits[i, k] + bo[k] - m)
            denom += dlogits[i, k]
        for k in range(n_cls):
            dlogits[i, k] /= denom
        loss -= np.log(dlogits[i, y[i]] + 1e-300)
        dlogits[i, y[i]] -= 1.0
        for k in range(n_cls):
            dlogits[i, k] /= s
    loss /= s

    dwo = h.T.copy() @ dlogits
    dbo = np.zeros(n_cls)
    for i in range(s):
        for k in range(n_cls):
            dbo[k] += dlogits[i, k]

    wo_t = wo.T.copy()
    wh_t = wh.T.copy()
    dh = dlogits @ wo_t
    dc = np.zeros((s, h_dim))
    da_all = np.empty((length, s, four_h))
    for t in range(length - 1, -1, -1):
        da = da_all[t]
        for i in range(s):
            for j in range(h_dim):
                gi = sig[t, i, j]
                gf = sig[t, i, h_dim + j]
                go = sig[t, i, 2 * h_dim + j]
                g = gg[t, i, j]
                tc = tanh_c[t, i, j]
                do = dh[i, j] * tc
                dcv = dc[i, j] + dh[i, j] * go * (1.0 - tc * tc)
                da[i, j] = dcv * g * gi * (1.0 - gi)
                da[i, h_dim + j] = dcv * c_prev[t, i, j] * gf * (1.0 - gf)
                da[i, 2 * h_dim + j] = do * go * (1.0 - go)
                da[i, three_h + j] = dcv * gi * (1.0 - g * g)
                dc[i, j] = dcv * gf
        dh = da @ wh_t

    flat = da_all.reshape(length * s, four_h)
    dwx = x_t.copy().reshape(length * s, n).T @ flat
    dwh = h_prev.reshape(length * s, h_dim).T.copy() @ flat
    db = np.zeros(four_h)
    for r in range(length * s):
        for j in range(four_h):
            db[j] += flat[r, j]
    return loss, dwx, dwh, db, dwo, dbo

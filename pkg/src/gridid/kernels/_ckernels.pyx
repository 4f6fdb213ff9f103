# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of ``_pykernels``; same signatures and array conventions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, sin, cos, exp, log1p, fabs

cnp.import_array()


cdef inline double _softplus(double x) nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline double _sigmoid(double x) nogil:
    return 0.5 * (1.0 + tanh(0.5 * x))


def predict(X, int H, tau, pin):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] tv = np.ascontiguousarray(tau, dtype=np.float64)
    cdef double[::1] pv = np.ascontiguousarray(pin, dtype=np.float64)
    cdef Py_ssize_t P = Xv.shape[0], N = tv.shape[0]
    y_arr = np.empty((P, N, 2))
    dy_arr = np.empty((P, N, 2))
    cdef double[:, :, ::1] y = y_arr
    cdef double[:, :, ::1] dy = dy_arr
    cdef Py_ssize_t p, n, h
    cdef double z, a, g, y0, y1, d0, d1
    with nogil:
        for p in range(P):
            for n in range(N):
                y0 = Xv[p, 5 * H]
                y1 = Xv[p, 5 * H + 1]
                d0 = 0.0
                d1 = 0.0
                for h in range(H):
                    z = Xv[p, 2 * h] * tv[n] + Xv[p, 2 * h + 1] * pv[n] + Xv[p, 2 * H + h]
                    a = tanh(z)
                    g = (1.0 - a * a) * Xv[p, 2 * h]
                    y0 += Xv[p, 3 * H + h] * a
                    y1 += Xv[p, 4 * H + h] * a
                    d0 += Xv[p, 3 * H + h] * g
                    d1 += Xv[p, 4 * H + h] * g
                y[p, n, 0] = y0
                y[p, n, 1] = y1
                dy[p, n, 0] = d0
                dy[p, n, 1] = d1
    return y_arr, dy_arr


def sse_grad(X, int H, tau, pin, p_phys, targets, consts, weights, bint want_grad=True):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] tv = np.ascontiguousarray(tau, dtype=np.float64)
    cdef double[::1] pv = np.ascontiguousarray(pin, dtype=np.float64)
    cdef double[::1] Pv = np.ascontiguousarray(p_phys, dtype=np.float64)
    cdef double[:, ::1] Tv = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1, 2)
    cdef double[:, ::1] Wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(consts, dtype=np.float64)
    cdef Py_ssize_t P = Xv.shape[0], D = Xv.shape[1], N = tv.shape[0], nd = Tv.shape[0]
    cdef double st = cv[0], sd = cv[1], cd = cv[2], sw = cv[3], cw = cv[4]
    cdef double rs0 = cv[5], rs1 = cv[6]

    sse_arr = np.zeros((P, 4))
    G_arr = np.zeros((P, D))
    cdef double[:, ::1] sse = sse_arr
    cdef double[:, ::1] G = G_arr
    a_arr = np.empty(H)
    g_arr = np.empty(H)
    cdef double[::1] av = a_arr
    cdef double[::1] gv = g_arr

    cdef Py_ssize_t p, n, h, k = 5 * H + 2
    cdef double m, d, B, sm, sdd, sB, inv
    cdef double z, a, g, y0, y1, dy0, dy1, delta, omega, sdel, F, h0, h1
    cdef double r0, r1, e0, e1, yb0, yb1, db0, db1, wt, wa, vbar, abar, zbar
    cdef double gm, gd, gB

    with nogil:
        for p in range(P):
            m = _softplus(Xv[p, k])
            d = _softplus(Xv[p, k + 1])
            B = _softplus(Xv[p, k + 2])
            sm = _sigmoid(Xv[p, k])
            sdd = _sigmoid(Xv[p, k + 1])
            sB = _sigmoid(Xv[p, k + 2])
            inv = 1.0 / (m * rs1)
            gm = 0.0
            gd = 0.0
            gB = 0.0
            for n in range(N):
                y0 = Xv[p, 5 * H]
                y1 = Xv[p, 5 * H + 1]
                dy0 = 0.0
                dy1 = 0.0
                for h in range(H):
                    wt = Xv[p, 2 * h]
                    z = wt * tv[n] + Xv[p, 2 * h + 1] * pv[n] + Xv[p, 2 * H + h]
                    a = tanh(z)
                    g = 1.0 - a * a
                    av[h] = a
                    gv[h] = g
                    y0 += Xv[p, 3 * H + h] * a
                    y1 += Xv[p, 4 * H + h] * a
                    dy0 += Xv[p, 3 * H + h] * g * wt
                    dy1 += Xv[p, 4 * H + h] * g * wt
                delta = sd * y0 + cd
                omega = sw * y1 + cw
                sdel = sin(delta)
                F = Pv[n] - d * omega - B * sdel
                h0 = (sd * dy0 / st - omega) / rs0
                h1 = (sw * dy1 / st - F / m) / rs1
                sse[p, 2] += h0 * h0
                sse[p, 3] += h1 * h1
                yb0 = 0.0
                yb1 = 0.0
                if n < nd:
                    r0 = y0 - Tv[n, 0]
                    r1 = y1 - Tv[n, 1]
                    sse[p, 0] += r0 * r0
                    sse[p, 1] += r1 * r1
                    yb0 = Wv[p, 0] * r0
                    yb1 = Wv[p, 1] * r1
                if not want_grad:
                    continue
                e0 = Wv[p, 2] * h0
                e1 = Wv[p, 3] * h1
                yb0 += e1 * sd * B * cos(delta) * inv
                yb1 += -e0 * sw / rs0 + e1 * sw * d * inv
                db0 = e0 * sd / (st * rs0)
                db1 = e1 * sw / (st * rs1)
                gm += e1 * F
                gd += e1 * omega
                gB += e1 * sdel
                G[p, 5 * H] += yb0
                G[p, 5 * H + 1] += yb1
                for h in range(H):
                    a = av[h]
                    g = gv[h]
                    wt = Xv[p, 2 * h]
                    G[p, 3 * H + h] += yb0 * a + db0 * g * wt
                    G[p, 4 * H + h] += yb1 * a + db1 * g * wt
                    abar = yb0 * Xv[p, 3 * H + h] + yb1 * Xv[p, 4 * H + h]
                    vbar = db0 * Xv[p, 3 * H + h] + db1 * Xv[p, 4 * H + h]
                    abar -= 2.0 * a * vbar * wt
                    zbar = abar * g
                    G[p, 2 * h] += vbar * g + zbar * tv[n]
                    G[p, 2 * h + 1] += zbar * pv[n]
                    G[p, 2 * H + h] += zbar
            if want_grad:
                G[p, k] = gm * inv / m * sm
                G[p, k + 1] = gd * inv * sdd
                G[p, k + 2] = gB * inv * sB
    return sse_arr, (G_arr if want_grad else None)

"""Vectorised numpy implementation of the particle kernels.

Array conventions shared with the compiled twin (``_ckernels.pyx``):

``X``        (P, D) particle matrix; columns ``[0, 5H+2)`` hold the network,
             ``[5H+2, 5H+5)`` the unconstrained swing parameters ``u``
             with ``(m, d, B) = softplus(u)``.  Further columns are ignored.
``tau, pin`` (N,) normalised time and mechanical-power inputs.
``p_phys``   (N,) mechanical power in physical units.
``targets``  (n_data, 2) normalised measurements of the first ``n_data``
             points.
``consts``   ``[t_scale, d_scale, d_shift, w_scale, w_shift, r0_scale, r1_scale]``
             (residual channel ``k`` is divided by ``r{k}_scale``).
``weights``  (P, 4) per-channel weights for data-delta, data-domega,
             residual-delta, residual-domega.

``sse_grad`` returns the per-channel sums of squares ``(P, 4)`` and the
gradient of ``0.5 * sum_k weights[:, k] * sse[:, k]`` with respect to ``X``.
"""
from __future__ import annotations

import numpy as np


def _unpack(X, H):
    P = X.shape[0]
    W1 = X[:, :2 * H].reshape(P, H, 2)
    b1 = X[:, 2 * H:3 * H]
    W2 = X[:, 3 * H:5 * H].reshape(P, 2, H)
    b2 = X[:, 5 * H:5 * H + 2]
    return W1, b1, W2, b2


def predict(X, H, tau, pin):
    """Network outputs and input-time derivatives, each (P, N, 2)."""
    W1, b1, W2, b2 = _unpack(X, H)
    z = (tau[None, :, None] * W1[:, None, :, 0] + pin[None, :, None] * W1[:, None, :, 1]
         + b1[:, None, :])
    a = np.tanh(z)
    y = np.einsum("pnh,pkh->pnk", a, W2) + b2[:, None, :]
    v = (1.0 - a * a) * W1[:, None, :, 0]
    dy = np.einsum("pnh,pkh->pnk", v, W2)
    return y, dy


def sse_grad(X, H, tau, pin, p_phys, targets, consts, weights, want_grad=True):
    X = np.ascontiguousarray(X, dtype=float)
    P, D = X.shape
    nd = targets.shape[0]
    st, sd, cd, sw, cw, rs0, rs1 = (float(c) for c in consts)
    W1, b1, W2, b2 = _unpack(X, H)
    u = X[:, 5 * H + 2:5 * H + 5]
    lam = np.logaddexp(0.0, u)
    sig = 0.5 * (1.0 + np.tanh(0.5 * u))
    m, d, B = (lam[:, i:i + 1] for i in range(3))

    z = (tau[None, :, None] * W1[:, None, :, 0] + pin[None, :, None] * W1[:, None, :, 1]
         + b1[:, None, :])
    a = np.tanh(z)
    g = 1.0 - a * a
    y = np.einsum("pnh,pkh->pnk", a, W2) + b2[:, None, :]
    v = g * W1[:, None, :, 0]
    dy = np.einsum("pnh,pkh->pnk", v, W2)

    delta = sd * y[..., 0] + cd
    omega = sw * y[..., 1] + cw
    sdel = np.sin(delta)
    F = p_phys[None, :] - d * omega - B * sdel
    h0 = (sd * dy[..., 0] / st - omega) / rs0
    h1 = (sw * dy[..., 1] / st - F / m) / rs1
    rd = y[:, :nd, :] - targets[None, :, :]

    sse = np.empty((P, 4))
    sse[:, 0] = np.einsum("pn,pn->p", rd[..., 0], rd[..., 0])
    sse[:, 1] = np.einsum("pn,pn->p", rd[..., 1], rd[..., 1])
    sse[:, 2] = np.einsum("pn,pn->p", h0, h0)
    sse[:, 3] = np.einsum("pn,pn->p", h1, h1)
    if not want_grad:
        return sse, None

    w = np.asarray(weights, dtype=float)
    e0 = w[:, 2:3] * h0
    e1 = w[:, 3:4] * h1
    ybar = np.zeros_like(y)
    ybar[:, :nd, :] = w[:, None, 0:2] * rd
    ybar[..., 0] += e1 * sd * B * np.cos(delta) / (m * rs1)
    ybar[..., 1] += -e0 * sw / rs0 + e1 * sw * d / (m * rs1)
    dybar = np.empty_like(dy)
    dybar[..., 0] = e0 * sd / (st * rs0)
    dybar[..., 1] = e1 * sw / (st * rs1)

    G = np.zeros((P, D))
    gW1 = G[:, :2 * H].reshape(P, H, 2)
    gW2 = np.einsum("pnk,pnh->pkh", ybar, a) + np.einsum("pnk,pnh->pkh", dybar, v)
    G[:, 3 * H:5 * H] = gW2.reshape(P, 2 * H)
    G[:, 5 * H:5 * H + 2] = ybar.sum(axis=1)
    abar = np.einsum("pnk,pkh->pnh", ybar, W2)
    vbar = np.einsum("pnk,pkh->pnh", dybar, W2)
    gbar = vbar * W1[:, None, :, 0]
    abar -= 2.0 * a * gbar
    zbar = abar * g
    gW1[:, :, 0] = np.einsum("pnh,pnh->ph", vbar, g) + np.einsum("pnh,n->ph", zbar, tau)
    gW1[:, :, 1] = np.einsum("pnh,n->ph", zbar, pin)
    G[:, 2 * H:3 * H] = zbar.sum(axis=1)

    k = 5 * H + 2
    inv = 1.0 / (m * rs1)
    G[:, k] = np.einsum("pn,pn->p", e1, F) * (inv / m)[:, 0] * sig[:, 0]
    G[:, k + 1] = np.einsum("pn,pn->p", e1, omega) * inv[:, 0] * sig[:, 1]
    G[:, k + 2] = np.einsum("pn,pn->p", e1, sdel) * inv[:, 0] * sig[:, 2]
    return sse, G

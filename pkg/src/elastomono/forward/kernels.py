"""Fundamental solution of the background Navier operator and its derivatives.

``Gamma(x) = A(r) I + B(r) rhat rhat^T`` solves
``mu0 Lap G + (lambda0 + mu0) grad div G + rho0 w^2 G = -delta I`` with the
Kupradze radiation condition.
"""

from __future__ import annotations

import numpy as np

from .. import specfun


def _hankel012(x):
    J, Y = specfun.jy_table(x, 2)
    return specfun._complex(J, Y)


def _radial(bg, r):
    """A, B, A', B' on radii ``r`` (any shape)."""
    kp, ks = bg.kp, bg.ks
    c = 1j / (4.0 * bg.rho0 * bg.omega**2)
    hs = _hankel012(ks * r)
    hp = _hankel012(kp * r)
    A = 1j / (4.0 * bg.mu0) * hs[..., 0] + c * (-ks * hs[..., 1] + kp * hp[..., 1]) / r
    B = c * (ks**2 * hs[..., 2] - kp**2 * hp[..., 2])
    dA = -1j * ks / (4.0 * bg.mu0) * hs[..., 1] + B / r
    # H2'(x) = H1(x) - 2 H2(x) / x
    dB = c * (
        ks**3 * (hs[..., 1] - 2.0 * hs[..., 2] / (ks * r))
        - kp**3 * (hp[..., 1] - 2.0 * hp[..., 2] / (kp * r))
    )
    return A, B, dA, dB


def gamma(bg, x):
    """``Gamma(x)`` for offsets ``x`` of shape ``(..., 2)``; result ``(..., 2, 2)``."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    rh = x / r[..., None]
    A, B, _, _ = _radial(bg, r)
    return A[..., None, None] * np.eye(2) + B[..., None, None] * rh[..., :, None] * rh[..., None, :]


def gamma_grad(bg, x):
    """``d_k Gamma_ij(x)`` as an array ``(..., 2, 2, 2)`` indexed ``[..., i, j, k]``."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    rh = x / r[..., None]
    _, B, dA, dB = _radial(bg, r)
    I = np.eye(2)
    rrr = rh[..., :, None, None] * rh[..., None, :, None] * rh[..., None, None, :]
    d_ik_rj = I[:, None, :] * rh[..., None, :, None]
    d_jk_ri = I[None, :, :] * rh[..., :, None, None]
    out = dA[..., None, None, None] * I[:, :, None] * rh[..., None, None, :]
    out = out + dB[..., None, None, None] * rrr
    out = out + (B / r)[..., None, None, None] * (d_ik_rj + d_jk_ri - 2.0 * rrr)
    return out


def self_cell_integral(bg, h):
    """Integral of ``Gamma`` over the disk with the area of an ``h x h`` cell (a multiple of I)."""
    R = h / np.sqrt(np.pi)
    kp, ks = bg.kp, bg.ks
    h1s = specfun.hankel1(1, ks * R)
    h1p = specfun.hankel1(1, kp * R)
    c = 1j / (4.0 * bg.rho0 * bg.omega**2)
    scal = 1j / (4.0 * bg.mu0) * (2.0 * np.pi * R * h1s / ks + 4.0j / ks**2)
    return scal + c * np.pi * R * (-ks * h1s + kp * h1p)


def farfield_constants(bg):
    """``(c_p, c_s)``: the prefactors of the P and S far-field kernels."""
    cp = np.exp(1j * np.pi / 4) / ((bg.lambda0 + 2 * bg.mu0) * np.sqrt(8 * np.pi * bg.kp))
    cs = np.exp(1j * np.pi / 4) / (bg.mu0 * np.sqrt(8 * np.pi * bg.ks))
    return cp, cs


def cell_exponential(k, xhat, h):
    """``int_{[-h/2,h/2]^2} exp(-i k xhat.y) dy`` for unit vectors ``xhat (..., 2)``."""
    t = k * h / (2 * np.pi)
    return h * h * np.sinc(t * xhat[..., 0]) * np.sinc(t * xhat[..., 1])

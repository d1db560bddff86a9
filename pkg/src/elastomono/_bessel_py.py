"""Pure-Python (numpy-vectorised) Bessel kernel.

Same algorithm as the compiled ``_bessel_c`` extension and used whenever that
extension is unavailable.  Works on a 1-D float array of arguments and
returns tables of J_n(x) and Y_n(x) for n = 0..nmax.

Small and moderate arguments (x <= 30): Miller backward recurrence for J
normalised with J_0 + 2 sum J_2k = 1, Neumann series for Y_0 and Y_1, forward
recurrence for Y_n.  Large arguments: Hankel asymptotic expansion for orders
0 and 1, Miller ratios rescaled to the asymptotic J_0 / J_1.
"""

import math

import numpy as np

X_SWITCH = 30.0
EULER_GAMMA = 0.57721566490153286061
_BIG = 1.0e250
_SEED = 1.0e-30


def miller_start(n):
    """Even starting index of the backward recurrence for orders up to ``n``."""
    n = max(int(n), 1)
    m = n + int(math.sqrt(160.0 * n)) + 10
    return m + (m % 2)


def _miller(x, m):
    """Unnormalised minimal solution j_0..j_{m+1} of the Bessel recurrence."""
    nx = x.size
    j = np.zeros((m + 2, nx))
    j[m] = _SEED
    for k in range(m, 0, -1):
        j[k - 1] = (2.0 * k / x) * j[k] - j[k + 1]
        big = np.abs(j[k - 1]) > _BIG
        if big.any():
            cols = np.nonzero(big)[0]
            j[k - 1:, cols] /= _BIG
    return j


def _small(x, nmax):
    m = miller_start(max(nmax, int(x.max()) + 1))
    j = _miller(x, m)
    norm = j[0] + 2.0 * j[2:m + 1:2].sum(axis=0)
    J = j / norm

    kk = np.arange(1, m // 2 + 1, dtype=float)[:, None]
    sgn = np.where(kk % 2 == 0, 1.0, -1.0)
    lg = np.log(0.5 * x) + EULER_GAMMA
    even = J[2:m + 1:2]
    y0 = (2.0 / math.pi) * (lg * J[0] - 2.0 * (sgn * even / kk).sum(axis=0))
    odd_lo = J[1:m:2]
    odd_hi = J[3:m + 2:2]
    y1 = (2.0 / math.pi) * (-J[0] / x + lg * J[1]
                            + (sgn * (odd_lo - odd_hi) / kk).sum(axis=0))
    return J[:nmax + 1], y0, y1


def _asymptotic01(x):
    """J_0, J_1, Y_0, Y_1 from the large-argument Hankel expansion."""
    out = []
    for nu in (0, 1):
        mu = 4.0 * nu * nu
        p = np.ones_like(x)
        q = np.zeros_like(x)
        term = np.ones_like(x)
        prev = np.full_like(x, np.inf)
        active = np.ones(x.shape, dtype=bool)
        for k in range(1, 80):
            term = term * (mu - (2.0 * k - 1.0) ** 2) / (8.0 * k * x)
            mag = np.abs(term)
            active &= mag < prev
            t = np.where(active, term, 0.0)
            if k % 2 == 1:
                q += t * (1.0 if (k // 2) % 2 == 0 else -1.0)
            else:
                p += t * (1.0 if (k // 2) % 2 == 0 else -1.0)
            prev = mag
            if not (active & (mag > 1e-18)).any():
                break
        chi = x - (0.5 * nu + 0.25) * math.pi
        amp = np.sqrt(2.0 / (math.pi * x))
        c, s = np.cos(chi), np.sin(chi)
        out.append((amp * (p * c - q * s), amp * (p * s + q * c)))
    (j0, y0), (j1, y1) = out
    return j0, j1, y0, y1


def _large(x, nmax):
    j0, j1, y0, y1 = _asymptotic01(x)
    J = np.empty((nmax + 1, x.size))
    J[0] = j0
    if nmax >= 1:
        J[1] = j1
    if nmax >= 2:
        m = miller_start(max(nmax, int(x.max()) + 1))
        j = _miller(x, m)
        use0 = np.abs(j0) >= np.abs(j1)
        scale = np.where(use0, j0 / np.where(use0, j[0], 1.0),
                         j1 / np.where(use0, 1.0, j[1]))
        J[2:] = j[2:nmax + 1] * scale
    return J, y0, y1


def _forward_y(y0, y1, x, nmax):
    Y = np.empty((nmax + 1, x.size))
    Y[0] = y0
    if nmax >= 1:
        Y[1] = y1
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, nmax):
            Y[k + 1] = (2.0 * k / x) * Y[k] - Y[k - 1]
    bad = ~np.isfinite(Y)
    if bad.any():
        # once the recurrence overflows the true value is below -DBL_MAX
        bad = np.maximum.accumulate(bad, axis=0)
        Y[bad] = -np.inf
    return Y


def jy_table(x, nmax):
    """Tables ``(J, Y)`` of shape ``(x.size, nmax + 1)`` for 1-D ``x > 0``."""
    x = np.ascontiguousarray(x, dtype=float).ravel()
    J = np.empty((nmax + 1, x.size))
    y0 = np.empty(x.size)
    y1 = np.empty(x.size)
    small = x <= X_SWITCH
    if small.any():
        Js, a, b = _small(x[small], nmax)
        J[:, small], y0[small], y1[small] = Js, a, b
    if (~small).any():
        Jl, a, b = _large(x[~small], nmax)
        J[:, ~small], y0[~small], y1[~small] = Jl, a, b
    Y = _forward_y(y0, y1, x, nmax)
    return np.ascontiguousarray(J.T), np.ascontiguousarray(Y.T)

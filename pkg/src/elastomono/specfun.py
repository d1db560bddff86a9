"""Cylinder functions J_n, Y_n and H_n^(1) for real arguments.

The numerical kernel comes in two builds with the same algorithm: a compiled
Cython extension and a numpy fallback.  The compiled one is selected at import
when it is importable; set ``ELASTOMONO_PURE_PYTHON=1`` to force the fallback,
or call :func:`use_backend` at runtime.

Supported domain: ``1e-6 <= x <= 200`` and ``|n| <= N_MAX``.  Arguments
outside raise :class:`~elastomono.errors.DomainError`.  For very large orders
at tiny arguments Y_n overflows and is returned as ``-inf``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _bessel_py
from .errors import DomainError

N_MAX = 120
X_MIN = 1e-6
X_MAX = 200.0

try:
    from . import _bessel_c
except ImportError:  # extension not built
    _bessel_c = None

_KERNELS = {"python": _bessel_py.jy_table}
if _bessel_c is not None:
    _KERNELS["compiled"] = _bessel_c.jy_table

if os.environ.get("ELASTOMONO_PURE_PYTHON") == "1" or _bessel_c is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"


def available_backends():
    return sorted(_KERNELS)


def use_backend(name):
    """Select the Bessel kernel (``"compiled"`` or ``"python"``); returns the previous one."""
    global BACKEND
    if name not in _KERNELS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    prev, BACKEND = BACKEND, name
    return prev


@dataclass(frozen=True)
class Cyl:
    """J_n(x), Y_n(x) and H_n^(1)(x) = J + iY at a single point."""

    j: float
    y: float

    @property
    def h1(self) -> complex:
        return complex(self.j, self.y)


def _check(n, x):
    if abs(n) > N_MAX:
        raise DomainError(f"order {n} exceeds N_MAX={N_MAX}")
    x = np.asarray(x, dtype=float)
    if x.size and (np.nanmin(x) < X_MIN or np.nanmax(x) > X_MAX or np.isnan(x).any()):
        raise DomainError(f"argument outside [{X_MIN}, {X_MAX}]")
    return x


def jy_table(x, nmax):
    """J_n(x), Y_n(x) for n = 0..nmax; each of shape ``x.shape + (nmax + 1,)``."""
    if nmax < 0:
        raise DomainError("nmax must be non-negative")
    x = _check(nmax, x)
    J, Y = _KERNELS[BACKEND](x.ravel(), int(nmax))
    shape = x.shape + (nmax + 1,)
    return J.reshape(shape), Y.reshape(shape)


def hankel_table(x, nmax):
    """H_n^(1)(x) for n = 0..nmax, shape ``x.shape + (nmax + 1,)``."""
    J, Y = jy_table(x, nmax)
    return _complex(J, Y)


def _complex(re, im):
    # avoids 1j * inf -> nan in the real part
    out = np.empty(re.shape, dtype=complex)
    out.real = re
    out.imag = im
    return out


def cyl_modes(kind, x, order):
    """Z_n(x) for n = -order..order with Z = J (``kind="j"``) or H^(1) (``"h"``).

    Negative orders use Z_{-n} = (-1)^n Z_n.  Result shape ``x.shape + (2*order + 1,)``.
    """
    J, Y = jy_table(x, order)
    if kind == "j":
        Z = J.astype(complex)
    elif kind == "h":
        Z = _complex(J, Y)
    else:
        raise ValueError(f"unknown cylinder function kind {kind!r}")
    sign = (-1.0) ** np.arange(order, 0, -1)
    return np.concatenate([Z[..., :0:-1] * sign, Z], axis=-1)


def bessel_jy(n, x):
    """J_n(x) and Y_n(x) for integer ``n`` (negative via reflection) and scalar ``x``."""
    n = int(n)
    _check(n, x)
    J, Y = jy_table(np.array([float(x)]), abs(n))
    j, y = float(J[0, -1]), float(Y[0, -1])
    if n < 0 and n % 2:
        j, y = -j, -y
    return Cyl(j, y)


def hankel1(n, x):
    """H_n^(1)(x); ``x`` may be a scalar or an array."""
    n = int(n)
    H = hankel_table(x, abs(n))[..., -1]
    if n < 0 and n % 2:
        H = -H
    return complex(H) if np.ndim(H) == 0 else H


def hankel1_deriv(n, x):
    """d/dx H_n^(1)(x) = (H_{n-1} - H_{n+1}) / 2."""
    n = int(n)
    if abs(n) + 1 > N_MAX:
        raise DomainError(f"derivative of order {n} needs order {abs(n) + 1} > N_MAX")
    return 0.5 * (hankel1(n - 1, x) - hankel1(n + 1, x))

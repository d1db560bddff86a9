# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Bessel kernel; mirrors ``_bessel_py`` one argument at a time."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin, fabs, M_PI, INFINITY, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double X_SWITCH = 30.0
cdef double EULER_GAMMA = 0.57721566490153286061
cdef double BIG = 1.0e250
cdef double SEED = 1.0e-30


cdef int _miller_start(int n) nogil:
    if n < 1:
        n = 1
    cdef int m = n + <int>sqrt(160.0 * n) + 10
    return m + (m % 2)


cdef void _miller(double x, int m, double* j) nogil:
    cdef int k, i
    j[m + 1] = 0.0
    j[m] = SEED
    for k in range(m, 0, -1):
        j[k - 1] = (2.0 * k / x) * j[k] - j[k + 1]
        if fabs(j[k - 1]) > BIG:
            for i in range(k - 1, m + 2):
                j[i] /= BIG


cdef void _asym(double x, int nu, double* jv, double* yv) nogil:
    cdef double mu = 4.0 * nu * nu
    cdef double p = 1.0, q = 0.0, term = 1.0, prev = INFINITY, mag, sgn
    cdef int k
    for k in range(1, 80):
        term = term * (mu - (2.0 * k - 1.0) ** 2) / (8.0 * k * x)
        mag = fabs(term)
        if mag >= prev:
            break
        sgn = 1.0 if (k // 2) % 2 == 0 else -1.0
        if k % 2 == 1:
            q += sgn * term
        else:
            p += sgn * term
        prev = mag
        if mag <= 1e-18:
            break
    cdef double chi = x - (0.5 * nu + 0.25) * M_PI
    cdef double amp = sqrt(2.0 / (M_PI * x))
    jv[0] = amp * (p * cos(chi) - q * sin(chi))
    yv[0] = amp * (p * sin(chi) + q * cos(chi))


cdef void _one(double x, int nmax, double* J, double* Y, double* work) nogil:
    cdef int n0 = nmax
    if <int>x + 1 > n0:
        n0 = <int>x + 1
    cdef int m = _miller_start(n0)
    cdef int k, kk
    cdef double norm, lg, s0, s1, sgn, y0, y1, j0, j1, scale
    _miller(x, m, work)
    if x <= X_SWITCH:
        norm = work[0]
        for k in range(2, m + 1, 2):
            norm += 2.0 * work[k]
        for k in range(m + 2):
            work[k] /= norm
        lg = log(0.5 * x) + EULER_GAMMA
        s0 = 0.0
        s1 = 0.0
        for kk in range(1, m // 2 + 1):
            sgn = 1.0 if kk % 2 == 0 else -1.0
            s0 += sgn * work[2 * kk] / kk
            s1 += sgn * (work[2 * kk - 1] - work[2 * kk + 1]) / kk
        y0 = (2.0 / M_PI) * (lg * work[0] - 2.0 * s0)
        y1 = (2.0 / M_PI) * (-work[0] / x + lg * work[1] + s1)
        for k in range(nmax + 1):
            J[k] = work[k]
    else:
        _asym(x, 0, &j0, &y0)
        _asym(x, 1, &j1, &y1)
        if fabs(j0) >= fabs(j1):
            scale = j0 / work[0]
        else:
            scale = j1 / work[1]
        J[0] = j0
        if nmax >= 1:
            J[1] = j1
        for k in range(2, nmax + 1):
            J[k] = work[k] * scale
    Y[0] = y0
    if nmax >= 1:
        Y[1] = y1
    for k in range(1, nmax):
        if isfinite(Y[k]):
            Y[k + 1] = (2.0 * k / x) * Y[k] - Y[k - 1]
            if not isfinite(Y[k + 1]):
                Y[k + 1] = -INFINITY
        else:
            Y[k + 1] = -INFINITY


def jy_table(x, int nmax):
    """Tables ``(J, Y)`` of shape ``(x.size, nmax + 1)`` for 1-D ``x > 0``."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef Py_ssize_t nx = xv.shape[0], i
    J = np.empty((nx, nmax + 1), dtype=np.float64)
    Y = np.empty((nx, nmax + 1), dtype=np.float64)
    cdef double[:, ::1] Jv = J
    cdef double[:, ::1] Yv = Y
    cdef double xmax = 0.0
    for i in range(nx):
        if xv[i] > xmax:
            xmax = xv[i]
    cdef int n0 = nmax
    if <int>xmax + 1 > n0:
        n0 = <int>xmax + 1
    cdef int mcap = _miller_start(n0) + 2
    cdef double* work = <double*> malloc(mcap * sizeof(double))
    if work == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(nx):
                _one(xv[i], nmax, &Jv[i, 0], &Yv[i, 0], work)
    finally:
        free(work)
    return J, Y

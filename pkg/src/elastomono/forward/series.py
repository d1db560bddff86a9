"""Mode-matching series solution for a single homogeneous disk.

Potentials ``u = grad(phi) + (d_y psi, -d_x psi)`` are expanded in cylinder
waves.  Outside the disk the scattered potentials are Hankel series with
coefficients ``A_n`` (P) and ``B_n`` (S); inside, Bessel series with ``C_n``,
``D_n``.  Continuity of displacement and traction at ``r = a`` gives one 4x4
system per angular mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import specfun
from ..errors import DomainError, TransmissionEigenvalueError, TruncationError
from ..medium import Background, Disk, Inclusion, MaterialField, Wavenumbers, wavenumbers
from .waves import Incidence

COND_LIMIT = 1e12
DECAY_TOL = 1e-14
RESIDUAL_TOL = 1e-10
BOUNDARY_GAP = 1e-9


def default_truncation(ka):
    """``ceil(ka + 4 ka^(1/3) + 12)``."""
    return int(math.ceil(ka + 4.0 * ka ** (1.0 / 3.0) + 12.0))


def _basis(kind, k, lam, mu, n, r):
    """Columns ``(u_r, u_theta, s_rr, s_rtheta)`` of the P and S potentials ``Z_n(kr) e^{in theta}``.

    Returns two arrays of shape ``(len(n), 4)`` (the common ``e^{in theta}`` dropped).
    """
    order = int(np.max(np.abs(n))) + 1
    x = k * r
    Z = specfun.cyl_modes(kind, np.array(x), order)
    idx = n + order
    z = Z[idx]
    dz = 0.5 * (Z[idx - 1] - Z[idx + 1])
    ddz = -dz / x - (1.0 - (n / x) ** 2) * z
    p = np.stack(
        [
            k * dz,
            1j * n * z / r,
            -lam * k * k * z + 2 * mu * k * k * ddz,
            2j * mu * n * (k * dz / r - z / r**2),
        ],
        -1,
    )
    s = np.stack(
        [
            1j * n * z / r,
            -k * dz,
            2j * mu * n * (k * dz / r - z / r**2),
            mu * (-(n**2) * z / r**2 - k * k * ddz + k * dz / r),
        ],
        -1,
    )
    return p, s


@dataclass(frozen=True, eq=False)
class SeriesSolution:
    """Modal coefficients of the disk transmission problem (index ``n + M``)."""

    background: Background
    center: tuple
    radius: float
    interior: tuple  # (lambda1, mu1, rho1)
    k_int: Wavenumbers
    M: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    incident: Incidence
    residual: float = 0.0

    @property
    def orders(self):
        return np.arange(-self.M, self.M + 1)

    @property
    def is_trivial(self):
        return not (np.any(self.A) or np.any(self.B))


def _as_disk(background, inclusion):
    if isinstance(inclusion, MaterialField):
        if inclusion.background != background:
            raise DomainError("background of the field differs from the given one")
        if inclusion.is_background:
            return None
        inclusion = inclusion.single_disk()
        if inclusion is None:
            raise DomainError("series backend needs exactly one active disk inclusion")
    if inclusion is None or not inclusion.active:
        return None
    if not isinstance(inclusion.shape, Disk):
        raise DomainError("series backend only handles disk inclusions")
    return inclusion


def solve_disk(background: Background, inclusion, inc, M=None) -> SeriesSolution:
    """Solve the transmission problem for one disk and a plane-wave (or superposed) incidence.

    Parameters
    ----------
    background : Background
    inclusion : Inclusion or MaterialField
        A disk inclusion, or a field holding at most one active disk.
        Off-centre disks are handled by expanding about the disk centre.
    inc : PlaneWave or Incidence
    M : int, optional
        Truncation order; defaults to :func:`default_truncation` of the largest
        shear size parameter.

    Raises
    ------
    TransmissionEigenvalueError
        If a modal system is numerically singular.
    TruncationError
        If the scattered coefficients have not decayed by order ``M``.
    """
    inc = Incidence.of(inc)
    disk = _as_disk(background, inclusion)
    if disk is None:
        M = 0 if M is None else int(M)
        z = np.zeros(2 * M + 1, dtype=complex)
        a, b = inc.potential_coefficients(background, M)
        return SeriesSolution(background, (0.0, 0.0), 0.0,
                              (background.lambda0, background.mu0, background.rho0),
                              background.k, M, z, z.copy(), a, b, inc)

    shape = disk.shape
    a_rad = float(shape.radius)
    lam1 = background.lambda0 + disk.psi_lambda
    mu1 = background.mu0 + disk.psi_mu
    rho1 = background.rho0 - disk.psi_rho
    k1 = wavenumbers(lam1, mu1, rho1, background.omega)
    if M is None:
        M = default_truncation(max(background.ks, k1.ks) * a_rad)
    M = int(M)
    if M + 3 > specfun.N_MAX:
        raise DomainError(f"truncation order {M} too large for the Bessel kernel")

    n = np.arange(-M, M + 1)
    bg = background
    pJ0, _ = _basis("j", bg.kp, bg.lambda0, bg.mu0, n, a_rad)
    pH0, _ = _basis("h", bg.kp, bg.lambda0, bg.mu0, n, a_rad)
    _, sJ0 = _basis("j", bg.ks, bg.lambda0, bg.mu0, n, a_rad)
    _, sH0 = _basis("h", bg.ks, bg.lambda0, bg.mu0, n, a_rad)
    pJ1, _ = _basis("j", k1.kp, lam1, mu1, n, a_rad)
    _, sJ1 = _basis("j", k1.ks, lam1, mu1, n, a_rad)

    ai, bi = inc.potential_coefficients(bg, M, shape.center)
    mats = np.stack([pH0, sH0, -pJ1, -sJ1], -1)  # (modes, 4 rows, 4 cols)
    rhs = -(ai[:, None] * pJ0 + bi[:, None] * sJ0)
    scale = np.linalg.norm(mats, axis=1)  # column norms
    ms = mats / scale[:, None, :]

    sol = np.empty((n.size, 4), dtype=complex)
    worst = 0.0
    for m in range(n.size):
        cond = np.linalg.cond(ms[m])
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise TransmissionEigenvalueError(int(n[m]), float(cond))
        y = np.linalg.solve(ms[m], rhs[m])
        res = np.linalg.norm(ms[m] @ y - rhs[m]) / max(
            np.linalg.norm(rhs[m]) + np.linalg.norm(ms[m], 2) * np.linalg.norm(y), 1e-300
        )
        worst = max(worst, res)
        sol[m] = y / scale[m]
    if worst > RESIDUAL_TOL:
        raise TransmissionEigenvalueError(-1, worst)

    A, B, C, D = sol.T
    # decay check on far-field weighted magnitudes
    ffp = np.abs(A) * math.sqrt(bg.kp)
    ffs = np.abs(B) * math.sqrt(bg.ks)
    peak = max(ffp.max(), ffs.max())
    if peak > 0:
        tail = max(ffp[0], ffp[-1], ffs[0], ffs[-1])
        if tail > DECAY_TOL * peak:
            raise TruncationError(
                f"series coefficients at order {M} are {tail / peak:.2e} of the peak; increase M"
            )
    return SeriesSolution(bg, tuple(map(float, shape.center)), a_rad, (lam1, mu1, rho1), k1, M,
                          A, B, C, D, inc, float(worst))


# -- evaluation helpers


def _dx(c, k):
    p = np.pad(c, 2)
    return 0.5 * k * (p[2:] - p[:-2])


def _dy(c, k):
    p = np.pad(c, 2)
    return 0.5j * k * (p[:-2] + p[2:])


def _potential_derivs(c, k):
    """Coefficient arrays of ``(f_x, f_y, f_xx, f_xy, f_yy)`` padded to a common order (+2)."""
    fx, fy = _dx(c, k), _dy(c, k)
    fxx, fxy, fyy = _dx(fx, k), _dy(fx, k), _dy(fy, k)
    return np.pad(fx, 1), np.pad(fy, 1), fxx, fxy, fyy


def _modal_sum(kind, k, r, theta, coeffs_list, order):
    x = np.maximum(k * r, specfun.X_MIN)
    Z = specfun.cyl_modes(kind, x, order)
    E = Z * np.exp(1j * np.outer(theta, np.arange(-order, order + 1)))
    return [E @ c for c in coeffs_list]


def _region_fields(kind, kp, ks, cp, cs, r, theta):
    """Displacement and gradient from P/S potential coefficients about the local origin."""
    order = (cp.size - 1) // 2 + 2
    px, py, pxx, pxy, pyy = _modal_sum(kind, kp, r, theta, _potential_derivs(cp, kp), order)
    sx, sy, sxx, sxy, syy = _modal_sum(kind, ks, r, theta, _potential_derivs(cs, ks), order)
    u = np.stack([px + sy, py - sx], -1)
    g = np.empty(r.shape + (2, 2), dtype=complex)
    g[:, 0, 0] = pxx + sxy
    g[:, 0, 1] = pxy + syy
    g[:, 1, 0] = pxy - sxx
    g[:, 1, 1] = pyy - sxy
    return u, g


def series_fields(sol: SeriesSolution, points, part="total", region=None):
    """Displacement ``(n, 2)`` and gradient ``(n, 2, 2)`` at points ``(n, 2)``.

    ``region`` may force the ``"inside"`` (Bessel) or ``"outside"`` (Hankel plus
    incident) expansion regardless of where the points lie; both continue
    analytically across the boundary, which quadrature over cut cells relies on.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    bg = sol.background
    u = np.zeros(pts.shape[:-1] + (2,), dtype=complex)
    g = np.zeros(pts.shape[:-1] + (2, 2), dtype=complex)
    rel = pts - np.asarray(sol.center)
    r = np.hypot(rel[:, 0], rel[:, 1])
    theta = np.arctan2(rel[:, 1], rel[:, 0])
    if region is None:
        if sol.radius > 0 and np.any(np.abs(r - sol.radius) < BOUNDARY_GAP):
            raise DomainError("evaluation point within 1e-9 of the disk boundary")
        inside = r < sol.radius
    elif region in ("inside", "outside"):
        inside = np.full(r.shape, region == "inside" and sol.radius > 0)
    else:
        raise ValueError(f"unknown region {region!r}")
    out = ~inside
    if part not in ("total", "scattered", "incident"):
        raise ValueError(f"unknown field part {part!r}")
    if part in ("total", "incident") and out.any():
        ui, gi = sol.incident.fields(bg, pts[out])
        u[out] += ui
        g[out] += gi
    if part == "incident" and inside.any():
        ui, gi = sol.incident.fields(bg, pts[inside])
        u[inside] += ui
        g[inside] += gi
    if part in ("total", "scattered") and out.any() and not sol.is_trivial:
        us, gs = _region_fields("h", bg.kp, bg.ks, sol.A, sol.B, r[out], theta[out])
        u[out] += us
        g[out] += gs
    if inside.any() and part != "incident":
        k1 = sol.k_int
        ut, gt = _region_fields("j", k1.kp, k1.ks, sol.C, sol.D, r[inside], theta[inside])
        if part == "scattered":
            ui, gi = sol.incident.fields(bg, pts[inside])
            ut, gt = ut - ui, gt - gi
        u[inside] += ut
        g[inside] += gt
    return u, g


def series_far_field(sol: SeriesSolution, angles):
    """``(u_p^inf, u_s^inf)`` at observation angles."""
    th = np.asarray(angles, dtype=float)
    bg = sol.background
    if sol.is_trivial:
        z = np.zeros(th.shape, dtype=complex)
        return z, z.copy()
    n = sol.orders
    E = np.exp(1j * np.outer(th, n)) * (-1j) ** n
    up = math.sqrt(2 * bg.kp / math.pi) * np.exp(1j * math.pi / 4) * (E @ sol.A)
    us = -math.sqrt(2 * bg.ks / math.pi) * np.exp(1j * math.pi / 4) * (E @ sol.B)
    c = np.asarray(sol.center)
    if np.any(c):
        proj = c[0] * np.cos(th) + c[1] * np.sin(th)
        up = up * np.exp(-1j * bg.kp * proj)
        us = us * np.exp(-1j * bg.ks * proj)
    return up, us

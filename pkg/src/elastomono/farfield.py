"""Discrete Herglotz operator, far-field operator and scattering operator.

Densities ``g = (g_p, g_s)`` are sampled on ``N`` equispaced directions and
stacked as a vector of length ``2N`` (P block first).  The density space
carries the weighted inner product

    <g, h> = sum_j w rho0 w/kp0 g_p h_p^*  +  w rho0 w/ks0 g_s h_s^*,

``w = 2 pi / N``.  All adjoints are taken with respect to it.  Internally the
operators are conjugated by ``W^(1/2)`` so that the weighted adjoint becomes
the ordinary conjugate transpose ("tilde" coordinates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import DomainError, GridMismatchError
from .forward import GridOperator, Incidence, PlaneWave, far_field, solve_disk
from .medium import Background, Disk, Inclusion, MaterialField

DEFAULT_LADDER = (32, 64, 128)
BLOCKS = ("pp", "ps", "sp", "ss")  # (response channel, incidence channel)


@dataclass(frozen=True)
class DirectionGrid:
    N: int

    def __post_init__(self):
        if self.N < 8 or self.N % 2:
            raise DomainError(f"direction count must be even and >= 8, got {self.N}")

    @property
    def angles(self):
        return 2 * np.pi * np.arange(self.N) / self.N

    @property
    def weight(self):
        return 2 * np.pi / self.N

    @property
    def directions(self):
        a = self.angles
        return np.stack([np.cos(a), np.sin(a)], -1)


@dataclass(frozen=True, eq=False)
class HerglotzDensity:
    gp: np.ndarray
    gs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gp", np.asarray(self.gp, dtype=complex))
        object.__setattr__(self, "gs", np.asarray(self.gs, dtype=complex))
        if self.gp.shape != self.gs.shape or self.gp.ndim != 1:
            raise DomainError("g_p and g_s must be 1-D arrays of equal length")

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v)
        n = v.size // 2
        return cls(v[:n], v[n:])

    @property
    def vector(self):
        return np.concatenate([self.gp, self.gs])

    @property
    def N(self):
        return self.gp.size

    def _check(self, grid):
        if self.N != grid.N:
            raise GridMismatchError(f"density has {self.N} samples, grid has {grid.N}")


def channel_weights(grid: DirectionGrid, bg: Background):
    """Diagonal of the weight matrix: ``w rho0 omega / k_t0`` per P/S sample."""
    w = grid.weight * bg.rho0 * bg.omega
    return np.concatenate([np.full(grid.N, w / bg.kp), np.full(grid.N, w / bg.ks)])


def inner(g: HerglotzDensity, h: HerglotzDensity, grid: DirectionGrid, bg: Background):
    """Weighted inner product ``<g, h>`` (linear in ``g``)."""
    g._check(grid)
    h._check(grid)
    w = channel_weights(grid, bg)
    a, b = g.vector, h.vector
    # split real/imaginary parts so that <g, g> is exactly real
    re = np.sum(w * (a.real * b.real + a.imag * b.imag))
    im = np.sum(w * (a.imag * b.real - a.real * b.imag))
    return complex(re, im)


def herglotz_incidence(g: HerglotzDensity, grid: DirectionGrid, bg: Background) -> Incidence:
    """The Herglotz wave ``v_g`` as a superposition of plane waves."""
    g._check(grid)
    ph = np.exp(-1j * math.pi / 4) * grid.weight
    amps = np.concatenate([ph * math.sqrt(bg.kp / bg.omega) * g.gp,
                           ph * math.sqrt(bg.ks / bg.omega) * g.gs])
    modes = ["P"] * grid.N + ["S"] * grid.N
    return Incidence.superpose(modes, np.concatenate([grid.angles, grid.angles]), amps)


def herglotz(g: HerglotzDensity, grid: DirectionGrid, bg: Background, points):
    """``v_g`` and its gradient at ``points (n, 2)``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] < 1:
        raise DomainError("need at least one evaluation point")
    return herglotz_incidence(g, grid, bg).fields(bg, pts)


@dataclass(frozen=True, eq=False)
class FarFieldOperator:
    """``2N x 2N`` matrix ``[[F_pp, F_ps], [F_sp, F_ss]]`` (rows: response, cols: incidence)."""

    matrix: np.ndarray
    background: Background
    grid: DirectionGrid

    def __post_init__(self):
        n = 2 * self.grid.N
        if self.matrix.shape != (n, n):
            raise GridMismatchError(f"matrix shape {self.matrix.shape} does not match 2N={n}")
        if not np.isfinite(self.matrix).all():
            raise DomainError("far-field operator has non-finite entries")

    def block(self, name):
        q, t = "ps".index(name[0]), "ps".index(name[1])
        N = self.grid.N
        return self.matrix[q * N:(q + 1) * N, t * N:(t + 1) * N]

    F_pp = property(lambda self: self.block("pp"))
    F_ps = property(lambda self: self.block("ps"))
    F_sp = property(lambda self: self.block("sp"))
    F_ss = property(lambda self: self.block("ss"))

    @property
    def weights(self):
        return channel_weights(self.grid, self.background)

    @property
    def tilde(self):
        """``W^(1/2) F W^(-1/2)``."""
        s = np.sqrt(self.weights)
        return s[:, None] * self.matrix / s[None, :]

    def apply(self, g: HerglotzDensity) -> HerglotzDensity:
        g._check(self.grid)
        return HerglotzDensity.from_vector(self.matrix @ g.vector)

    def scaled(self, sigma):
        return FarFieldOperator(sigma * self.matrix, self.background, self.grid)

    def compatible(self, other):
        if self.grid != other.grid or self.background != other.background:
            raise GridMismatchError("operators live on different grids or backgrounds")

    # -- serialization

    def to_csv(self, path):
        bg, N = self.background, self.grid.N
        lines = ["N,omega,lambda0,mu0,rho0",
                 ",".join([str(N)] + [repr(float(v)) for v in
                                      (bg.omega, bg.lambda0, bg.mu0, bg.rho0)]),
                 "block,i,j,re,im"]
        for name in BLOCKS:
            B = self.block(name)
            for i in range(N):
                row = B[i]
                lines.extend(f"{name},{i},{j},{float(z.real)!r},{float(z.imag)!r}"
                             for j, z in enumerate(row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            lines = fh.read().splitlines()
        if lines[0] != "N,omega,lambda0,mu0,rho0" or lines[2] != "block,i,j,re,im":
            raise DomainError(f"{path}: not a far-field operator file")
        vals = lines[1].split(",")
        N = int(vals[0])
        omega, lam, mu, rho = map(float, vals[1:])
        grid = DirectionGrid(N)
        M = np.zeros((2 * N, 2 * N), dtype=complex)
        seen = 0
        for ln in lines[3:]:
            if not ln:
                continue
            b, i, j, re, im = ln.split(",")
            q, t = "ps".index(b[0]), "ps".index(b[1])
            M[q * N + int(i), t * N + int(j)] = complex(float(re), float(im))
            seen += 1
        if seen != 4 * N * N:
            raise DomainError(f"{path}: expected {4 * N * N} entries, found {seen}")
        return cls(M, Background(lam, mu, rho, omega), grid)


def _column_scale(bg, mode, grid):
    k = bg.kp if mode == "P" else bg.ks
    return np.exp(-1j * math.pi / 4) * grid.weight * math.sqrt(k / bg.omega)


def _origin_disk_operator(bg, inclusion, grid, M=None):
    """``F`` for a disk centred at the origin: two solves, columns by rotation."""
    N = grid.N
    F = np.zeros((2 * N, 2 * N), dtype=complex)
    for t, mode in enumerate("PS"):
        sol = solve_disk(bg, inclusion, PlaneWave(mode, 0.0), M=M)
        p = far_field(sol, grid)
        col = np.concatenate([p.up, p.us]) * _column_scale(bg, mode, grid)
        for j in range(N):
            # entries depend on theta_i - theta_j only
            F[:N, t * N + j] = np.roll(col[:N], j)
            F[N:, t * N + j] = np.roll(col[N:], j)
    return F


def translate(F0: FarFieldOperator, z) -> FarFieldOperator:
    """Far-field operator of the scatterer shifted by ``z``.

    ``(F_z)_qt(x, d) = exp(-i k_q x.z) (F_0)_qt(x, d) exp(i k_t d.z)``.
    """
    z = np.asarray(z, dtype=float)
    if not np.any(z):
        return F0
    bg = F0.background
    proj = F0.grid.directions @ z
    k = np.concatenate([np.full(F0.grid.N, bg.kp), np.full(F0.grid.N, bg.ks)])
    ph = np.exp(1j * k * np.concatenate([proj, proj]))
    return FarFieldOperator(np.conj(ph)[:, None] * F0.matrix * ph[None, :], bg, F0.grid)


def assemble(field: MaterialField, grid: DirectionGrid, backend="auto", h=None, M=None,
             threads=1) -> FarFieldOperator:
    """Far-field operator of ``field`` from ``2N`` plane-wave solves.

    Parameters
    ----------
    backend : {"auto", "series", "grid"}
        ``"auto"`` uses the series for a single active disk and the grid solver otherwise.
    h : float, optional
        Grid cell size; default gives 16 cells per shortest shear wavelength.
    threads : int
        Worker threads for the grid solves.
    """
    bg = field.background
    N = grid.N
    if field.is_background:
        return FarFieldOperator(np.zeros((2 * N, 2 * N), dtype=complex), bg, grid)
    disk = field.single_disk()
    if backend == "auto":
        backend = "series" if disk is not None else "grid"
    if backend == "series":
        if disk is None:
            raise DomainError("series backend needs a single active disk")
        origin = Inclusion(Disk((0.0, 0.0), disk.shape.radius), *disk.contrast)
        F0 = FarFieldOperator(_origin_disk_operator(bg, origin, grid, M), bg, grid)
        return translate(F0, disk.shape.center)
    if backend != "grid":
        raise DomainError(f"unknown backend {backend!r}")
    if h is None:
        h = default_cell_size(field)
    op = GridOperator(field, h)
    incs = [PlaneWave(m, a) for m in "PS" for a in grid.angles]
    sols = op.solve_many(incs, threads=threads)
    F = np.empty((2 * N, 2 * N), dtype=complex)
    for c, (inc, sol) in enumerate(zip(incs, sols)):
        p = far_field(sol, grid)
        F[:, c] = np.concatenate([p.up, p.us]) * _column_scale(bg, inc.mode, grid)
    return FarFieldOperator(F, bg, grid)


def default_cell_size(field: MaterialField):
    from .medium import wavenumbers

    bg = field.background
    k = bg.ks
    for inc in field.active_inclusions:
        k = max(k, wavenumbers(bg.lambda0 + inc.psi_lambda, bg.mu0 + inc.psi_mu,
                               bg.rho0 - inc.psi_rho, bg.omega).ks)
    return 2 * np.pi / k / 16


# -- scattering operator


@dataclass(frozen=True, eq=False)
class ScatteringOperator:
    """``S = I + i sqrt(omega / 2 pi) F`` in tilde coordinates."""

    matrix: np.ndarray
    weights: np.ndarray

    @property
    def adjoint(self):
        return self.matrix.conj().T

    def apply(self, g):
        return self.matrix @ g

    def apply_adjoint(self, g):
        return self.adjoint @ g

    def defect(self):
        n = self.matrix.shape[0]
        return float(np.linalg.norm(self.adjoint @ self.matrix - np.eye(n), 2))


def scattering(F: FarFieldOperator, sigma=1.0) -> ScatteringOperator:
    n = F.matrix.shape[0]
    S = np.eye(n) + 1j * math.sqrt(F.background.omega / (2 * math.pi)) * sigma * F.tilde
    return ScatteringOperator(S, F.weights)


def unitarity_defect(F: FarFieldOperator, sigma=1.0):
    """``||S^# S - I||_2``."""
    return scattering(F, sigma).defect()


def calibrate_sigma(F: FarFieldOperator, bounds=(0.5, 2.0)):
    """Scalar ``sigma`` minimizing the unitarity defect of ``I + i sqrt(w/2pi) sigma F``.

    Returns ``(sigma, defect_at_sigma)``; for an empty operator ``(1.0, 0.0)``.
    """
    if not np.any(F.matrix):
        return 1.0, 0.0
    res = scipy.optimize.minimize_scalar(lambda s: unitarity_defect(F, s), bounds=bounds,
                                         method="bounded", options={"xatol": 1e-10})
    return float(res.x), float(res.fun)


def ladder(field, Ns=DEFAULT_LADDER, **kw):
    """Assemble ``F`` for each ``N`` of a refinement ladder."""
    return {N: assemble(field, DirectionGrid(N), **kw) for N in Ns}

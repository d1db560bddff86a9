"""Volume integral equation solver on a uniform Cartesian grid.

Unknowns live at cell centres of a lattice anchored at integer multiples of
``h``.  The contrast of each cell is weighted by the fraction of the cell
covered by the inclusion.  With piecewise-constant sources per cell the
integral operator becomes a discrete convolution; it is applied by FFT.

Source terms per cell: ``s = w^2 (rho - rho0) u`` and the stress contrast
``tau = (lambda - lambda0) div(u) I + 2 (mu - mu0) eps(u)``.  The displacement
satisfies ``u = u_in + G*s - Q*tau`` where ``G`` is the cell integral of Gamma
and ``Q`` is the cell-boundary integral ``oint Gamma nu ds`` (divergence
theorem).  Derivatives of the potentials are again edge integrals, so the
strain equation needs no hypersingular quadrature.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.sparse.linalg as spla

from ..errors import ConvergenceError, DomainError, UnderResolvedError
from ..medium import MaterialField, wavenumbers
from . import kernels
from .waves import Incidence

GMRES_TOL = 1e-9
RESIDUAL_TOL = 1e-8
MAX_ITER = 500
RESTART = 60
DENSE_LIMIT = 3000
CELLS_PER_WAVELENGTH = 10
PAD = 1

# component order of the stress contrast
_TAU = ((0, 0), (1, 1), (0, 1))


def _gauss(q):
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * x, 0.5 * w


def _edges(h, q):
    """Edge nodes (relative to the cell centre), outward normals and weights of a square cell."""
    t, w = _gauss(q)
    t, w = t * h, w * h
    half = np.full_like(t, h / 2)
    pts = np.concatenate([
        np.stack([half, t], -1), np.stack([-half, t], -1),
        np.stack([t, half], -1), np.stack([t, -half], -1),
    ])
    nrm = np.repeat(np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1]]), q, axis=0)
    return pts, nrm, np.tile(w, 4)


def _cell_nodes(h, q):
    t, w = _gauss(q)
    X, Y = np.meshgrid(t * h, t * h, indexing="ij")
    W = np.outer(w, w) * h * h
    return np.stack([X.ravel(), Y.ravel()], -1), W.ravel()


def _edge_integrals(bg, D, h, q, with_grad):
    """``Q[..., i, j, k] = oint Gamma_ij(D - e) nu_k`` and ``P[..., i, j, l, k] = oint d_l Gamma_ij nu_k``."""
    e, nu, w = _edges(h, q)
    X = D[:, None, :] - e[None]
    G = kernels.gamma(bg, X)  # (n, m, 2, 2)
    Q = np.einsum("nmij,mk,m->nijk", G, nu, w)
    if not with_grad:
        return Q, None
    dG = kernels.gamma_grad(bg, X)  # (n, m, i, j, l)
    P = np.einsum("nmijl,mk,m->nijlk", dG, nu, w)
    return Q, P


def _chunked(fn, D, chunk=20000):
    outs = [fn(D[i:i + chunk]) for i in range(0, len(D), chunk)]
    return tuple(np.concatenate(parts) if parts[0] is not None else None for parts in zip(*outs))


@lru_cache(maxsize=4)
def _offset_tables(bg, h, nx, ny, with_grad):
    """Kernel tables over all cell offsets ``(2nx-1, 2ny-1)``."""
    di = np.arange(-(nx - 1), nx)
    dj = np.arange(-(ny - 1), ny)
    I, J = np.meshgrid(di, dj, indexing="ij")
    D = np.stack([I.ravel() * h, J.ravel() * h], -1).astype(float)
    near = (np.abs(I.ravel()) <= 2) & (np.abs(J.ravel()) <= 2)
    centre = (I.ravel() == 0) & (J.ravel() == 0)

    def edge(q):
        return lambda d: _edge_integrals(bg, d, h, q, with_grad)

    Q = np.empty((D.shape[0], 2, 2, 2), dtype=complex)
    P = np.empty((D.shape[0], 2, 2, 2, 2), dtype=complex) if with_grad else None
    q_far, p_far = _chunked(edge(6), D[~near], chunk=max(1, 200000 // 24))
    q_near, p_near = _chunked(edge(16), D[near], chunk=2000)
    Q[~near], Q[near] = q_far, q_near
    if with_grad:
        P[~near], P[near] = p_far, p_near

    # cell integrals of Gamma: Gauss product away from the centre, equal-area disk on it
    G = np.empty((D.shape[0], 2, 2), dtype=complex)
    nodes_far, wf = _cell_nodes(h, 3)
    nodes_near, wn = _cell_nodes(h, 10)
    far = ~near

    def cell(nodes, wts):
        return lambda d: (np.einsum("nmij,m->nij", kernels.gamma(bg, d[:, None, :] - nodes[None]), wts),)

    G[far] = _chunked(cell(nodes_far, wf), D[far], chunk=20000)[0]
    nn = near & ~centre
    G[nn] = _chunked(cell(nodes_near, wn), D[nn], chunk=2000)[0]
    G[centre] = kernels.self_cell_integral(bg, h) * np.eye(2)
    shape = (2 * nx - 1, 2 * ny - 1)
    return (G.reshape(shape + (2, 2)), Q.reshape(shape + (2, 2, 2)),
            None if P is None else P.reshape(shape + (2, 2, 2, 2)))


def _kernel_stack(G, Q, P):
    """Convolution kernels ``K[out, src]`` with sources ``(s_x, s_y, tau_xx, tau_yy, tau_xy)``.

    Outputs: ``u_x, u_y`` then ``d_l u_i`` ordered ``(i, l) = (0,0), (0,1), (1,0), (1,1)``.
    """
    shp = G.shape[:2]
    K = np.zeros((6, 5) + shp, dtype=complex)
    for i in range(2):
        for j in range(2):
            K[i, j] = G[..., i, j]
        K[i, 2] = -Q[..., i, 0, 0]
        K[i, 3] = -Q[..., i, 1, 1]
        K[i, 4] = -(Q[..., i, 0, 1] + Q[..., i, 1, 0])
    for i in range(2):
        for l in range(2):
            o = 2 + 2 * i + l
            for j in range(2):
                K[o, j] = -Q[..., i, j, l]
            if P is not None:
                K[o, 2] = -P[..., i, 0, l, 0]
                K[o, 3] = -P[..., i, 1, l, 1]
                K[o, 4] = -(P[..., i, 0, l, 1] + P[..., i, 1, l, 0])
    return K


class GridOperator:
    """Discretized integral operator for one material field and cell size.

    Construct once and call :meth:`solve` for each incidence; the kernel FFTs
    and (for small systems) the LU factorization are shared.
    """

    def __init__(self, field: MaterialField, h: float, pad: int = PAD, workers: int = 1):
        if not h > 0:
            raise DomainError("cell size must be positive")
        self.field = field
        self.bg = bg = field.background
        self.h = h = float(h)
        self.workers = workers
        act = field.active_inclusions
        self.lame = any(inc.psi_lambda or inc.psi_mu for inc in act)
        self.empty = not act
        if self.empty:
            self.shape = (0, 0)
            self.origin = (0, 0)
            return
        kmax = bg.ks
        for inc in act:
            lam = bg.lambda0 + inc.psi_lambda
            mu = bg.mu0 + inc.psi_mu
            rho = bg.rho0 - inc.psi_rho
            kmax = max(kmax, wavenumbers(lam, mu, rho, bg.omega).ks)
        cells = 2 * math.pi / kmax / h
        if cells < CELLS_PER_WAVELENGTH:
            raise UnderResolvedError(
                f"h={h:g} gives {cells:.1f} cells per shear wavelength, need {CELLS_PER_WAVELENGTH}"
            )
        lo = np.min([inc.shape.bbox()[0] for inc in act], axis=0)
        hi = np.max([inc.shape.bbox()[1] for inc in act], axis=0)
        i0 = np.floor(lo / h - 1e-9).astype(int) - pad
        i1 = np.ceil(hi / h + 1e-9).astype(int) + pad
        self.origin = (int(i0[0]), int(i0[1]))
        nx, ny = int(i1[0] - i0[0]), int(i1[1] - i0[1])
        self.shape = (nx, ny)
        xs = (np.arange(nx) + self.origin[0] + 0.5) * h
        ys = (np.arange(ny) + self.origin[1] + 0.5) * h
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        self.centers = np.stack([X, Y], -1)

        # fraction-weighted contrasts per cell
        drho = np.zeros((nx, ny))
        dlam = np.zeros((nx, ny))
        dmu = np.zeros((nx, ny))
        for inc in act:
            f = inc.shape.coverage(self.centers, h)
            drho += f * inc.psi_rho * -1.0
            dlam += f * inc.psi_lambda
            dmu += f * inc.psi_mu
        self.drho, self.dlam, self.dmu = drho, dlam, dmu
        self.coverage = np.clip(
            sum(inc.shape.coverage(self.centers, h) for inc in act), 0.0, 1.0
        )
        self.active = (drho != 0) | (dlam != 0) | (dmu != 0)
        self.n_active = int(self.active.sum())

        G, Q, P = _offset_tables(bg, h, nx, ny, self.lame)
        K = _kernel_stack(G, Q, P)
        self.fshape = (2 * nx, 2 * ny)
        self._Khat = scipy.fft.fft2(K, s=self.fshape, axes=(-2, -1), workers=workers)
        self.n_comp = 5 if self.lame else 2
        self._lu = None
        self.n_unknowns = self.n_comp * self.n_active
        if self.n_unknowns <= DENSE_LIMIT:
            self._lu = scipy.linalg.lu_factor(self._dense_matrix())

    # -- operator pieces

    def _sources(self, comps):
        """Sources ``(5, nx, ny)`` from unknown components on the full grid ``(n_comp, nx, ny)``."""
        w2 = self.bg.omega**2
        src = np.zeros((5,) + self.shape, dtype=complex)
        src[0] = w2 * self.drho * comps[0]
        src[1] = w2 * self.drho * comps[1]
        if self.lame:
            exx, eyy, exy = comps[2], comps[3], comps[4]
            tr = exx + eyy
            src[2] = self.dlam * tr + 2 * self.dmu * exx
            src[3] = self.dlam * tr + 2 * self.dmu * eyy
            src[4] = 2 * self.dmu * exy
        return src

    def _convolve(self, src, outputs):
        nx, ny = self.shape
        sh = scipy.fft.fft2(src, s=self.fshape, axes=(-2, -1), workers=self.workers)
        acc = np.einsum("os...,s...->o...", self._Khat[outputs], sh)
        full = scipy.fft.ifft2(acc, axes=(-2, -1), workers=self.workers)
        return full[:, nx - 1:2 * nx - 1, ny - 1:2 * ny - 1]

    def _strain(self, d):
        # d ordered (d_x u_x, d_y u_x, d_x u_y, d_y u_y)
        return np.stack([d[0], d[3], 0.5 * (d[1] + d[2])])

    def _potential(self, comps):
        """``K(comps)`` in unknown layout ``(n_comp, nx, ny)``."""
        src = self._sources(comps)
        if self.lame:
            out = self._convolve(src, slice(0, 6))
            return np.concatenate([out[:2], self._strain(out[2:])])
        return self._convolve(src[:2], (slice(0, 2), slice(0, 2)))

    def _scatter(self, vec):
        comps = np.zeros((self.n_comp,) + self.shape, dtype=complex)
        comps[:, self.active] = vec.reshape(self.n_comp, -1)
        return comps

    def _matvec(self, vec):
        return vec - self._potential(self._scatter(vec))[:, self.active].ravel()

    def _dense_matrix(self):
        n = self.n_unknowns
        eye = np.eye(n, dtype=complex)
        return np.stack([self._matvec(eye[:, c]) for c in range(n)], axis=1)

    # -- public

    def incident_unknowns(self, inc):
        u, g = inc.fields(self.bg, self.centers)
        comps = [u[..., 0], u[..., 1]]
        if self.lame:
            comps += [g[..., 0, 0], g[..., 1, 1], 0.5 * (g[..., 0, 1] + g[..., 1, 0])]
        return np.stack(comps)

    def solve(self, inc) -> "GridSolution":
        inc = Incidence.of(inc)
        if self.empty:
            return GridSolution(self.field, inc, self.h, (0, 0), (0, 0), None, None, None, None,
                                None, False, 0, 0.0)
        rhs_full = self.incident_unknowns(inc)
        rhs = rhs_full[:, self.active].ravel()
        iters = 0
        if self._lu is not None:
            x = scipy.linalg.lu_solve(self._lu, rhs)
        else:
            op = spla.LinearOperator((rhs.size, rhs.size), matvec=self._matvec, dtype=complex)
            count = [0]

            def cb(_):
                count[0] += 1

            x, info = spla.gmres(op, rhs, rtol=GMRES_TOL, atol=0.0, restart=RESTART,
                                 maxiter=MAX_ITER // RESTART + 1, callback=cb,
                                 callback_type="pr_norm")
            iters = count[0]
            if info != 0:
                raise ConvergenceError(f"GMRES stopped after {iters} iterations (info={info})")
        res = np.linalg.norm(self._matvec(x) - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if res > RESIDUAL_TOL:
            raise ConvergenceError(f"relative residual {res:.2e} exceeds {RESIDUAL_TOL:g}")

        comps = self._scatter(x)
        src = self._sources(comps)
        # full-grid displacement and gradient (including zero-contrast cells)
        out = self._convolve(src if self.lame else src[:2],
                             slice(0, 6) if self.lame else (slice(0, 6), slice(0, 2)))
        ui, gi = inc.fields(self.bg, self.centers)
        u = ui + np.moveaxis(out[:2], 0, -1)
        grad = gi + np.moveaxis(out[2:], 0, -1).reshape(self.shape + (2, 2))
        return GridSolution(self.field, inc, self.h, self.origin, self.shape, self.coverage,
                            u, grad, np.moveaxis(src, 0, -1), self.centers, self.lame,
                            iters, float(res))

    def solve_many(self, incs, threads=1):
        if threads <= 1:
            return [self.solve(i) for i in incs]
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(self.solve, incs))


@dataclass(frozen=True, eq=False)
class GridSolution:
    """Cell-centre samples of the total field; ``sources[..., :]`` = ``(s_x, s_y, tau_xx, tau_yy, tau_xy)``."""

    field: MaterialField
    incident: Incidence
    h: float
    origin: tuple
    shape: tuple
    coverage: np.ndarray
    u: np.ndarray
    grad: np.ndarray
    sources: np.ndarray
    centers: np.ndarray
    lame: bool
    iterations: int
    residual: float

    @property
    def empty(self):
        return self.u is None

    @property
    def background(self):
        return self.field.background

    @property
    def divergence(self):
        return None if self.empty else self.grad[..., 0, 0] + self.grad[..., 1, 1]

    @property
    def symgrad(self):
        return None if self.empty else 0.5 * (self.grad + np.swapaxes(self.grad, -1, -2))

    def box(self):
        h = self.h
        lo = np.array(self.origin) * h
        return lo, lo + np.array(self.shape) * h


def solve_grid(field: MaterialField, inc, h: float, pad: int = PAD, workers: int = 1) -> GridSolution:
    """Solve the volume integral equation for one incidence on a grid of cell size ``h``.

    Raises
    ------
    UnderResolvedError
        Fewer than 10 cells per shortest shear wavelength.
    ConvergenceError
        The Krylov solve did not converge within 500 iterations.
    """
    return GridOperator(field, h, pad=pad, workers=workers).solve(inc)


# -- post-processing


def grid_far_field(sol: GridSolution, angles):
    th = np.asarray(angles, dtype=float)
    if sol.empty:
        z = np.zeros(th.shape, dtype=complex)
        return z, z.copy()
    bg = sol.field.background
    cp, cs = kernels.farfield_constants(bg)
    xh = np.stack([np.cos(th), np.sin(th)], -1)
    xp = np.stack([-xh[:, 1], xh[:, 0]], -1)
    mask = np.any(sol.sources != 0, axis=-1)
    y = sol.centers[mask]
    src = sol.sources[mask]
    s = src[:, :2]
    tau = np.empty((len(src), 2, 2), dtype=complex)
    tau[:, 0, 0], tau[:, 1, 1] = src[:, 2], src[:, 3]
    tau[:, 0, 1] = tau[:, 1, 0] = src[:, 4]
    out = []
    for k, c, pol in ((bg.kp, cp, xh), (bg.ks, cs, xp)):
        ph = np.exp(-1j * k * (xh @ y.T)) * kernels.cell_exponential(k, xh, sol.h)[:, None]
        dens = s @ pol.T  # (cells, dirs)
        dens = dens.T + 1j * k * np.einsum("di,nij,dj->dn", pol, tau, xh)
        out.append(c * np.sum(ph * dens, axis=1))
    return out[0], out[1]


def _bilinear(sol, pts, arr):
    h = sol.h
    fx = pts[:, 0] / h - sol.origin[0] - 0.5
    fy = pts[:, 1] / h - sol.origin[1] - 0.5
    i = np.clip(np.floor(fx).astype(int), 0, sol.shape[0] - 2)
    j = np.clip(np.floor(fy).astype(int), 0, sol.shape[1] - 2)
    tx = (fx - i).reshape((-1,) + (1,) * (arr.ndim - 2))
    ty = (fy - j).reshape((-1,) + (1,) * (arr.ndim - 2))
    return ((1 - tx) * (1 - ty) * arr[i, j] + tx * (1 - ty) * arr[i + 1, j]
            + (1 - tx) * ty * arr[i, j + 1] + tx * ty * arr[i + 1, j + 1])


def _represent(sol, pts, q=3):
    """Scattered displacement and gradient at points outside the grid box via edge integrals."""
    bg = sol.field.background
    mask = np.any(sol.sources != 0, axis=-1)
    y = sol.centers[mask]
    src = sol.sources[mask]
    e, nu, w = _edges(sol.h, q)
    cn, cw = _cell_nodes(sol.h, 2)
    u = np.zeros((len(pts), 2), dtype=complex)
    g = np.zeros((len(pts), 2, 2), dtype=complex)
    tau_idx = [(2, 0, 0), (3, 1, 1), (4, 0, 1), (4, 1, 0)]
    for p_i, x in enumerate(pts):
        D = x - y  # (cells, 2)
        G = np.einsum("cmij,m->cij", kernels.gamma(bg, D[:, None] - cn[None]), cw)
        X = D[:, None, :] - e[None]
        Ge = kernels.gamma(bg, X)
        dGe = kernels.gamma_grad(bg, X)
        Q = np.einsum("cmij,mk,m->cijk", Ge, nu, w)
        P = np.einsum("cmijl,mk,m->cijlk", dGe, nu, w)
        uu = np.einsum("cij,cj->i", G, src[:, :2])
        gg = -np.einsum("cijl,cj->il", Q, src[:, :2])
        for s_, j, k in tau_idx:
            uu -= Q[:, :, j, k].T @ src[:, s_]
            gg -= np.einsum("cil,c->il", P[:, :, j, :, k], src[:, s_])
        u[p_i], g[p_i] = uu, gg
    return u, g


def grid_fields(sol: GridSolution, points, part="total"):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if part not in ("total", "scattered", "incident"):
        raise ValueError(f"unknown field part {part!r}")
    bg = sol.field.background
    ui, gi = sol.incident.fields(bg, pts)
    if part == "incident" or sol.empty:
        if part == "scattered":
            return np.zeros_like(ui), np.zeros_like(gi)
        return ui, gi
    lo, hi = sol.box()
    c_lo, c_hi = lo + sol.h / 2, hi - sol.h / 2
    inside = np.all((pts >= c_lo) & (pts <= c_hi), axis=1)
    u = np.empty_like(ui)
    g = np.empty_like(gi)
    if inside.any():
        u[inside] = _bilinear(sol, pts[inside], sol.u)
        g[inside] = _bilinear(sol, pts[inside], sol.grad)
    if (~inside).any():
        us, gs = _represent(sol, pts[~inside])
        u[~inside] = ui[~inside] + us
        g[~inside] = gi[~inside] + gs
    if part == "scattered":
        return u - ui, g - gi
    return u, g

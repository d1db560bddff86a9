"""Monotonicity test operator, test-ball sweeps and numerical identity checks.

The test operator for data ``F`` and a test-ball operator ``F_b`` is the
weighted self-adjoint part of ``S^# (F_b - F)``.  A ball inside the support
gives only a few negative eigenvalues; a ball reaching outside gives a count
that keeps growing as the direction grid is refined.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DomainError, GridMismatchError, SolverError
from .farfield import (
    DirectionGrid,
    FarFieldOperator,
    HerglotzDensity,
    assemble,
    herglotz,
    herglotz_incidence,
    inner,
    scattering,
    translate,
    unitarity_defect,
)
from .forward import series_fields, solve_disk, stress_trace, traction
from .medium import Background, Disk, Inclusion, MaterialField

INSIDE, OUTSIDE, UNDECIDED = "INSIDE", "OUTSIDE", "UNDECIDED"
TAU_FLOOR = 1e-8
TAU_DEFECT_FACTOR = 10.0


@dataclass(frozen=True)
class TestBall:
    """Ball ``B`` with test contrasts ``lambda0 + a1, mu0 + a2, rho0 - a3`` inside."""

    __test__ = False  # keep pytest from collecting the class

    center: tuple
    radius: float
    alpha: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        a = tuple(float(v) for v in self.alpha)
        if len(c) != 2 or len(a) != 3:
            raise DomainError("test ball needs a 2-D center and three contrasts")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise DomainError(f"test ball radius must be positive, got {self.radius}")
        if not all(math.isfinite(v) and v >= 0 for v in a):
            raise DomainError(f"test contrasts must be finite and nonnegative, got {a}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "alpha", a)

    @property
    def is_zero(self):
        return not any(self.alpha)

    def inclusion(self) -> Inclusion:
        return Inclusion(Disk(self.center, self.radius), *self.alpha)


@dataclass(frozen=True, eq=False)
class MonotonicityReport:
    eigenvalues: np.ndarray  # ascending
    tau: float
    neg_count: int
    pos_count: int
    N: int


@dataclass(frozen=True)
class ClassificationRule:
    """Ladder rule: INSIDE if the final count is at most ``C_in`` and grew by at most 1;
    OUTSIDE if it grew by at least ``G`` and exceeds ``C_out``."""

    C_in: int = 3
    C_out: int = 8
    G: int = 4

    def classify(self, counts):
        first, last = int(counts[0]), int(counts[-1])
        if last <= self.C_in and last - first <= 1:
            return INSIDE
        if last - first >= self.G and last > self.C_out:
            return OUTSIDE
        return UNDECIDED


@dataclass(frozen=True, eq=False)
class IndicatorMap:
    centers: np.ndarray  # (n, 2)
    radius: float
    alpha: tuple
    Ns: tuple
    counts: np.ndarray  # (n, len(Ns)) negative-eigenvalue counts
    taus: np.ndarray  # (n, len(Ns))
    classes: tuple
    rule: ClassificationRule = dc_field(default_factory=ClassificationRule)
    shape: tuple | None = None  # (ny, nx) when the centers form a regular grid

    def mask(self, label=INSIDE):
        return np.array([c == label for c in self.classes])

    def to_csv(self, path):
        head = ["center_x", "center_y"] + [f"neg_count@{N}" for N in self.Ns] + ["class"]
        lines = [",".join(head)]
        for c, row, cls in zip(self.centers, self.counts, self.classes):
            lines.append(",".join([repr(float(c[0])), repr(float(c[1]))]
                                  + [str(int(v)) for v in row] + [cls]))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    def to_pgm(self, path):
        """Binary PGM of the final-N counts clipped to ``[0, 255]``; top row is the largest y."""
        if self.shape is None:
            raise DomainError("centers are not a regular grid; no image layout")
        ny, nx = self.shape
        img = np.clip(self.counts[:, -1], 0, 255).astype(np.uint8).reshape(ny, nx)[::-1]
        with open(path, "wb") as fh:
            fh.write(f"P5\n{nx} {ny}\n255\n".encode())
            fh.write(img.tobytes())


def center_grid(lo, hi, n):
    """``n x n`` centers on ``[lo, hi]^2`` (x fastest) and the image shape."""
    if n < 1:
        raise DomainError("center grid needs at least one point per axis")
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (2,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (2,))
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    X, Y = np.meshgrid(xs, ys)
    return np.stack([X.ravel(), Y.ravel()], -1), (n, n)


# -- operators


def hermitian_part(A, weights=None):
    """``(A + A^#)/2`` with ``A^# = W^-1 A^H W`` (plain conjugate transpose if unweighted)."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"hermitian_part needs a square matrix, got shape {A.shape}")
    if weights is None:
        return 0.5 * (A + A.conj().T)
    w = np.asarray(weights, dtype=float)
    return 0.5 * (A + (A.conj().T * w[None, :]) / w[:, None])


def test_operator(F_data: FarFieldOperator, F_test: FarFieldOperator, sigma=1.0):
    """Self-adjoint part of ``S_data^# (F_test - F_data)`` in tilde coordinates.

    The result is an ordinary Hermitian matrix similar to the weighted operator.
    """
    F_data.compatible(F_test)
    S = scattering(F_data, sigma).matrix
    D = sigma * (F_test.tilde - F_data.tilde)
    return hermitian_part(S.conj().T @ D)


test_operator.__test__ = False


def _eigvalsh(A):
    try:
        return scipy.linalg.eigvalsh(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"self-adjoint eigensolver failed: {exc}") from exc


def neg_eig_count(A, tau):
    """Number of eigenvalues of the Hermitian ``A`` below ``-tau``."""
    if not tau > 0:
        raise DomainError(f"threshold must be positive, got {tau}")
    return int(np.count_nonzero(_eigvalsh(A) < -tau))


def threshold(A, defect=0.0):
    """``max(1e-8, 10 defect) ||A||_2`` (a tiny positive value when ``A = 0``)."""
    nrm = float(np.linalg.norm(A, 2)) if A.size else 0.0
    return max(max(TAU_FLOOR, TAU_DEFECT_FACTOR * defect) * nrm, np.finfo(float).tiny)


def report(A, tau, N) -> MonotonicityReport:
    ev = _eigvalsh(A)
    return MonotonicityReport(ev, float(tau), int(np.count_nonzero(ev < -tau)),
                              int(np.count_nonzero(ev > tau)), int(N))


@functools.lru_cache(maxsize=64)
def _origin_probe(bg: Background, N: int, radius: float, alpha: tuple) -> FarFieldOperator:
    ball = Inclusion(Disk((0.0, 0.0), radius), *alpha)
    return assemble(MaterialField(bg, (ball,)), DirectionGrid(N), backend="series")


def probe_operator(bg: Background, grid: DirectionGrid, ball: TestBall) -> FarFieldOperator:
    """Far-field operator of the test coefficients: one cached series assembly per
    (radius, contrast), then a phase translation to the ball center."""
    if ball.is_zero:
        raise DomainError("test contrast must be nonzero")
    return translate(_origin_probe(bg, grid.N, ball.radius, ball.alpha), ball.center)


def indicator(F_data: FarFieldOperator, ball: TestBall, tau=None, sigma=1.0,
              defect=None) -> MonotonicityReport:
    """Eigenvalue report of the test operator for one ball.

    ``tau`` defaults to :func:`threshold` with the unitarity defect of the data.
    """
    F_test = probe_operator(F_data.background, F_data.grid, ball)
    A = test_operator(F_data, F_test, sigma)
    if tau is None:
        if defect is None:
            defect = unitarity_defect(F_data, sigma)
        tau = threshold(A, defect)
    return report(A, tau, F_data.grid.N)


def reconstruct(F_ladder, centers, radius, alpha, rule=None, threads=1, sigma=1.0,
                shape=None) -> IndicatorMap:
    """Sweep test balls over ``centers`` for every operator of a refinement ladder.

    Parameters
    ----------
    F_ladder : dict or sequence of FarFieldOperator
        Data at increasing ``N``, all for the same medium.
    centers : array (n, 2)
    radius : float
    alpha : 3-tuple
        Test contrasts; all-zero is rejected before any work.
    threads : int
        Worker threads for the sweep; results do not depend on it.
    """
    rule = rule or ClassificationRule()
    ops = list(F_ladder.values()) if isinstance(F_ladder, dict) else list(F_ladder)
    ops.sort(key=lambda F: F.grid.N)
    if not ops:
        raise DomainError("reconstruction needs at least one far-field operator")
    bg = ops[0].background
    if any(F.background != bg for F in ops):
        raise GridMismatchError("ladder operators use different backgrounds")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    TestBall((0.0, 0.0), radius, alpha)  # validate before any solve
    if not any(alpha):
        raise DomainError("test contrast alpha must be nonzero")
    defects = [unitarity_defect(F, sigma) for F in ops]
    for F in ops:  # warm the probe cache outside the workers
        _origin_probe(bg, F.grid.N, float(radius), tuple(map(float, alpha)))

    def one(c):
        ball = TestBall(tuple(c), radius, alpha)
        reps = [indicator(F, ball, sigma=sigma, defect=d) for F, d in zip(ops, defects)]
        return [r.neg_count for r in reps], [r.tau for r in reps]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(one, centers))
    else:
        out = [one(c) for c in centers]
    counts = np.array([o[0] for o in out], dtype=int).reshape(len(centers), len(ops))
    taus = np.array([o[1] for o in out], dtype=float).reshape(len(centers), len(ops))
    classes = tuple(rule.classify(row) for row in counts)
    return IndicatorMap(centers, float(radius), tuple(map(float, alpha)),
                        tuple(F.grid.N for F in ops), counts, taus, classes, rule, shape)


def jaccard(a, b):
    a, b = np.asarray(a, bool), np.asarray(b, bool)
    union = np.count_nonzero(a | b)
    return 1.0 if union == 0 else np.count_nonzero(a & b) / union


# -- identity checks


class IdentityCheck(NamedTuple):
    residual: float
    lhs: complex
    rhs: complex


def _relative(lhs, rhs, scale=None):
    scale = max(abs(lhs), abs(rhs)) if scale is None else scale
    if scale == 0:
        return 0.0
    return abs(lhs - rhs) / scale


def _series_solution(field: MaterialField, g, grid):
    return solve_disk(field.background, field, herglotz_incidence(g, grid, field.background))


def _circle(R, nodes):
    th = 2 * np.pi * np.arange(nodes) / nodes
    nu = np.stack([np.cos(th), np.sin(th)], -1)
    return th, nu, 2 * np.pi * R / nodes


def check_energy_identity(field: MaterialField, g: HerglotzDensity, grid: DirectionGrid, R,
                          nodes=512) -> IdentityCheck:
    """Compare ``<g, F g>`` with the boundary integral over ``|x| = R`` of
    ``T v_g . conj(u_s) - conj(T u_s) . v_g``, scaled by ``(8 pi omega)^(-1/2)``."""
    bg = field.background
    if field.is_background:
        return IdentityCheck(0.0, 0j, 0j)
    F = assemble(field, grid, backend="series")
    lhs = inner(g, F.apply(g), grid, bg)
    sol = _series_solution(field, g, grid)
    tr = stress_trace(sol, R, nodes, part="scattered")
    _, nu, ds = _circle(R, nodes)
    v, gv = herglotz(g, grid, bg, R * nu)
    Tv = traction(bg, gv, nu)
    us, Tus = tr.displacement, tr.traction
    integrand = np.sum(Tv * us.conj() - Tus.conj() * v, axis=1)
    rhs = complex(np.sum(integrand) * ds / math.sqrt(8 * math.pi * bg.omega))
    return IdentityCheck(_relative(lhs, rhs), lhs, rhs)


def _disk_of(field):
    d = field.single_disk()
    if field.is_background:
        return None
    if d is None:
        raise DomainError("identity checks need at most one active disk per field")
    return d


def _energy_density(lam, mu, gu, gv):
    """Pointwise ``E_{lam,mu}(u, v) = 2 mu eps(u):eps(v) + lam div u div v`` from gradients."""
    eu = 0.5 * (gu + np.swapaxes(gu, 1, 2))
    ev = 0.5 * (gv + np.swapaxes(gv, 1, 2))
    du = gu[:, 0, 0] + gu[:, 1, 1]
    dv = gv[:, 0, 0] + gv[:, 1, 1]
    return 2 * mu * np.einsum("nij,nij->n", eu, ev) + lam * du * dv


def _piece_quadrature(R, cells, center, radii, refine=8):
    """Midpoint nodes over the ball ``|x| < R`` with per-piece area fractions.

    Pieces are the annuli about ``center`` cut by ``radii`` and the remainder of
    the ball.  Cells crossed by any interface are replaced by ``refine**2``
    sub-cells so that the cut-cell error stays below the smooth midpoint error.
    Returns nodes ``(n, 2)``, cell areas ``(n,)`` and fractions ``(pieces, n)``.
    """
    h = 2 * R / cells
    x = -R + h * (np.arange(cells) + 0.5)
    X, Y = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], -1)

    def fractions(p, hh):
        covs = [Disk(center, a).coverage(p, hh) for a in radii]
        covs.append(Disk((0.0, 0.0), R).coverage(p, hh))
        fr = np.diff(np.stack([np.zeros(len(p))] + covs), axis=0)
        # snap roundoff: a spurious 1e-16 sliver would evaluate an expansion far outside its range
        fr[fr < 1e-12] = 0.0
        fr[fr > 1 - 1e-12] = 1.0
        return fr

    fr = fractions(pts, h)
    cut = np.any((fr > 0) & (fr < 1), axis=0)
    hs = h / refine
    off = hs * (np.arange(refine) + 0.5) - 0.5 * h
    ox, oy = np.meshgrid(off, off, indexing="ij")
    sub = (pts[cut][:, None, :] + np.stack([ox.ravel(), oy.ravel()], -1)[None]).reshape(-1, 2)
    fs = fractions(sub, hs)
    keep = fs.sum(axis=0) > 0
    nodes = np.concatenate([pts[~cut], sub[keep]])
    wts = np.concatenate([np.full(np.count_nonzero(~cut), h * h), np.full(np.count_nonzero(keep), hs * hs)])
    fracs = np.concatenate([fr[:, ~cut], fs[:, keep]], axis=1)
    full = fracs.sum(axis=0) > 0
    return nodes[full], wts[full], fracs[:, full]


def check_main_identity(field1: MaterialField, field2: MaterialField, g: HerglotzDensity,
                        grid: DirectionGrid, R, cells=200, nodes=512) -> IdentityCheck:
    """Residual of the two-medium integral identity for concentric disk media.

    Left side from the far-field operators::

        sqrt(8 pi w) (<F1 g, g> - <g, F2 g>) - 2 i w <F1 g, F2 g>

    Right side: the boundary term over ``|x| = R`` plus two volume integrals over
    the ball, using a ``cells x cells`` midpoint rule.  Cells cut by a material
    interface are split by area fraction and each part uses the expansion valid
    on its side, so the rule stays second order.  The residual is relative to the
    sum of the magnitudes of the three left-hand terms.
    """
    bg = field1.background
    if field2.background != bg:
        raise GridMismatchError("fields have different backgrounds")
    disks = [d for d in (_disk_of(field1), _disk_of(field2)) if d is not None]
    centers = {d.shape.center for d in disks}
    if len(centers) > 1:
        raise DomainError("main identity check needs concentric disks")
    center = np.asarray(next(iter(centers)) if centers else (0.0, 0.0))
    if any(np.hypot(*d.shape.center) + d.shape.radius >= R for d in disks):
        raise DomainError(f"ball radius {R} does not enclose the inclusions")
    w = bg.omega
    F1 = assemble(field1, grid, backend="series")
    F2 = assemble(field2, grid, backend="series")
    g1, g2 = F1.apply(g), F2.apply(g)
    t1 = math.sqrt(8 * math.pi * w) * inner(g1, g, grid, bg)
    t2 = math.sqrt(8 * math.pi * w) * inner(g, g2, grid, bg)
    t3 = 2j * w * inner(g1, g2, grid, bg)
    lhs = t1 - t2 - t3
    scale = abs(t1) + abs(t2) + abs(t3)

    sol1, sol2 = _series_solution(field1, g, grid), _series_solution(field2, g, grid)
    tr1 = stress_trace(sol1, R, nodes)
    tr2 = stress_trace(sol2, R, nodes)
    _, _, ds = _circle(R, nodes)
    du = tr2.displacement - tr1.displacement
    dT = tr2.traction - tr1.traction
    boundary = np.sum(du.conj() * dT) * ds

    # volume quadrature over annular pieces between the sorted interface radii
    radii = sorted({d.shape.radius for d in disks})
    pts, wts, fracs = _piece_quadrature(R, cells, tuple(center), radii)
    r_lo = [0.0] + radii  # inner radius of each piece

    def piece_fields(sol, fld, r_inner, sel):
        disk = _disk_of(fld)
        inside = disk is not None and r_inner < disk.shape.radius
        coef = sol.interior if inside else (bg.lambda0, bg.mu0, bg.rho0)
        u, gr = series_fields(sol, pts[sel], "total", region="inside" if inside else "outside")
        return u, gr, coef

    volume = 0j
    for frac, r_in in zip(fracs, r_lo):
        sel = frac > 0
        if not sel.any():
            continue
        u1, gr1, (l1, m1, p1) = piece_fields(sol1, field1, r_in, sel)
        u2, gr2, (l2, m2, p2) = piece_fields(sol2, field2, r_in, sel)
        d, gd = u1 - u2, gr1 - gr2
        dens = (p2 * w**2 * np.sum(np.abs(d) ** 2, axis=1)
                - _energy_density(l2, m2, gd, gd.conj())
                + _energy_density(l2 - l1, m2 - m1, gr1.conj(), gr1)
                + (p1 - p2) * w**2 * np.sum(np.abs(u1) ** 2, axis=1))
        volume += np.sum(frac[sel] * wts[sel] * dens)
    rhs = complex(boundary + volume)
    if scale == 0 and rhs == 0:
        return IdentityCheck(0.0, complex(lhs), rhs)
    return IdentityCheck(_relative(lhs, rhs, scale), complex(lhs), rhs)


def check_spectra(F1: FarFieldOperator, F2: FarFieldOperator, sigma=1.0) -> IdentityCheck:
    """Max gap between the sorted spectra of the self-adjoint parts of
    ``S1^# (F2 - F1)`` and ``S2^# (F2 - F1)``, relative to the 2-norm of the first."""
    F1.compatible(F2)
    D = sigma * (F2.tilde - F1.tilde)
    A1 = hermitian_part(scattering(F1, sigma).matrix.conj().T @ D)
    A2 = hermitian_part(scattering(F2, sigma).matrix.conj().T @ D)
    e1, e2 = _eigvalsh(A1), _eigvalsh(A2)
    nrm = float(np.abs(e1).max()) if e1.size else 0.0
    gap = float(np.abs(e1 - e2).max()) if e1.size else 0.0
    return IdentityCheck(0.0 if nrm == 0 else gap / nrm, complex(nrm), complex(gap))

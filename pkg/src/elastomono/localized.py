"""Localized potentials: Herglotz densities whose fields are large on one region
and small on another.

A region is sampled by a midpoint rule; the restriction matrix maps a density
to square-root-weighted samples of the field (or one of its derivatives), so
that ``||L g||^2`` approximates the region integral.  The density maximizing
``||L_B g||^2 / (||L_D g||^2 + delta <g, g>)`` is the top generalized
eigenvector of the corresponding Gram matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DomainError, SolverError
from .farfield import DirectionGrid, HerglotzDensity, _column_scale, channel_weights
from .forward import Incidence, PlaneWave, eval_field, solve_disk
from .medium import MaterialField, Shape

VARIANTS = {0: "field+gradient", 1: "field", 2: "divergence", 3: "symmetric gradient"}


@dataclass(frozen=True, eq=False)
class RegionSamples:
    shape: Shape
    points: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,)
    variant: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown variant {self.variant}; expected one of {sorted(VARIANTS)}")
        if len(self.points) == 0:
            raise DomainError("region has no sample points")

    @classmethod
    def build(cls, shape: Shape, h=None, variant=1, cells=40):
        """Cell centers of a covering grid that fall inside ``shape``.

        ``h`` defaults to the larger bounding-box side over ``cells``.
        """
        lo, hi = shape.bbox()
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        if h is None:
            h = float(np.max(hi - lo)) / cells
        nx, ny = (int(math.ceil(v)) for v in (hi - lo) / h)
        mid = 0.5 * (lo + hi)
        x = mid[0] + h * (np.arange(nx) - 0.5 * (nx - 1))
        y = mid[1] + h * (np.arange(ny) - 0.5 * (ny - 1))
        X, Y = np.meshgrid(x, y, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], -1)
        pts = pts[shape.contains(pts)]
        return cls(shape, pts, np.full(len(pts), h * h), variant)

    def with_variant(self, variant):
        return replace(self, variant=variant)

    @property
    def area(self):
        return float(self.weights.sum())


class LocalizationResult(NamedTuple):
    g: HerglotzDensity
    ratio: float
    delta: float
    eigenvalue: float
    norm_B: float
    norm_D: float


class CurvePoint(NamedTuple):
    delta: float
    ratio: float
    norm_B: float
    norm_D: float


def _quantity(variant, u, grad):
    """Sampled quantity per point, flattened to ``(n, q)``."""
    n = u.shape[0]
    if variant == 1:
        return u
    if variant == 2:
        return (grad[:, 0, 0] + grad[:, 1, 1])[:, None]
    if variant == 3:
        return (0.5 * (grad + np.swapaxes(grad, 1, 2))).reshape(n, 4)
    return np.concatenate([u, grad.reshape(n, 4)], axis=1)


def restriction_matrix(field: MaterialField, region: RegionSamples, grid: DirectionGrid):
    """Matrix ``L`` with ``||L g||^2`` approximating the region integral of the variant quantity.

    Rows are ordered quantity-major (all samples of the first component, then
    the next), so the variant-0 matrix is the variant-1 matrix stacked over the
    gradient rows.
    """
    bg = field.background
    disk = None if field.is_background else field.single_disk()
    if not field.is_background and disk is None:
        raise DomainError("restriction matrices need a background or single-disk medium")
    sw = np.sqrt(region.weights)
    cols = []
    for mode in "PS":
        scale = _column_scale(bg, mode, grid)
        for a in grid.angles:
            wave = PlaneWave(mode, a)
            if disk is None:
                u, gr = Incidence.of(wave).fields(bg, region.points)
            else:
                fv = eval_field(solve_disk(bg, field, wave), region.points)
                u, gr = fv.u, fv.grad
            q = _quantity(region.variant, u, gr) * sw[:, None]
            cols.append(scale * q.T.ravel())
    return np.stack(cols, axis=1)


def localize(L_B, L_D, delta, weights) -> LocalizationResult:
    """Top generalized eigenpair of ``L_B^H L_B g = Lam (L_D^H L_D + delta W) g``.

    ``weights`` is the diagonal of ``W`` (the density inner product); the
    returned density is normalized to ``<g, g> = 1``.
    """
    if not delta > 0:
        raise DomainError(f"regularization must be positive, got {delta}")
    w = np.asarray(weights, dtype=float)
    s = 1.0 / np.sqrt(w)
    B = np.asarray(L_B) * s[None, :]
    D = np.asarray(L_D) * s[None, :]
    a = B.conj().T @ B
    b = D.conj().T @ D + delta * np.eye(len(w))
    n = len(w)
    try:
        lam, vec = scipy.linalg.eigh(a, b, subset_by_index=[n - 1, n - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"generalized eigensolver failed: {exc}") from exc
    gt = vec[:, 0] / np.linalg.norm(vec[:, 0])
    g = gt * s
    nB = float(np.linalg.norm(L_B @ g))
    nD = float(np.linalg.norm(L_D @ g))
    ratio = math.inf if nD == 0 else nB**2 / nD**2
    return LocalizationResult(HerglotzDensity.from_vector(g), ratio, float(delta), float(lam[0]),
                              nB, nD)


def localization_curve(B: RegionSamples, D: RegionSamples, field: MaterialField, grid: DirectionGrid,
                       deltas, variant=None):
    """``(delta, ratio, ||L_B g||, ||L_D g||)`` for each regularization in ``deltas``."""
    if variant is not None:
        B, D = B.with_variant(variant), D.with_variant(variant)
    L_B = restriction_matrix(field, B, grid)
    L_D = restriction_matrix(field, D, grid)
    w = channel_weights(grid, field.background)
    out = []
    for d in deltas:
        r = localize(L_B, L_D, d, w)
        out.append(CurvePoint(r.delta, r.ratio, r.norm_B, r.norm_D))
    return out


def write_curve_csv(curve, path):
    lines = ["delta,ratio,norm_B,norm_D"]
    lines.extend(",".join(repr(float(v)) for v in p) for p in curve)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

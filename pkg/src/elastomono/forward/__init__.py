"""Forward transmission problem: disk series and grid volume-integral backends."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import DomainError
from .grid import GridOperator, GridSolution, grid_far_field, grid_fields, solve_grid
from .series import SeriesSolution, default_truncation, series_far_field, series_fields, solve_disk
from .waves import Incidence, PlaneWave

__all__ = [
    "FarFieldPattern", "FieldValues", "GridOperator", "GridSolution", "Incidence", "PlaneWave",
    "SeriesSolution", "StressTrace", "default_truncation", "eval_field", "far_field",
    "solve_disk", "solve_grid", "stress_trace", "write_far_field_csv", "write_field_csv",
]


class FieldValues(NamedTuple):
    u: np.ndarray  # (n, 2)
    grad: np.ndarray  # (n, 2, 2), grad[:, i, j] = d_j u_i
    div: np.ndarray  # (n,)
    symgrad: np.ndarray  # (n, 2, 2)


@dataclass(frozen=True, eq=False)
class FarFieldPattern:
    angles: np.ndarray
    up: np.ndarray
    us: np.ndarray

    def __post_init__(self):
        n = len(self.angles)
        if n < 8 or n % 2:
            raise DomainError(f"far-field direction count must be even and >= 8, got {n}")
        if not (np.isfinite(self.up).all() and np.isfinite(self.us).all()):
            raise DomainError("far-field pattern has non-finite values")

    @property
    def N(self):
        return len(self.angles)


@dataclass(frozen=True, eq=False)
class StressTrace:
    R: float
    angles: np.ndarray
    traction: np.ndarray  # (n, 2)
    displacement: np.ndarray  # (n, 2), same nodes

    @property
    def nodes(self):
        return np.stack([np.cos(self.angles), np.sin(self.angles)], -1) * self.R


def _angles(dirs):
    if isinstance(dirs, (int, np.integer)):
        return 2 * np.pi * np.arange(dirs) / dirs
    if hasattr(dirs, "angles"):
        return np.asarray(dirs.angles, dtype=float)
    return np.asarray(dirs, dtype=float)


def far_field(sol, dirs) -> FarFieldPattern:
    """Far-field pattern pair on a direction grid (int ``N``, grid object or angle array)."""
    th = _angles(dirs)
    if isinstance(sol, SeriesSolution):
        up, us = series_far_field(sol, th)
    elif isinstance(sol, GridSolution):
        up, us = grid_far_field(sol, th)
    else:
        raise TypeError(f"unsupported solution type {type(sol).__name__}")
    return FarFieldPattern(th, up, us)


def eval_field(sol, points, part="total") -> FieldValues:
    """Displacement, gradient, divergence and symmetric gradient at points ``(n, 2)``.

    ``part`` selects the ``"total"``, ``"scattered"`` or ``"incident"`` field.
    Series points closer than 1e-9 to the disk boundary raise ``DomainError``;
    grid solutions are interpolated bilinearly inside the grid box and
    evaluated by the integral representation outside it.
    """
    if isinstance(sol, SeriesSolution):
        u, g = series_fields(sol, points, part)
    elif isinstance(sol, GridSolution):
        u, g = grid_fields(sol, points, part)
    else:
        raise TypeError(f"unsupported solution type {type(sol).__name__}")
    return FieldValues(u, g, g[:, 0, 0] + g[:, 1, 1], 0.5 * (g + np.swapaxes(g, 1, 2)))


def _support_radius(sol):
    if isinstance(sol, SeriesSolution):
        return float(np.hypot(*sol.center)) + sol.radius if sol.radius > 0 else 0.0
    act = sol.field.active_inclusions
    return max((inc.shape.max_radius() for inc in act), default=0.0)


def traction(bg, grad, normals):
    """``T u = lambda0 div(u) nu + mu0 (grad u + grad u^T) nu``."""
    div = grad[:, 0, 0] + grad[:, 1, 1]
    sym = grad + np.swapaxes(grad, 1, 2)
    return bg.lambda0 * div[:, None] * normals + bg.mu0 * np.einsum("nij,nj->ni", sym, normals)


def stress_trace(sol, R, nodes, part="total") -> StressTrace:
    """Background traction ``T u`` on the circle ``|x| = R`` at ``nodes`` equispaced angles.

    ``nodes`` may also be an explicit array of angles.
    """
    if R <= _support_radius(sol):
        raise DomainError(f"circle radius {R} does not enclose the inclusions")
    th = _angles(nodes)
    nu = np.stack([np.cos(th), np.sin(th)], -1)
    fv = eval_field(sol, R * nu, part)
    bg = sol.background if isinstance(sol, SeriesSolution) else sol.field.background
    return StressTrace(float(R), th, traction(bg, fv.grad, nu), fv.u)


def _fmt_complex_cols(names):
    return [f"{p}_{n}" for n in names for p in ("re", "im")]


def write_far_field_csv(pattern: FarFieldPattern, path):
    cols = np.column_stack([pattern.angles, pattern.up.real, pattern.up.imag,
                            pattern.us.real, pattern.us.imag])
    header = ",".join(["angle"] + _fmt_complex_cols(["up", "us"]))
    np.savetxt(path, cols, delimiter=",", header=header, comments="", fmt="%.17g")


def write_field_csv(points, values: FieldValues, path):
    p = np.asarray(points, dtype=float)
    u = values.u
    cols = np.column_stack([p[:, 0], p[:, 1], u[:, 0].real, u[:, 0].imag,
                            u[:, 1].real, u[:, 1].imag])
    header = ",".join(["x", "y"] + _fmt_complex_cols(["ux", "uy"]))
    np.savetxt(path, cols, delimiter=",", header=header, comments="", fmt="%.17g")

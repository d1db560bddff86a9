"""Material parameters: homogeneous background plus piecewise-constant inclusions.

Inside an inclusion the Lamé parameters increase and the density decreases,

    lambda = lambda0 + psi_lambda,  mu = mu0 + psi_mu,  rho = rho0 - psi_rho,

with non-negative contrasts.  Inclusions are closed sets; overlapping
inclusions that carry contrast in the same parameter are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, OverlapError


# ---------------------------------------------------------------- shapes


class Shape:
    """Closed planar region."""

    def contains(self, points):
        """Boolean mask for an array of points of shape ``(..., 2)``."""
        raise NotImplementedError

    def bbox(self):
        """``(lo, hi)`` corners of an axis-aligned bounding box."""
        raise NotImplementedError

    def max_radius(self):
        """Largest distance from the origin to a point of the shape."""
        raise NotImplementedError

    def probe_points(self):
        """A few points inside the shape (used for admissibility checks)."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def coverage(self, centers, h, sub=16):
        """Area fraction of each ``h``-cell (given by its center) covered by the shape.

        Cells cut by the boundary are supersampled on a ``sub x sub`` lattice.
        """
        centers = np.asarray(centers, dtype=float)
        frac = self.contains(centers).astype(float)
        cut = self._boundary_cells(centers, h)
        if cut.any():
            off = (np.arange(sub) + 0.5) / sub - 0.5
            ox, oy = np.meshgrid(off * h, off * h, indexing="ij")
            pts = centers[cut][:, None, :] + np.stack([ox.ravel(), oy.ravel()], -1)[None]
            frac[cut] = self.contains(pts).mean(axis=1)
        return frac

    def _boundary_cells(self, centers, h):
        half = 0.5 * h
        corners = [(-half, -half), (-half, half), (half, -half), (half, half), (0.0, 0.0)]
        inside = np.stack([self.contains(centers + np.array(c)) for c in corners])
        # conservative: any disagreement, or cells close to the bbox edge
        return inside.any(axis=0) != inside.all(axis=0)


@dataclass(frozen=True)
class Disk(Shape):
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError(f"disk radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, points):
        p = np.asarray(points, dtype=float)
        d2 = (p[..., 0] - self.center[0]) ** 2 + (p[..., 1] - self.center[1]) ** 2
        return d2 <= self.radius**2 * (1 + 1e-14)

    def bbox(self):
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def max_radius(self):
        return math.hypot(*self.center) + self.radius

    def probe_points(self):
        return np.array([self.center])

    def to_dict(self):
        return {"type": "disk", "center": list(self.center), "radius": self.radius}

    def coverage(self, centers, h, sub=16):
        """Exact area fraction of each ``h``-cell inside the disk (``sub`` is ignored)."""
        c = np.asarray(centers, dtype=float)
        x = c[..., 0] - self.center[0]
        y = c[..., 1] - self.center[1]
        a = 0.5 * h
        area = (_quadrant_area(x + a, y + a, self.radius) - _quadrant_area(x - a, y + a, self.radius)
                - _quadrant_area(x + a, y - a, self.radius)
                + _quadrant_area(x - a, y - a, self.radius))
        return np.clip(area / h**2, 0.0, 1.0)


def _quadrant_area(x, y, R):
    """Signed area of the disk of radius ``R`` (origin) inside the box between 0 and (x, y)."""
    sx, sy = np.sign(x), np.sign(y)
    xa = np.minimum(np.abs(x), R)
    ya = np.minimum(np.abs(y), R)
    corner = xa**2 + ya**2 <= R**2
    xc = np.sqrt(np.maximum(R**2 - ya**2, 0.0))  # circle abscissa at height ya
    xl = np.minimum(xc, xa)

    def prim(t):
        # integral of sqrt(R^2 - t^2)
        return 0.5 * (t * np.sqrt(np.maximum(R**2 - t**2, 0.0)) + R**2 * np.arcsin(np.clip(t / R, -1, 1)))

    area = np.where(corner, xa * ya, xl * ya + prim(xa) - prim(xl))
    return sx * sy * area


@dataclass(frozen=True)
class Rect(Shape):
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if not (lo[0] < hi[0] and lo[1] < hi[1]):
            raise DomainError(f"rectangle needs lo < hi componentwise, got {lo}, {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, points):
        p = np.asarray(points, dtype=float)
        return (
            (p[..., 0] >= self.lo[0]) & (p[..., 0] <= self.hi[0])
            & (p[..., 1] >= self.lo[1]) & (p[..., 1] <= self.hi[1])
        )

    def bbox(self):
        return np.array(self.lo), np.array(self.hi)

    def max_radius(self):
        xs = (self.lo[0], self.hi[0])
        ys = (self.lo[1], self.hi[1])
        return max(math.hypot(x, y) for x in xs for y in ys)

    def probe_points(self):
        lo, hi = np.array(self.lo), np.array(self.hi)
        return np.array([0.5 * (lo + hi), lo, hi, [lo[0], hi[1]], [hi[0], lo[1]]])

    def to_dict(self):
        return {"type": "rect", "lo": list(self.lo), "hi": list(self.hi)}

    def coverage(self, centers, h, sub=16):
        c = np.asarray(centers, dtype=float)
        fx = np.clip(np.minimum(c[..., 0] + h / 2, self.hi[0]) - np.maximum(c[..., 0] - h / 2, self.lo[0]), 0, None)
        fy = np.clip(np.minimum(c[..., 1] + h / 2, self.hi[1]) - np.maximum(c[..., 1] - h / 2, self.lo[1]), 0, None)
        return fx * fy / h**2


@dataclass(frozen=True)
class Union(Shape):
    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise DomainError("union needs at least one member")
        object.__setattr__(self, "members", members)

    def contains(self, points):
        out = self.members[0].contains(points)
        for m in self.members[1:]:
            out = out | m.contains(points)
        return out

    def bbox(self):
        boxes = [m.bbox() for m in self.members]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)

    def max_radius(self):
        return max(m.max_radius() for m in self.members)

    def probe_points(self):
        return np.concatenate([m.probe_points() for m in self.members])

    def to_dict(self):
        return {"type": "union", "members": [m.to_dict() for m in self.members]}

    def _boundary_cells(self, centers, h):
        out = np.zeros(np.shape(centers)[:-1], dtype=bool)
        for m in self.members:
            out |= m._boundary_cells(centers, h)
        return out


def shape_from_dict(d):
    kind = d.get("type")
    if kind == "disk":
        return Disk(tuple(d["center"]), d["radius"])
    if kind == "rect":
        return Rect(tuple(d["lo"]), tuple(d["hi"]))
    if kind == "union":
        return Union(tuple(shape_from_dict(m) for m in d["members"]))
    raise DomainError(f"unknown shape type {kind!r}")


# ---------------------------------------------------------------- parameters


@dataclass(frozen=True)
class Wavenumbers:
    kp: float
    ks: float


def wavenumbers(lam, mu, rho, omega):
    """Compressional and shear wavenumbers ``kp = w sqrt(rho/(2mu+lam))``, ``ks = w sqrt(rho/mu)``."""
    if not (mu > 0 and 2 * mu + lam > 0 and rho > 0 and omega > 0):
        raise DomainError(
            f"inadmissible parameters lambda={lam}, mu={mu}, rho={rho}, omega={omega}"
        )
    return Wavenumbers(omega * math.sqrt(rho / (2 * mu + lam)), omega * math.sqrt(rho / mu))


@dataclass(frozen=True)
class Background:
    lambda0: float
    mu0: float
    rho0: float
    omega: float

    def __post_init__(self):
        if not (self.mu0 > 0 and self.mu0 + self.lambda0 > 0 and self.rho0 > 0 and self.omega > 0):
            raise DomainError(f"inadmissible background {self}")

    @property
    def k(self) -> Wavenumbers:
        return wavenumbers(self.lambda0, self.mu0, self.rho0, self.omega)

    @property
    def kp(self):
        return self.k.kp

    @property
    def ks(self):
        return self.k.ks

    def to_dict(self):
        return {"lambda0": self.lambda0, "mu0": self.mu0, "rho0": self.rho0, "omega": self.omega}


@dataclass(frozen=True)
class Inclusion:
    shape: Shape
    psi_lambda: float = 0.0
    psi_mu: float = 0.0
    psi_rho: float = 0.0

    @property
    def contrast(self):
        return (self.psi_lambda, self.psi_mu, self.psi_rho)

    @property
    def active(self):
        return any(c != 0 for c in self.contrast)

    def to_dict(self):
        return {
            "shape": self.shape.to_dict(),
            "psi_lambda": self.psi_lambda,
            "psi_mu": self.psi_mu,
            "psi_rho": self.psi_rho,
        }


@dataclass(frozen=True)
class MaterialField:
    """Background constants plus a list of inclusions; immutable."""

    background: Background
    inclusions: tuple = field(default_factory=tuple)
    unsafe: bool = False

    def __post_init__(self):
        object.__setattr__(self, "inclusions", tuple(self.inclusions))
        bg = self.background
        for inc in self.inclusions:
            if not self.unsafe and min(inc.contrast) < 0:
                raise DomainError(
                    f"negative contrast {inc.contrast}; pass unsafe=True to allow signs "
                    "outside the increasing-Lame / decreasing-density convention"
                )
            lam, mu, rho = bg.lambda0 + inc.psi_lambda, bg.mu0 + inc.psi_mu, bg.rho0 - inc.psi_rho
            if not (mu > 0 and mu + lam > 0 and rho > 0):
                raise DomainError(f"inclusion makes the medium inadmissible: {inc}")
        # overlap check on probe points of every inclusion
        for i, inc in enumerate(self.inclusions):
            self.eval(inc.shape.probe_points())

    # -- queries

    @property
    def active_inclusions(self):
        return tuple(inc for inc in self.inclusions if inc.active)

    @property
    def is_background(self):
        return not self.active_inclusions

    def eval(self, x):
        """``(lambda, mu, rho)`` at a point or an array of points ``(..., 2)``."""
        p = np.asarray(x, dtype=float)
        bg = self.background
        shape = p.shape[:-1]
        out = [np.full(shape, bg.lambda0), np.full(shape, bg.mu0), np.full(shape, bg.rho0)]
        hit = [np.zeros(shape, dtype=bool) for _ in range(3)]
        signs = (1.0, 1.0, -1.0)
        for inc in self.inclusions:
            mask = inc.shape.contains(p)
            for j, c in enumerate(inc.contrast):
                if c == 0:
                    continue
                clash = mask & hit[j]
                if np.any(clash):
                    raise OverlapError(
                        f"inclusions overlap with contrast in parameter {('lambda', 'mu', 'rho')[j]}"
                    )
                hit[j] |= mask
                out[j] = np.where(mask, out[j] + signs[j] * c, out[j])
        if not shape:
            return tuple(float(v) for v in out)
        return tuple(out)

    def bounds(self):
        """``(m1, m2, m3, M3)``: infima of the active contrasts and the sup of psi_rho."""
        res = []
        for j in range(3):
            vals = [inc.contrast[j] for inc in self.inclusions if inc.contrast[j] != 0]
            res.append(min(vals) if vals else 0.0)
        rho_vals = [inc.psi_rho for inc in self.inclusions]
        res.append(max(rho_vals) if rho_vals else 0.0)
        return tuple(res)

    def single_disk(self):
        """The only active inclusion if it is a disk, else ``None``."""
        act = self.active_inclusions
        if len(act) == 1 and isinstance(act[0].shape, Disk):
            return act[0]
        return None

    # -- serialization

    def to_dict(self):
        return {
            "background": self.background.to_dict(),
            "inclusions": [inc.to_dict() for inc in self.inclusions],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d, unsafe=False):
        bg = Background(**{k: float(v) for k, v in d["background"].items()})
        incs = [
            Inclusion(
                shape_from_dict(i["shape"]),
                float(i.get("psi_lambda", 0.0)),
                float(i.get("psi_mu", 0.0)),
                float(i.get("psi_rho", 0.0)),
            )
            for i in d.get("inclusions", [])
        ]
        return cls(bg, tuple(incs), unsafe=unsafe)

    @classmethod
    def from_json(cls, text, unsafe=False):
        return cls.from_dict(json.loads(text), unsafe=unsafe)


def evaluate(field_: MaterialField, x):
    """Functional alias of :meth:`MaterialField.eval`."""
    return field_.eval(x)


def bounding_disk(field_: MaterialField):
    """Origin-centred disk containing every inclusion, radius inflated by 10 %."""
    if not field_.inclusions:
        raise DomainError("bounding disk of a field without inclusions is undefined")
    return (0.0, 0.0), 1.1 * max(inc.shape.max_radius() for inc in field_.inclusions)


def disk_field(background: Background, center: Sequence[float], radius: float,
               psi_lambda=0.0, psi_mu=0.0, psi_rho=0.0) -> MaterialField:
    """Convenience constructor for a single disk inclusion."""
    return MaterialField(
        background, (Inclusion(Disk(tuple(center), radius), psi_lambda, psi_mu, psi_rho),)
    )

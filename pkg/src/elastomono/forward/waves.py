"""Incident plane waves and their superpositions.

A P wave travelling in direction ``d`` is ``d exp(i kp x.d)``; an S wave is
``d_perp exp(i ks x.d)`` with ``d_perp`` the anticlockwise rotation of ``d``.
Herglotz incidences are finite sums of such waves with complex amplitudes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class PlaneWave:
    mode: str  # "P" or "S"
    angle: float  # direction d = (cos angle, sin angle)

    def __post_init__(self):
        if self.mode not in ("P", "S"):
            raise DomainError(f"plane-wave mode must be 'P' or 'S', got {self.mode!r}")

    @classmethod
    def from_direction(cls, mode, d):
        d = np.asarray(d, dtype=float)
        if abs(np.hypot(*d) - 1.0) > 1e-12:
            raise DomainError("plane-wave direction must be a unit vector")
        return cls(mode, float(np.arctan2(d[1], d[0])))

    @property
    def direction(self):
        return np.array([np.cos(self.angle), np.sin(self.angle)])


@dataclass(frozen=True)
class Incidence:
    """Linear combination ``sum_j amp_j * wave_j`` of plane waves."""

    modes: tuple  # "P"/"S" per term
    angles: np.ndarray
    amplitudes: np.ndarray

    @classmethod
    def of(cls, wave, amplitude=1.0):
        if isinstance(wave, Incidence):
            return wave
        return cls((wave.mode,), np.array([wave.angle]), np.array([amplitude], dtype=complex))

    @classmethod
    def superpose(cls, modes, angles, amplitudes):
        modes = tuple(modes)
        angles = np.asarray(angles, dtype=float)
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if not (len(modes) == angles.size == amplitudes.size):
            raise DomainError("mode, angle and amplitude lists differ in length")
        return cls(modes, angles, amplitudes)

    def _split(self):
        m = np.array(self.modes)
        return (self.angles[m == "P"], self.amplitudes[m == "P"],
                self.angles[m == "S"], self.amplitudes[m == "S"])

    def fields(self, bg, points):
        """Displacement ``(..., 2)`` and gradient ``(..., 2, 2)`` with ``grad[..., i, j] = d_j u_i``."""
        pts = np.asarray(points, dtype=float)
        u = np.zeros(pts.shape[:-1] + (2,), dtype=complex)
        g = np.zeros(pts.shape[:-1] + (2, 2), dtype=complex)
        tp, ap, ts, as_ = self._split()
        for angles, amps, k, perp in ((tp, ap, bg.kp, False), (ts, as_, bg.ks, True)):
            if angles.size == 0:
                continue
            d = np.stack([np.cos(angles), np.sin(angles)], -1)  # (m, 2)
            pol = np.stack([-d[:, 1], d[:, 0]], -1) if perp else d
            ph = np.exp(1j * k * (pts @ d.T)) * amps  # (..., m)
            u += ph @ pol
            g += 1j * k * np.einsum("...m,mi,mj->...ij", ph, pol, d)
        return u, g

    def potential_coefficients(self, bg, order, center=(0.0, 0.0)):
        """Cylinder-wave coefficients of the P and S potentials about ``center``.

        With ``u = grad(phi) + (d_y psi, -d_x psi)``, returns arrays ``a, b`` for
        n = -order..order so that ``phi = sum a_n J_n(kp r) e^{in theta}`` and
        ``psi = sum b_n J_n(ks r) e^{in theta}``.
        """
        n = np.arange(-order, order + 1)
        c = np.asarray(center, dtype=float)
        tp, ap, ts, as_ = self._split()
        a = np.zeros(n.size, dtype=complex)
        b = np.zeros(n.size, dtype=complex)
        if tp.size:
            shift = ap * np.exp(1j * bg.kp * (c[0] * np.cos(tp) + c[1] * np.sin(tp)))
            a = (1j ** (n - 1.0)) / bg.kp * (np.exp(-1j * np.outer(n, tp)) @ shift)
        if ts.size:
            shift = as_ * np.exp(1j * bg.ks * (c[0] * np.cos(ts) + c[1] * np.sin(ts)))
            b = (1j ** (n + 1.0)) / bg.ks * (np.exp(-1j * np.outer(n, ts)) @ shift)
        return a, b

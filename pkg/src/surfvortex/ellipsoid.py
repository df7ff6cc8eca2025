"""Conformal map from the unit sphere to a triaxial ellipsoid.

Both surfaces carry separable curvature-line coordinates: confocal-quadric
coordinates (lam1, lam2) on the ellipsoid x^2/a^2 + y^2/b^2 + z^2/c^2 = 1
(a > b > c) and sphero-conical coordinates (s1, s2) on the sphere, with
parameters (1, m, 0).  In both systems the metric takes the isothermal form
(difference of coordinates) * (du^2 + dv^2) after one incomplete elliptic
integral per coordinate.  Matching the octant rectangles requires equal
aspect ratios, which fixes the sphere modulus m; the map is then linear in
the isothermal coordinates and the conformal factor is the ratio of the
coordinate differences.

Angle substitutions remove the inverse-square-root endpoint singularities,
so the ellipsoid-side integrals have smooth integrands:

    u(psi) = int_0^psi sqrt(lam1/(a^2-lam1)) dt,  lam1 = c^2+(b^2-c^2) sin^2 t
    v(chi) = int_0^chi sqrt(lam2/(lam2-c^2)) dt,  lam2 = b^2+(a^2-b^2) sin^2 t

while the sphere side reduces to standard incomplete integrals F(psi | m).
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.special import ellipk, ellipkinc

from .errors import MetricError

_QUAD_N = 64
_UMBILIC_GUARD = 1e-7


class TriaxialConformalMap:
    """Point correspondence sphere -> ellipsoid(a, b, c) and its factor.

    Axes correspond as x <-> a, y <-> b, z <-> c.  Requires strictly
    ordered semi-axes a > b > c > 0; degenerate cases have closed forms
    handled elsewhere.
    """

    def __init__(self, a: float, b: float, c: float):
        if not (a > b > c > 0.0):
            raise MetricError("triaxial map requires a > b > c > 0")
        self.a, self.b, self.c = float(a), float(b), float(c)
        self._gl_x, self._gl_w = np.polynomial.legendre.leggauss(_QUAD_N)
        self.u_max = self._u_of_psi(np.array([np.pi / 2]))[0]
        self.v_max = self._v_of_chi(np.array([np.pi / 2]))[0]
        target = np.log(self.u_max / self.v_max)

        def aspect(mm):
            return np.log(ellipk(mm) / ellipk(1.0 - mm)) - target

        self.m = brentq(aspect, 1e-14, 1.0 - 1e-14, xtol=1e-15, rtol=8.9e-16)
        self.alpha = float(ellipk(self.m)) / self.u_max
        self.K_comp = float(ellipk(1.0 - self.m))

    # -- ellipsoid-side isothermal integrals -------------------------------
    def _lam1(self, psi):
        return self.c**2 + (self.b**2 - self.c**2) * np.sin(psi) ** 2

    def _lam2(self, chi):
        return self.b**2 + (self.a**2 - self.b**2) * np.sin(chi) ** 2

    def _du_dpsi(self, psi):
        lam = self._lam1(psi)
        return np.sqrt(lam / (self.a**2 - lam))

    def _dv_dchi(self, chi):
        lam = self._lam2(chi)
        return np.sqrt(lam / (lam - self.c**2))

    def _quad(self, fn, upper):
        """Vectorized Gauss-Legendre of fn over [0, upper] per entry."""
        upper = np.asarray(upper, dtype=float)
        t = 0.5 * upper[..., None] * (self._gl_x + 1.0)
        return 0.5 * upper * (fn(t) @ self._gl_w)

    def _u_of_psi(self, psi):
        return self._quad(self._du_dpsi, psi)

    def _v_of_chi(self, chi):
        return self._quad(self._dv_dchi, chi)

    def _invert(self, target, forward, deriv, upper_val):
        """Newton inversion of a monotone integral on [0, pi/2]."""
        t = np.clip(target / upper_val, 0.0, 1.0) * (np.pi / 2)
        for _ in range(60):
            r = forward(t) - target
            t_new = np.clip(t - r / deriv(t), 0.0, np.pi / 2)
            if np.max(np.abs(t_new - t)) < 1e-14:
                return t_new
            t = t_new
        resid = np.max(np.abs(forward(t) - target))
        if resid > 1e-10 * max(1.0, upper_val):
            raise MetricError(
                f"coordinate-line integral inversion did not converge (residual {resid:.2e})"
            )
        return t

    # -- sphere-side coordinates -------------------------------------------
    def _sphere_params(self, pts):
        """Sphero-conical (s1, s2) with s1 in [0, m], s2 in [m, 1]."""
        x2 = pts[:, 0] ** 2
        y2 = pts[:, 1] ** 2
        z2 = pts[:, 2] ** 2
        m = self.m
        bq = m * x2 + y2 + (1.0 + m) * z2
        cq = m * z2
        disc = np.sqrt(np.clip(bq * bq - 4.0 * cq, 0.0, None))
        s2 = 0.5 * (bq + disc)
        s1 = np.where(s2 > 0.0, cq / np.where(s2 > 0.0, s2, 1.0), 0.0)
        return s1, s2

    def _sphere_isothermal(self, pts):
        s1, s2 = self._sphere_params(pts)
        m = self.m
        psi_s = np.arcsin(np.sqrt(np.clip(s1 / m, 0.0, 1.0)))
        chi_s = np.arcsin(np.sqrt(np.clip((s2 - m) / (1.0 - m), 0.0, 1.0)))
        u_s = ellipkinc(psi_s, m)
        v_s = self.K_comp - ellipkinc(np.pi / 2 - chi_s, 1.0 - m)
        return s1, s2, u_s, v_s

    # -- public API ---------------------------------------------------------
    def ellipsoid_coords(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Confocal coordinates (lam1, lam2) of the image of sphere points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        _, _, u_s, v_s = self._sphere_isothermal(pts)
        psi_e = self._invert(u_s / self.alpha, self._u_of_psi, self._du_dpsi, self.u_max)
        chi_e = self._invert(v_s / self.alpha, self._v_of_chi, self._dv_dchi, self.v_max)
        return self._lam1(psi_e), self._lam2(chi_e)

    def factor(self, pts: np.ndarray) -> np.ndarray:
        """Conformal factor h with pullback metric = h^2 * (round metric)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        pts = self._nudge_off_umbilics(pts)
        s1, s2, _, _ = self._sphere_isothermal(pts)
        lam1, lam2 = self.ellipsoid_coords(pts)
        h2 = (lam2 - lam1) / (self.alpha**2 * (s2 - s1))
        return np.sqrt(h2)

    def map_point(self, pts: np.ndarray) -> np.ndarray:
        """Image on the ellipsoid, octant signs matching the sphere point."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        pts = self._nudge_off_umbilics(pts)
        lam1, lam2 = self.ellipsoid_coords(pts)
        a2, b2, c2 = self.a**2, self.b**2, self.c**2
        x2 = a2 * (a2 - lam1) * (a2 - lam2) / ((a2 - b2) * (a2 - c2))
        y2 = b2 * (b2 - lam1) * (b2 - lam2) / ((b2 - a2) * (b2 - c2))
        z2 = c2 * (c2 - lam1) * (c2 - lam2) / ((c2 - a2) * (c2 - b2))
        out = np.stack(
            [
                np.copysign(np.sqrt(np.clip(x2, 0.0, None)), pts[:, 0]),
                np.copysign(np.sqrt(np.clip(y2, 0.0, None)), pts[:, 1]),
                np.copysign(np.sqrt(np.clip(z2, 0.0, None)), pts[:, 2]),
            ],
            axis=-1,
        )
        return out

    def _nudge_off_umbilics(self, pts):
        # (s1, s2) -> (m, m) at the four umbilic images; the factor formula
        # becomes 0/0 there, so displace such points by a harmless epsilon.
        s1, s2 = self._sphere_params(pts)
        close = (s2 - s1) < _UMBILIC_GUARD
        if not np.any(close):
            return pts
        pts = pts.copy()
        bump = np.array([0.0, 1e-6, 0.0])
        moved = pts[close] + bump
        pts[close] = moved / np.linalg.norm(moved, axis=-1, keepdims=True)
        return pts


def embedded_gaussian_curvature(points: np.ndarray, a: float, b: float, c: float) -> np.ndarray:
    """Gaussian curvature of the embedded ellipsoid at surface points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    q = points[:, 0] ** 2 / a**4 + points[:, 1] ** 2 / b**4 + points[:, 2] ** 2 / c**4
    return 1.0 / (a**2 * b**2 * c**2 * q**2)


def conformality_residual(
    cmap: TriaxialConformalMap, pts: np.ndarray, step: float = 3e-5
) -> np.ndarray:
    """Anisotropy of the finite-difference pullback of the embedding map.

    Zero for an exactly conformal map; returns (lam_max - lam_min) /
    (lam_max + lam_min) of the 2x2 pullback Gram matrix per point.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.empty(pts.shape[0])
    for i, p in enumerate(pts):
        k = np.argmin(np.abs(p))
        axis = np.zeros(3)
        axis[k] = 1.0
        e1 = np.cross(p, axis)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(p, e1)
        cols = []
        for e in (e1, e2):
            pp = p + step * e
            pp /= np.linalg.norm(pp)
            pm = p - step * e
            pm /= np.linalg.norm(pm)
            cols.append((cmap.map_point(pp)[0] - cmap.map_point(pm)[0]) / (2.0 * step))
        j = np.stack(cols, axis=1)
        g = j.T @ j
        tr = g[0, 0] + g[1, 1]
        dev = np.sqrt((g[0, 0] - g[1, 1]) ** 2 + 4.0 * g[0, 1] ** 2)
        out[i] = dev / tr
    return out

"""Geometry of the unit sphere: points, tangent vectors, distances, charts.

Points are plain ndarrays of shape (3,) or (P, 3) with unit norm.  Tangent
vectors are ambient 3-vectors orthogonal to their base point.  The rotation
J by 90 degrees of tangent vectors is fixed once and for all as
J(v) = base x v (counterclockwise when seen from outside the sphere).
"""

from __future__ import annotations

import numpy as np

from .errors import ChartDomainError

UNIT_NORM_TOL = 1e-12
TANGENT_TOL = 1e-10


def normalize(p: np.ndarray) -> np.ndarray:
    """Project onto the unit sphere (works on (3,) or (..., 3) arrays)."""
    p = np.asarray(p, dtype=float)
    n = np.linalg.norm(p, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("cannot normalize a zero vector")
    return p / n


def check_unit(p: np.ndarray, tol: float = UNIT_NORM_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    err = np.abs(np.linalg.norm(p, axis=-1) - 1.0)
    if np.any(err > tol):
        raise ValueError(f"point not on the unit sphere (|norm-1| = {err.max():.3e})")
    return p


def tangent_project(base: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Remove the radial component of v at base."""
    base = np.asarray(base, dtype=float)
    v = np.asarray(v, dtype=float)
    return v - np.sum(base * v, axis=-1, keepdims=True) * base


def check_tangent(base: np.ndarray, v: np.ndarray, tol: float = TANGENT_TOL) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    r = np.abs(np.sum(np.asarray(base) * v, axis=-1))
    if np.any(r > tol):
        raise ValueError(f"vector not tangent (|<base,v>| = {r.max():.3e})")
    return v


def rotate90(base: np.ndarray, v: np.ndarray) -> np.ndarray:
    """J(v) = base x v, rotation by +90 degrees seen from outside."""
    return np.cross(base, v)


def chordal_distance(a: np.ndarray, b: np.ndarray) -> float | np.ndarray:
    """Euclidean 3-space distance |a - b|."""
    d = np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), axis=-1)
    return float(d) if np.ndim(d) == 0 else d


def geodesic_distance(a: np.ndarray, b: np.ndarray) -> float | np.ndarray:
    """Great-circle distance arccos(a.b) in [0, pi] for the round metric."""
    w = np.clip(np.sum(np.asarray(a) * np.asarray(b), axis=-1), -1.0, 1.0)
    d = np.arccos(w)
    return float(d) if np.ndim(d) == 0 else d


def tangent_basis(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal basis (e1, e2) of the tangent plane at p."""
    p = np.asarray(p, dtype=float)
    k = np.argmin(np.abs(p))
    axis = np.zeros(3)
    axis[k] = 1.0
    e1 = np.cross(p, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(p, e1)
    return e1, e2


def rotation_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a (non-zero) axis."""
    axis = normalize(np.asarray(axis, dtype=float))
    kx, ky, kz = axis
    k_cross = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return np.eye(3) + np.sin(angle) * k_cross + (1.0 - np.cos(angle)) * (k_cross @ k_cross)


def random_points(n: int, rng: np.random.Generator) -> np.ndarray:
    """n points uniformly distributed on the sphere, shape (n, 3)."""
    return normalize(rng.normal(size=(n, 3)))


def latlon_to_point(lat_deg: float, lon_deg: float) -> np.ndarray:
    """Geographic latitude/longitude in degrees -> ambient unit vector."""
    lat = np.deg2rad(lat_deg)
    lon = np.deg2rad(lon_deg)
    return np.array([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])


def point_to_latlon(p: np.ndarray) -> tuple[float, float]:
    p = np.asarray(p, dtype=float)
    lat = np.rad2deg(np.arcsin(np.clip(p[2], -1.0, 1.0)))
    lon = np.rad2deg(np.arctan2(p[1], p[0]))
    return float(lat), float(lon)


def east_north_basis(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Local (east, north) unit tangents; undefined at the poles."""
    p = np.asarray(p, dtype=float)
    zhat = np.array([0.0, 0.0, 1.0])
    e = np.cross(zhat, p)
    ne = np.linalg.norm(e)
    if ne < 1e-12:
        raise ChartDomainError("east/north basis undefined at the poles")
    e /= ne
    n = np.cross(p, e)
    return e, n


# --- Stereographic chart from the north pole (0,0,1) onto the equator plane.
# The complex coordinate is z = (x + i y)/(1 - z3); the round metric pulls
# back to (2/(1+|z|^2))^2 |dz|^2.

POLE_TOL = 1e-12


def stereo_project(p: np.ndarray) -> complex | np.ndarray:
    p = np.asarray(p, dtype=float)
    denom = 1.0 - p[..., 2]
    if np.any(np.abs(denom) < POLE_TOL):
        raise ChartDomainError("stereographic projection undefined at the north pole")
    z = (p[..., 0] + 1j * p[..., 1]) / denom
    return complex(z) if np.ndim(z) == 0 else z


def stereo_lift(z: complex | np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    r2 = z.real**2 + z.imag**2
    w = 1.0 + r2
    p = np.stack([2.0 * z.real / w, 2.0 * z.imag / w, (r2 - 1.0) / w], axis=-1)
    return p


def stereo_factor(z: complex | np.ndarray) -> float | np.ndarray:
    """Conformal factor 2/(1+|z|^2) of the round metric in the plane chart."""
    z = np.asarray(z, dtype=complex)
    f = 2.0 / (1.0 + z.real**2 + z.imag**2)
    return float(f) if np.ndim(f) == 0 else f


def stereo_push_velocity(p: np.ndarray, v: np.ndarray) -> complex | np.ndarray:
    """Differential of stereo_project applied to a tangent vector at p."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    denom = 1.0 - p[..., 2]
    if np.any(np.abs(denom) < POLE_TOL):
        raise ChartDomainError("chart differential undefined at the north pole")
    num = (v[..., 0] + 1j * v[..., 1]) * denom + (p[..., 0] + 1j * p[..., 1]) * v[..., 2]
    out = num / denom**2
    return complex(out) if np.ndim(out) == 0 else out

import numpy as np
import pytest

from surfvortex.errors import ChartDomainError
from surfvortex.sphere import (
    chordal_distance,
    east_north_basis,
    geodesic_distance,
    latlon_to_point,
    normalize,
    point_to_latlon,
    random_points,
    rotate90,
    rotation_matrix,
    stereo_factor,
    stereo_lift,
    stereo_project,
    stereo_push_velocity,
    tangent_basis,
    tangent_project,
)

NORTH = np.array([0.0, 0.0, 1.0])
SOUTH = np.array([0.0, 0.0, -1.0])
EX = np.array([1.0, 0.0, 0.0])
EY = np.array([0.0, 1.0, 0.0])


def test_chordal_distance_antipodes():
    assert chordal_distance(NORTH, SOUTH) == pytest.approx(2.0, abs=1e-15)


def test_chordal_distance_identity():
    assert chordal_distance(EX, EX) == 0.0


def test_chordal_distance_orthogonal():
    assert chordal_distance(EX, EY) == pytest.approx(np.sqrt(2.0), abs=1e-15)


def test_geodesic_distance_cases():
    assert geodesic_distance(NORTH, SOUTH) == pytest.approx(np.pi, abs=1e-15)
    assert geodesic_distance(EX, EX) == 0.0
    assert geodesic_distance(EX, EY) == pytest.approx(np.pi / 2, abs=1e-15)


def test_chordal_vs_geodesic_identity(rng):
    a = random_points(500, rng)
    b = random_points(500, rng)
    np.testing.assert_allclose(
        chordal_distance(a, b), 2.0 * np.sin(0.5 * geodesic_distance(a, b)), atol=1e-12
    )


def test_stereo_south_pole_to_origin():
    assert stereo_project(SOUTH) == 0.0 + 0.0j


def test_stereo_equator_point():
    assert stereo_project(EX) == pytest.approx(1.0 + 0.0j, abs=1e-15)


def test_stereo_factor_at_origin():
    assert stereo_factor(0.0 + 0.0j) == pytest.approx(2.0, abs=1e-15)


def test_stereo_pole_raises():
    with pytest.raises(ChartDomainError):
        stereo_project(NORTH)


def test_stereo_roundtrip(rng):
    pts = random_points(1000, rng)
    pts = pts[pts[:, 2] < 1.0 - 1e-6]
    back = stereo_lift(stereo_project(pts))
    np.testing.assert_allclose(back, pts, atol=1e-12)


def test_stereo_pullback_factor_matches_fd(rng):
    # |d(lift)/dz| must equal 2/(1+|z|^2)
    for z in [0.3 + 0.1j, -1.2 + 0.7j, 2.0 - 0.5j]:
        h = 1e-6
        dx = (stereo_lift(z + h) - stereo_lift(z - h)) / (2 * h)
        assert np.linalg.norm(dx) == pytest.approx(stereo_factor(z), abs=1e-8)


def test_castilho_chordal_identity(rng):
    a = random_points(400, rng)
    b = random_points(400, rng)
    keep = (a[:, 2] < 0.9) & (b[:, 2] < 0.9)
    a, b = a[keep], b[keep]
    za, zb = stereo_project(a), stereo_project(b)
    lhs = np.sum((a - b) ** 2, axis=1)
    rhs = stereo_factor(za) * stereo_factor(zb) * np.abs(za - zb) ** 2
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_stereo_push_velocity_matches_fd():
    p = normalize(np.array([0.4, -0.3, -0.8]))
    v = tangent_project(p, np.array([0.2, 0.5, 0.1]))
    eps = 1e-7
    fd = (stereo_project(normalize(p + eps * v)) - stereo_project(normalize(p - eps * v))) / (
        2 * eps
    )
    assert abs(stereo_push_velocity(p, v) - fd) < 1e-7


def test_rotate90_properties(rng):
    p = random_points(1, rng)[0]
    v = tangent_project(p, rng.normal(size=3))
    jv = rotate90(p, v)
    assert abs(jv @ p) < 1e-14
    assert abs(jv @ v) < 1e-14
    assert np.linalg.norm(jv) == pytest.approx(np.linalg.norm(v), rel=1e-14)
    np.testing.assert_allclose(rotate90(p, jv), -v, atol=1e-14)


def test_tangent_basis_orthonormal(rng):
    for p in random_points(20, rng):
        e1, e2 = tangent_basis(p)
        assert abs(e1 @ e2) < 1e-14
        assert abs(e1 @ p) < 1e-14
        assert np.linalg.norm(e1) == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(np.cross(p, e1), e2, atol=1e-14)


def test_rotation_matrix_is_rotation():
    r = rotation_matrix([1.0, 2.0, -0.5], 0.7)
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-14)
    assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-14)


def test_latlon_roundtrip():
    p = latlon_to_point(33.0, -120.0)
    lat, lon = point_to_latlon(p)
    assert lat == pytest.approx(33.0, abs=1e-12)
    assert lon == pytest.approx(-120.0, abs=1e-12)


def test_east_north_basis():
    e, n = east_north_basis(EX)
    np.testing.assert_allclose(e, EY, atol=1e-15)
    np.testing.assert_allclose(n, NORTH, atol=1e-15)
    with pytest.raises(ChartDomainError):
        east_north_basis(NORTH)

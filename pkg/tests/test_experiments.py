import logging

import numpy as np
import pytest

from surfvortex import dynamics as dy
from surfvortex import experiments as ex
from surfvortex.errors import CollisionError
from surfvortex.greens import GreensEvaluator
from surfvortex.sphere import east_north_basis, latlon_to_point, normalize


@pytest.fixture(scope="module")
def dipole_round(round16):
    s0 = latlon_to_point(20.0, 10.0)
    east, _ = east_north_basis(s0)
    return ex.dipole_experiment(round16, s0, east, eps=0.1, T=1.5, tol=1e-11)


def test_dipole_initial_speed_near_unity(dipole_round):
    assert abs(dipole_round.initial_speed - 1.0) < 5 * dipole_round.eps


def test_dipole_round_tracks_great_circle(dipole_round):
    # the reflection symmetry pins the midpoint to the great circle exactly,
    # so the deviation is pure integrator error
    assert dipole_round.max_deviation < 10 * 1e-11


def test_dipole_round_plane_confinement(round16):
    s0 = latlon_to_point(20.0, 10.0)
    east, _ = east_north_basis(s0)
    nhat = normalize(np.cross(s0, east))
    h0 = round16.h(s0[None])[0]
    from surfvortex.geodesics import exponential_map

    eps = 0.05
    off = np.cross(s0, east)
    s1 = exponential_map(round16, s0, (eps / h0) * off)
    s2 = exponential_map(round16, s0, -(eps / h0) * off)
    kappa = ex.dipole_strength(eps)
    st = dy.VortexState(np.stack([s1, s2]), np.array([kappa, -kappa]))
    traj = dy.integrate_trajectory(GreensEvaluator(round16), st, 1.5, tol=1e-11)
    mids = normalize(traj.positions[:, 0] + traj.positions[:, 1])
    assert np.abs(mids @ nhat).max() < 1e-10


def test_dipole_separation_stays_tight(dipole_round):
    s = dipole_round.separations
    assert np.abs(s - s[0]).max() < 0.2 * s[0]


def test_dipole_ball_abort(round16):
    s0 = latlon_to_point(20.0, 10.0)
    east, _ = east_north_basis(s0)
    with pytest.raises(CollisionError, match="ball"):
        ex.dipole_experiment(
            round16, s0, east, eps=0.1, T=1.0, tol=1e-9, max_separation_factor=1.0 - 1e-9
        )


def test_fit_convergence_order_exact_quadratic():
    eps = np.array([0.1, 0.05, 0.025])
    devs = 3.0 * eps**2
    assert ex.fit_convergence_order(eps, devs) == pytest.approx(2.0, abs=1e-12)


def test_section_spec_parsing():
    spec = ex.SectionSpec("y2", 0.25, -1)
    assert spec.axis_vortex() == (1, 1)
    with pytest.raises(ValueError):
        ex.SectionSpec("w1").axis_vortex()
    with pytest.raises(ValueError):
        ex.SectionSpec("y0").axis_vortex()


def test_poincare_requires_opposite_pair(ev_round, rng):
    st = dy.VortexState(
        np.stack([latlon_to_point(10, 0), latlon_to_point(-10, 30)]), np.array([1.0, -0.5])
    )
    with pytest.raises(ValueError):
        ex.poincare_section(ev_round, st, ex.SectionSpec(), 1.0)


def test_poincare_crossings_refined(ev_spheroid):
    st = dy.VortexState(
        np.stack([latlon_to_point(25.0, 0.0), latlon_to_point(-20.0, 15.0)]),
        np.array([2.0, -2.0]),
    )
    rec = ex.poincare_section(ev_spheroid, st, ex.SectionSpec("y1", 0.0, 1), 120.0, tol=1e-10)
    assert rec.n_crossings >= 5
    assert rec.residuals.max() < 1e-9
    assert np.ptp(rec.energies) < 1e-7
    # direction filter: y1 increasing through zero
    assert np.all(rec.states[:, 0, 1] == pytest.approx(0.0, abs=1e-9))


def test_poincare_empty_record_warns(ev_round, caplog):
    st = dy.VortexState(
        np.stack([latlon_to_point(40.0, 0.0), latlon_to_point(-40.0, 180.0)]),
        np.array([1.0, -1.0]),
    )
    spec = ex.SectionSpec("z1", 0.99, 1)  # unreachable level
    with caplog.at_level(logging.WARNING):
        rec = ex.poincare_section(ev_round, st, spec, 2.0, tol=1e-9)
    assert rec.n_crossings == 0
    assert any("no section crossings" in m for m in caplog.messages)


def test_closed_curve_residual_on_ellipse():
    # radius about the centroid of an ellipse has geometric Fourier decay
    # ((a-b)/(a+b))^k, so ten harmonics leave a few-1e-6 tail
    t = np.linspace(0, 2 * np.pi, 137, endpoint=False)
    pts = np.stack([0.5 * np.cos(t) + 0.2, 0.35 * np.sin(t) - 0.1], axis=-1)
    assert ex.closed_curve_residual(pts) < 1e-4


def test_closed_curve_residual_detects_scatter(rng):
    pts = rng.normal(size=(200, 2))
    assert ex.closed_curve_residual(pts) > 0.1


def test_pair_reduced_coordinates_shape(ev_spheroid):
    st = dy.VortexState(
        np.stack([latlon_to_point(25.0, 0.0), latlon_to_point(-20.0, 15.0)]),
        np.array([2.0, -2.0]),
    )
    rec = ex.poincare_section(ev_spheroid, st, ex.SectionSpec("y1", 0.0, 1), 60.0, tol=1e-9)
    xy = ex.pair_reduced_coordinates(rec)
    assert xy.shape == (rec.n_crossings, 2)
    assert np.all(np.abs(xy[:, 0]) <= np.pi)

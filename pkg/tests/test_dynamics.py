import numpy as np
import pytest

from surfvortex import dynamics as dy
from surfvortex import greens as gr
from surfvortex.errors import CollisionError, SingularityError
from surfvortex.geodesics import geodesic_integrate
from surfvortex.sphere import (
    east_north_basis,
    latlon_to_point,
    normalize,
    random_points,
    rotation_matrix,
    stereo_project,
    stereo_push_velocity,
    tangent_basis,
)

NORTH = np.array([0.0, 0.0, 1.0])


def random_state(rng, n, zero_sum=False):
    pos = random_points(n, rng)
    kap = rng.uniform(0.5, 1.5, size=n) * rng.choice([-1.0, 1.0], size=n)
    if zero_sum:
        kap -= kap.sum() / n
    return dy.VortexState(pos, kap)


# --- states -----------------------------------------------------------------


def test_state_normalizes_and_validates(rng):
    st = dy.VortexState(2.0 * random_points(3, rng), np.array([1.0, -1.0, 2.0]))
    np.testing.assert_allclose(np.linalg.norm(st.positions, axis=1), 1.0, atol=1e-15)
    assert st.total_strength == pytest.approx(2.0)


def test_zero_strength_rejected():
    with pytest.raises(ValueError, match="nonzero strength"):
        dy.VortexState(np.array([[0, 0, 1.0], [1.0, 0, 0]]), np.array([1.0, 0.0]))


def test_collision_guard_on_construction():
    p = np.array([[0, 0, 1.0], [0, 1e-9, 1.0]])
    with pytest.raises(CollisionError):
        dy.VortexState(p, np.array([1.0, 1.0]))


# --- Hamiltonian -------------------------------------------------------------


def test_round_antipodal_pair_energy(ev_round):
    # assembled from the oracle-confirmed constants: -C0 + R0
    st = dy.VortexState(np.stack([NORTH, -NORTH]), np.array([1.0, -1.0]))
    expected = -gr.ROUND_GREEN_CONSTANT + gr.ROUND_ROBIN
    assert dy.hamiltonian(ev_round, st) == pytest.approx(expected, abs=1e-14)


def test_rotation_invariance_round(ev_round, rng):
    st = random_state(rng, 4)
    r = rotation_matrix([0.3, -1.0, 0.5], 1.234)
    h1 = dy.hamiltonian(ev_round, st)
    h2 = dy.hamiltonian(ev_round, dy.VortexState(st.positions @ r.T, st.strengths))
    assert h1 == pytest.approx(h2, abs=1e-12)


def test_two_route_energies_differ_by_constant(ev_spheroid, rng):
    sa = random_state(rng, 4)
    sb = dy.VortexState(random_points(4, rng), sa.strengths)
    da = dy.hamiltonian(ev_spheroid, sa, "greens") - dy.hamiltonian(ev_spheroid, sb, "greens")
    db = dy.hamiltonian(ev_spheroid, sa, "conformal") - dy.hamiltonian(
        ev_spheroid, sb, "conformal"
    )
    assert da == pytest.approx(db, abs=1e-10)


def test_hamiltonian_matches_evaluator_assembly(ev_spheroid, rng):
    # the vectorized pair assembly agrees with per-pair evaluator calls
    st = random_state(rng, 3)
    manual = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            manual += st.strengths[i] * st.strengths[j] * ev_spheroid.green(
                st.positions[i], st.positions[j]
            )
        manual += 0.5 * st.strengths[i] ** 2 * ev_spheroid.robin(st.positions[i])
    assert dy.hamiltonian(ev_spheroid, st) == pytest.approx(manual, abs=1e-13)


# --- velocities ---------------------------------------------------------------


def test_single_vortex_round_is_stationary(ev_round):
    st = dy.VortexState(np.array([[0.3, 0.4, np.sqrt(1 - 0.25)]]), np.array([1.5]))
    assert np.linalg.norm(dy.vortex_velocities(ev_round, st)) == 0.0


def test_equal_pair_round_symmetry(ev_round):
    # velocities orthogonal to the separation plane; distance is frozen
    a = latlon_to_point(30.0, 0.0)
    b = latlon_to_point(30.0, 180.0)
    st = dy.VortexState(np.stack([a, b]), np.array([1.0, 1.0]))
    vel = dy.vortex_velocities(ev_round, st)
    sep = a - b
    ddist = (a - b) @ (vel[0] - vel[1]) / np.linalg.norm(a - b)
    assert abs(ddist) < 1e-12
    assert abs(vel[0] @ sep) < 1e-12


def test_symplectic_finite_difference_oracle(ev_spheroid, rng):
    # k_j h^2 w0(v, sdot_j) = dH.v with w0(a,b) = s.(b x a); FD on H
    st = random_state(rng, 3)
    vel = dy.vortex_velocities(ev_spheroid, st)
    h2 = ev_spheroid.metric.h(st.positions) ** 2
    eps = 1e-6
    for j in range(3):
        e1, e2 = tangent_basis(st.positions[j])
        for v in (e1, e2):
            pp = st.positions.copy()
            pp[j] = normalize(pp[j] + eps * v)
            pm = st.positions.copy()
            pm[j] = normalize(pm[j] - eps * v)
            dh = (
                dy.hamiltonian(ev_spheroid, dy.VortexState(pp, st.strengths))
                - dy.hamiltonian(ev_spheroid, dy.VortexState(pm, st.strengths))
            ) / (2 * eps)
            lhs = st.strengths[j] * h2[j] * (st.positions[j] @ np.cross(v, vel[j]))
            assert lhs == pytest.approx(dh, abs=1e-6)


def test_flow_preserves_energy_exactly_pointwise(ev_spheroid, rng):
    # dH . velocities vanishes by the triple-product structure
    st = random_state(rng, 4)
    grads = dy.hamiltonian_gradient(ev_spheroid, st)
    vel = dy.vortex_velocities(ev_spheroid, st)
    assert abs(np.sum(grads * vel)) < 1e-10


def test_reduced_velocities_match_full(ev_spheroid, ev_ellipsoid, rng):
    for ev in (ev_spheroid, ev_ellipsoid):
        st = random_state(rng, 4, zero_sum=True)
        v_full = dy.vortex_velocities(ev, st)
        v_red = dy.vortex_velocities_reduced(ev.metric, st)
        np.testing.assert_allclose(v_full, v_red, atol=1e-8)


def test_reduced_velocities_require_zero_sum(spheroid32, rng):
    st = random_state(rng, 3)
    if abs(st.total_strength) > 1e-6:
        with pytest.raises(ValueError):
            dy.vortex_velocities_reduced(spheroid32, st)


# --- fields -------------------------------------------------------------------


def test_single_vortex_field_round_vanishes(ev_round, rng):
    pts = random_points(10, rng)
    field = dy.single_vortex_field(ev_round, pts)
    assert np.abs(field).max() == 0.0


def test_single_vortex_field_axisymmetric_follows_latitudes(ev_spheroid, rng):
    pts = random_points(15, rng)
    field = dy.single_vortex_field(ev_spheroid, pts)
    # velocity tangent to latitude circles: no component along e_theta or radial
    for p, v in zip(pts, field):
        e_phi = normalize(np.cross([0.0, 0.0, 1.0], p))
        residual = v - (v @ e_phi) * e_phi
        assert np.linalg.norm(residual) < 1e-8


def test_single_vortex_field_weakly_divergence_free(ev_ellipsoid, rng):
    # int <h^2 X, grad psi> dA0 = 0 for the drift field X and smooth psi
    from surfvortex import spectral as sp

    m = ev_ellipsoid.metric
    pts = m.grid.xyz.reshape(-1, 3)
    field = dy.single_vortex_field(ev_ellipsoid, pts)
    c = sp.coeff_zeros(8)
    rng2 = np.random.default_rng(3)
    for l in range(1, 7):
        for mm in range(-l, l + 1):
            c[l, 8 + mm] = rng2.normal()
    _, gpsi = sp.eval_expansion(c, pts)
    h2 = m.h(pts) ** 2
    integrand = (h2 * np.einsum("pk,pk->p", field, gpsi)).reshape(m.grid.nlat, m.grid.nlon)
    assert abs(m.grid.integrate(integrand)) < 1e-6


def test_marker_speed_quarter_circle(ev_round):
    st = dy.VortexState(NORTH[None], np.array([1.0]))
    v = dy.marker_velocity(ev_round, np.array([1.0, 0, 0]), st)
    assert np.linalg.norm(v) == pytest.approx(1.0 / (4 * np.pi), abs=1e-14)
    np.testing.assert_allclose(v / np.linalg.norm(v), [0.0, 1.0, 0.0], atol=1e-14)


def test_marker_velocity_tangent_to_stream_levels(ev_spheroid, rng):
    st = random_state(rng, 3)
    s = random_points(1, rng)[0]
    v = dy.marker_velocity(ev_spheroid, s, st)
    h = 1e-6
    psi_p = dy.collective_stream(ev_spheroid, normalize(s + h * v), st)
    psi_m = dy.collective_stream(ev_spheroid, normalize(s - h * v), st)
    assert abs(psi_p - psi_m) / (2 * h) < 1e-8 * max(1.0, np.linalg.norm(v))


def test_marker_circulation_around_unit_vortex(ev_round):
    st = dy.VortexState(NORTH[None], np.array([1.0]))
    r = 0.05
    n_q = 800
    ts = 2 * np.pi * np.arange(n_q) / n_q
    circ = 0.0
    for t in ts:
        s = np.array([np.sin(r) * np.cos(t), np.sin(r) * np.sin(t), np.cos(r)])
        v = dy.marker_velocity(ev_round, s, st)
        tangent = np.array([-np.sin(t), np.cos(t), 0.0])
        circ += (v @ tangent) * np.sin(r) * (2 * np.pi / n_q)
    assert circ == pytest.approx(1.0, abs=1e-3)


def test_marker_at_vortex_raises(ev_round):
    st = dy.VortexState(NORTH[None], np.array([1.0]))
    with pytest.raises(SingularityError):
        dy.marker_velocity(ev_round, NORTH, st)


# --- momentum -----------------------------------------------------------------


def test_momentum_labels_and_shapes(round16, spheroid32, ellipsoid32, rng):
    st = random_state(rng, 3)
    assert dy.momentum_invariants(round16, st).shape == (3,)
    assert dy.momentum_invariants(spheroid32, st).shape == (1,)
    assert dy.momentum_invariants(ellipsoid32, st).shape == (0,)
    assert dy.momentum_labels(round16) == ["Mx", "My", "Mz"]
    assert dy.momentum_labels(spheroid32) == ["J_axis"]
    assert dy.momentum_labels(ellipsoid32) == []


# --- trajectories ---------------------------------------------------------------


def test_equal_pair_uniform_rotation(ev_round):
    a = latlon_to_point(40.0, 0.0)
    b = latlon_to_point(40.0, 180.0)
    st = dy.VortexState(np.stack([a, b]), np.array([1.0, 1.0]))
    traj = dy.integrate_trajectory(ev_round, st, 100.0, tol=1e-10, n_samples=201)
    d0 = np.linalg.norm(a - b)
    dists = np.linalg.norm(traj.positions[:, 0] - traj.positions[:, 1], axis=1)
    assert np.abs(dists - d0).max() < 1e-8
    # energy-drift monitoring contract
    assert traj.energy_drift <= 100.0 * 1e-10 * abs(traj.energy[0])
    assert traj.energy_bound_ok


def test_unit_norms_at_samples(ev_spheroid, rng):
    st = random_state(rng, 3)
    traj = dy.integrate_trajectory(ev_spheroid, st, 5.0, tol=1e-9, n_samples=51)
    norms = np.linalg.norm(traj.positions, axis=2)
    assert np.abs(norms - 1.0).max() < 1e-12


def test_time_reversal(ev_spheroid, rng):
    st = random_state(rng, 3)
    traj = dy.integrate_trajectory(ev_spheroid, st, 3.0, tol=1e-11, n_samples=31)
    back = dy.integrate_trajectory(
        ev_spheroid,
        dy.VortexState(traj.positions[-1], -st.strengths),
        3.0,
        tol=1e-11,
        n_samples=31,
    )
    np.testing.assert_allclose(back.positions[-1], st.positions, atol=1e-8)


def test_collision_aborts_with_pair(ev_round, monkeypatch):
    # dipole scattering off a weaker vortex: the closest approach (chordal
    # 0.271 near t = 28) crosses an artificially raised collision guard
    monkeypatch.setattr(dy, "COLLISION_GUARD", 0.03)
    st = dy.VortexState(
        np.stack(
            [latlon_to_point(15.0, 0.0), latlon_to_point(-15.0, 0.0), latlon_to_point(0.0, 45.0)]
        ),
        np.array([1.0, -1.0, 0.5]),
    )
    with pytest.raises(CollisionError) as err:
        dy.integrate_trajectory(ev_round, st, 40.0, tol=1e-9, n_samples=21)
    assert err.value.time == pytest.approx(28.0, abs=5.0)
    assert err.value.pair is not None


# --- mass vortices ---------------------------------------------------------------


def test_mass_state_validation():
    with pytest.raises(ValueError, match="positive"):
        dy.MassVortexState(
            NORTH[None], np.zeros((1, 3)), np.array([0.0]), np.array([1.0])
        )


def test_mass_zero_strength_matches_geodesic(ev_spheroid):
    s0 = latlon_to_point(25.0, 40.0)
    east, north = east_north_basis(s0)
    v0 = 0.3 * east + 0.2 * north
    h0 = ev_spheroid.metric.h(s0[None])[0]
    mass = 1.3
    state = dy.MassVortexState(
        s0[None], (mass * h0**2 * v0)[None], np.array([mass]), np.array([0.0])
    )
    times, pos, mom, energy = dy.integrate_mass_trajectory(
        ev_spheroid, state, 10.0, tol=1e-12, n_samples=41
    )
    geo = geodesic_integrate(ev_spheroid.metric, s0, v0, 10.0, n_samples=41)
    assert np.abs(pos[:, 0, :] - geo.points).max() < 1e-8
    assert np.abs(energy - energy[0]).max() < 1e-10 * abs(energy[0]) + 1e-14


def test_magnetic_orbit_closed_form(ev_round):
    # single heavy vortex on the round sphere: circular orbit about an axis n
    # with rate fixed by strength/mass and opening angle
    kappa, mass = 2.0, 0.7
    alpha = 0.6
    n = NORTH
    s0 = np.array([np.sin(alpha), 0.0, np.cos(alpha)])
    # rotation rate omega = -kappa/(m cos(alpha)) under the fixed orientation
    omega = -kappa / (mass * np.cos(alpha))
    v0 = omega * np.cross(n, s0)
    state = dy.MassVortexState(
        s0[None], (mass * v0)[None], np.array([mass]), np.array([kappa])
    )
    T = 2.0 * np.pi / abs(omega)
    times, pos, mom, energy = dy.integrate_mass_trajectory(
        ev_round, state, T, tol=1e-12, n_samples=33
    )
    exact = np.stack(
        [
            np.cos(alpha) * n + np.sin(alpha) * (np.cos(omega * t) * np.array([1.0, 0, 0]) + np.sin(omega * t) * np.array([0, 1.0, 0]))
            for t in times
        ]
    )
    np.testing.assert_allclose(pos[:, 0, :], exact, atol=1e-8)


def test_magnetic_orbit_against_fine_step_oracle(ev_round):
    # brute-force RK4 with tiny fixed steps, independent of solve_ivp
    kappa, mass = 1.5, 1.0
    s0 = normalize(np.array([0.4, 0.1, 0.9]))
    v0 = np.array([0.05, 0.12, 0.0])
    v0 = v0 - (v0 @ s0) * s0
    state = dy.MassVortexState(s0[None], (mass * v0)[None], np.array([mass]), np.array([kappa]))
    T = 3.0
    _, pos, _, _ = dy.integrate_mass_trajectory(ev_round, state, T, tol=1e-12, n_samples=2)

    y = np.concatenate([s0, v0])

    def rhs(y):
        s, v = y[:3], y[3:]
        acc = -(v @ v) * s - (kappa / mass) * np.cross(s, v)
        return np.concatenate([v, acc])

    n_steps = 30000
    dt = T / n_steps
    for _ in range(n_steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    np.testing.assert_allclose(pos[-1, 0], y[:3] / np.linalg.norm(y[:3]), atol=1e-9)


def test_mass_pair_energy_conservation(ev_spheroid):
    pos = np.stack([latlon_to_point(20.0, 0.0), latlon_to_point(-15.0, 60.0)])
    mom = np.zeros((2, 3))
    state = dy.MassVortexState(pos, mom, np.array([1.0, 1.0]), np.array([1.0, -1.0]))
    times, p, m, energy = dy.integrate_mass_trajectory(
        ev_spheroid, state, 20.0, tol=1e-11, n_samples=81
    )
    assert np.abs(energy - energy[0]).max() < 1e-8 * max(1.0, abs(energy[0]))
    # momenta stay tangential
    r = np.abs(np.einsum("tnk,tnk->tn", p, m))
    assert r.max() < 1e-10


def test_mass_self_robin_toggle_changes_dynamics(ev_spheroid):
    pos = latlon_to_point(35.0, 10.0)[None]
    state = dy.MassVortexState(pos, np.zeros((1, 3)), np.array([1.0]), np.array([2.0]))
    ds_off, dp_off = dy.mass_vortex_rhs(ev_spheroid, state, include_self_robin=False)
    ds_on, dp_on = dy.mass_vortex_rhs(ev_spheroid, state, include_self_robin=True)
    np.testing.assert_allclose(ds_off, ds_on, atol=1e-15)  # same kinetic part
    assert np.linalg.norm(dp_off - dp_on) > 1e-4  # Robin force present only when on


# --- plane chart cross-check -----------------------------------------------------


def test_hally_cross_check_spheroid(ev_spheroid):
    pos = np.stack(
        [
            normalize(np.array([0.6, 0.1, -0.79])),
            normalize(np.array([-0.3, 0.55, -0.78])),
            normalize(np.array([0.1, -0.6, -0.75])),
        ]
    )
    kap = np.array([1.0, 0.5, -1.5])  # zero total vorticity
    st = dy.VortexState(pos, kap)
    v = dy.vortex_velocities(ev_spheroid, st)
    zs = stereo_project(pos)
    pushed = np.array([stereo_push_velocity(pos[j], v[j]) for j in range(3)])
    hally = dy.hally_plane_velocities(ev_spheroid.metric, zs, kap)
    np.testing.assert_allclose(pushed, hally, atol=1e-6)

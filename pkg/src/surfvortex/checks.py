"""Invariant suite: quadrature, symmetry, conservation and cross-checks.

Each check returns a measured defect compared against a fixed tolerance;
the runner prints one line per check and reports overall success.  The
suite backs the `validate` CLI subcommand.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import dynamics as dy
from . import experiments as ex
from . import greens as gr
from . import metrics as mt
from . import spectral as sp
from .geodesics import geodesic_integrate
from .sphere import (
    chordal_distance,
    east_north_basis,
    geodesic_distance,
    latlon_to_point,
    normalize,
    random_points,
    stereo_factor,
    stereo_lift,
    stereo_project,
    stereo_push_velocity,
    tangent_basis,
)


@dataclass
class CheckResult:
    name: str
    measured: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.measured <= self.tolerance


def _random_state(rng, n, zero_sum=False):
    pos = random_points(n, rng)
    kap = rng.uniform(0.5, 1.5, size=n) * rng.choice([-1.0, 1.0], size=n)
    if zero_sum:
        kap[-1] -= kap.sum()
        if abs(kap[-1]) < 1e-3:
            kap[-1] = -1.0
            kap[0] += 1.0 + kap.sum()
    return dy.VortexState(pos, kap)


def check_chart_roundtrip(rng, _tweaks):
    pts = random_points(1000, rng)
    pts = pts[pts[:, 2] < 0.999]
    back = stereo_lift(stereo_project(pts))
    return float(np.abs(back - pts).max())


def check_chordal_vs_geodesic(rng, _tweaks):
    a = random_points(300, rng)
    b = random_points(300, rng)
    lhs = chordal_distance(a, b)
    rhs = 2.0 * np.sin(0.5 * geodesic_distance(a, b))
    return float(np.abs(lhs - rhs).max())


def check_castilho_identity(rng, _tweaks):
    a = random_points(300, rng)
    b = random_points(300, rng)
    keep = (a[:, 2] < 0.9) & (b[:, 2] < 0.9)
    a, b = a[keep], b[keep]
    za, zb = stereo_project(a), stereo_project(b)
    lhs = np.sum((a - b) ** 2, axis=1)
    rhs = stereo_factor(za) * stereo_factor(zb) * np.abs(za - zb) ** 2
    return float(np.abs(lhs - rhs).max())


def check_sh_roundtrip(rng, _tweaks, lmax=16):
    grid = sp.SphereGrid(lmax)
    coeffs = rng.normal(size=(lmax + 1, 2 * lmax + 1))
    for l in range(lmax + 1):
        for m in range(-lmax, lmax + 1):
            if abs(m) > l:
                coeffs[l, lmax + m] = 0.0
    back = grid.analyze(grid.synthesize(coeffs))
    return float(np.abs(back - coeffs).max())


def check_eigenfunction_inversion(rng, _tweaks, lmax=16):
    grid = sp.SphereGrid(lmax)
    worst = 0.0
    for l in range(lmax + 1):
        for m in (-l, 0, l):
            c = sp.coeff_zeros(lmax)
            c[l, lmax + m] = 1.0
            f = grid.synthesize(c)
            inv = sp.invert_laplacian(sp.laplacian_coeffs(grid.analyze(f)))
            target = c.copy()
            target[0, lmax] = 0.0
            worst = max(worst, float(np.abs(inv - target).max()))
    return worst


def check_conformal_poisson(rng, _tweaks):
    m = mt.spheroid_metric(1.0, 0.8, 32)
    c = sp.coeff_zeros(m.lmax)
    for l in range(9):
        for mm in range(-l, l + 1):
            c[l, m.lmax + mm] = rng.normal()
    f = m.grid.synthesize(c)
    u = m.inv_laplacian(f)
    lap_u = m.grid.synthesize(sp.laplacian_coeffs(u))
    fbar = m.grid.integrate(f * m.h2_grid) / m.area
    return float(np.abs(lap_u - m.h2_grid * (f - fbar)).max())


def check_gauss_bonnet(rng, _tweaks, names=("round", "scaled:1.6", "spheroid:1,0.8")):
    worst = 0.0
    for name in names:
        m = mt.metric_from_name(name, 32)
        total = m.grid.integrate(mt.gaussian_curvature_grid(m) * m.h2_grid)
        worst = max(worst, abs(total - 4.0 * np.pi))
    return worst


def check_green_symmetry(rng, _tweaks):
    worst = 0.0
    for name in ("round", "spheroid:1,0.8"):
        ev = gr.GreensEvaluator(mt.metric_from_name(name, 32))
        a = random_points(20, rng)
        b = random_points(20, rng)
        for x, y in zip(a, b):
            worst = max(worst, abs(ev.green(x, y) - ev.green(y, x)))
    return worst


def check_green_mean(rng, _tweaks):
    worst = 0.0
    for name in ("round", "spheroid:1,0.8"):
        ev = gr.GreensEvaluator(mt.metric_from_name(name, 32))
        s0 = normalize(rng.normal(size=3))
        worst = max(worst, abs(gr.weighted_mean_of_green(ev, s0)))
    return worst


def check_robin_limit(rng, tweaks):
    s0 = normalize(np.array([0.2, -0.5, 0.84]))
    e1, _ = tangent_basis(s0)
    vals = []
    for d in (1e-3, 1e-4):
        s = np.cos(d) * s0 + np.sin(d) * e1
        vals.append(gr.green_standard(s, s0) - np.log(d) / (2.0 * np.pi))
    extrapolated = vals[-1]
    reference = gr.robin_standard() + tweaks.robin_offset
    return abs(extrapolated - reference)


def check_conformal_robin_limit(rng, tweaks):
    m = mt.spheroid_metric(1.0, 0.8, 32)
    ev = gr.GreensEvaluator(m)
    s = normalize(np.array([0.4, 0.5, 0.77]))
    e1, _ = tangent_basis(s)
    h_s = m.h(s[None])[0]
    d = 1e-3
    two_sided = []
    for sgn in (1.0, -1.0):
        sp_ = np.cos(d) * s + sgn * np.sin(d) * e1
        two_sided.append(ev.green(sp_, s) - np.log(h_s * d) / (2.0 * np.pi))
    val = 0.5 * (two_sided[0] + two_sided[1])
    return abs(val - (ev.robin(s) + tweaks.robin_offset))


def check_conformal_coherence(rng, _tweaks):
    ev = gr.GreensEvaluator(mt.spheroid_metric(1.0, 0.8, 32))
    sa = _random_state(rng, 4)
    sb = dy.VortexState(random_points(4, rng), sa.strengths)
    da = dy.hamiltonian(ev, sa, "greens") - dy.hamiltonian(ev, sb, "greens")
    db = dy.hamiltonian(ev, sa, "conformal") - dy.hamiltonian(ev, sb, "conformal")
    return abs(da - db)


def check_reduced_velocities(rng, _tweaks):
    worst = 0.0
    for name in ("spheroid:1,0.8", "ellipsoid:1.2,1,0.8"):
        m = mt.metric_from_name(name, 32)
        ev = gr.GreensEvaluator(m)
        st = _random_state(rng, 4, zero_sum=True)
        v_full = dy.vortex_velocities(ev, st)
        v_red = dy.vortex_velocities_reduced(m, st)
        worst = max(worst, float(np.abs(v_full - v_red).max()))
    return worst


def check_hally_crosscheck(rng, _tweaks):
    m = mt.spheroid_metric(1.0, 0.8, 32)
    ev = gr.GreensEvaluator(m)
    pos = random_points(3, rng)
    pos[:, 2] = -np.abs(pos[:, 2]) - 0.1  # keep away from the projection pole
    pos = normalize(pos)
    kap = np.array([1.0, 0.5, -1.5])
    st = dy.VortexState(pos, kap)
    v = dy.vortex_velocities(ev, st)
    zs = stereo_project(pos)
    pushed = np.array([stereo_push_velocity(pos[j], v[j]) for j in range(3)])
    hally = dy.hally_plane_velocities(m, zs, kap)
    return float(np.abs(pushed - hally).max())


def check_round_conservation(rng, _tweaks, T=20.0):
    ev = gr.GreensEvaluator(mt.round_metric(16))
    st = dy.VortexState(
        np.stack(
            [latlon_to_point(35, 0), latlon_to_point(-10, 140), latlon_to_point(20, -120)]
        ),
        np.array([1.0, 0.7, -0.4]),
    )
    traj = dy.integrate_trajectory(ev, st, T, tol=1e-10)
    h_drift = traj.energy_drift / abs(traj.energy[0])
    m_drift = float(np.linalg.norm(traj.momentum - traj.momentum[0], axis=1).max())
    return max(h_drift, m_drift)


def check_axis_momentum(rng, _tweaks, T=20.0):
    m = mt.spheroid_metric(1.0, 0.8, 32)
    ev = gr.GreensEvaluator(m)
    st = dy.VortexState(
        np.stack([latlon_to_point(30, 0), latlon_to_point(-25, 60)]), np.array([1.0, -1.0])
    )
    traj = dy.integrate_trajectory(ev, st, T, tol=1e-10)
    j = traj.conserved[:, 0]
    return float(np.abs(j - j[0]).max())


def check_dipole_round(rng, _tweaks):
    m = mt.round_metric(16)
    s0 = latlon_to_point(15.0, 30.0)
    east, _ = east_north_basis(s0)
    rep = ex.dipole_experiment(m, s0, east, eps=0.1, T=1.0, tol=1e-11)
    return rep.max_deviation


def check_steiner(rng, _tweaks):
    ev = gr.GreensEvaluator(mt.spheroid_metric(1.0, 0.8, 48))
    return ev.steiner_residual()


def check_triaxial_green_axioms(rng, _tweaks):
    m = mt.ellipsoid_metric(1.2, 1.0, 0.8, 32)
    ev = gr.GreensEvaluator(m)
    a, b = random_points(2, rng)
    sym = abs(ev.green(a, b) - ev.green(b, a))
    mean = abs(gr.weighted_mean_of_green(ev, a))
    return max(sym, mean)


def check_laplacian_axiom(rng, _tweaks):
    """PDE defect of the constructed Green function via the smooth part."""
    worst = 0.0
    for name in ("spheroid:1,0.8", "ellipsoid:1.2,1,0.8"):
        m = mt.metric_from_name(name, 48)
        ev = gr.GreensEvaluator(m)
        s0 = normalize(np.array([0.3, 0.55, 0.78]))
        smooth = -(ev.u(m.grid.xyz.reshape(-1, 3)) + ev.u(s0[None])[0]) / ev.area
        smooth = smooth.reshape(m.grid.nlat, m.grid.nlon)
        lap = m.grid.synthesize(sp.laplacian_coeffs(m.grid.analyze(smooth)))
        # Lap_g G = h^-2 (Lap0 smooth - 1/4pi) must equal -1/area
        resid = (lap - 1.0 / (4.0 * np.pi)) / m.h2_grid + 1.0 / ev.area
        cap = geodesic_distance(m.grid.xyz.reshape(-1, 3), s0).reshape(resid.shape) > 0.3
        worst = max(worst, float(np.abs(resid[cap]).max()))
    return worst


def check_dipole_convergence(rng, _tweaks):
    m = mt.spheroid_metric(1.0, 0.8, 32)
    ev = gr.GreensEvaluator(m)
    s0 = latlon_to_point(20.0, 10.0)
    east, _ = east_north_basis(s0)
    devs = []
    eps_list = (0.1, 0.05, 0.025)
    for eps in eps_list:
        rep = ex.dipole_experiment(m, s0, east, eps=eps, T=2.0, tol=1e-11, evaluator=ev)
        devs.append(rep.max_deviation)
    order = ex.fit_convergence_order(eps_list, devs)
    return max(0.0, 1.8 - order)


def check_mass_geodesic_reduction(rng, _tweaks):
    m = mt.spheroid_metric(1.0, 0.8, 32)
    ev = gr.GreensEvaluator(m)
    s0 = latlon_to_point(25.0, 40.0)
    east, north = east_north_basis(s0)
    v0 = 0.3 * east + 0.2 * north
    h0 = m.h(s0[None])[0]
    mass = 1.3
    state = dy.MassVortexState(
        s0[None], (mass * h0**2 * v0)[None], np.array([mass]), np.array([0.0])
    )
    times, pos, _, energy = dy.integrate_mass_trajectory(ev, state, 10.0, tol=1e-12, n_samples=51)
    geo = geodesic_integrate(m, s0, v0, 10.0, n_samples=51)
    pos_err = float(np.abs(pos[:, 0, :] - geo.points).max())
    e_err = float(np.abs(energy - energy[0]).max() / abs(energy[0]))
    return max(pos_err, e_err)


def check_ellipsoid_conformality(rng, _tweaks):
    from .ellipsoid import TriaxialConformalMap, conformality_residual

    cmap = TriaxialConformalMap(1.2, 1.0, 0.8)
    pts = random_points(30, rng)
    return float(conformality_residual(cmap, pts).max())


@dataclass
class Tweaks:
    """Fault-injection hooks for negative-path testing of the suite."""

    robin_offset: float = 0.0


QUICK_CHECKS = [
    ("chart_roundtrip", check_chart_roundtrip, 1e-12),
    ("chordal_vs_geodesic", check_chordal_vs_geodesic, 1e-12),
    ("castilho_identity", check_castilho_identity, 1e-10),
    ("sh_roundtrip", check_sh_roundtrip, 1e-10),
    ("eigenfunction_inversion", check_eigenfunction_inversion, 1e-10),
    ("conformal_poisson", check_conformal_poisson, 1e-8),
    ("gauss_bonnet", check_gauss_bonnet, 1e-4),
    ("green_symmetry", check_green_symmetry, 1e-10),
    ("green_weighted_mean", check_green_mean, 1e-6),
    ("robin_limit", check_robin_limit, 1e-6),
    ("conformal_robin_limit", check_conformal_robin_limit, 1e-5),
    ("conformal_coherence", check_conformal_coherence, 1e-10),
    ("reduced_velocities", check_reduced_velocities, 1e-8),
    ("hally_crosscheck", check_hally_crosscheck, 1e-6),
    ("round_conservation", check_round_conservation, 1e-8),
    ("axis_momentum", check_axis_momentum, 1e-8),
    ("dipole_round_great_circle", check_dipole_round, 1e-10),
]

FULL_CHECKS = QUICK_CHECKS + [
    ("steiner_residual", check_steiner, 1e-4),
    ("triaxial_green_axioms", check_triaxial_green_axioms, 1e-6),
    ("laplacian_axiom", check_laplacian_axiom, 1e-3),
    ("dipole_convergence_order", check_dipole_convergence, 0.0),
    ("mass_geodesic_reduction", check_mass_geodesic_reduction, 1e-7),
    ("ellipsoid_conformality", check_ellipsoid_conformality, 1e-6),
]


def validate_suite(
    level: str = "quick",
    tweaks: Tweaks | None = None,
    seed: int = 7,
    printer=print,
    only: list[str] | None = None,
) -> list[CheckResult]:
    """Run the invariant checks; returns the per-check results.

    `only` restricts the run to the named checks (debugging aid).
    """
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    tweaks = tweaks if tweaks is not None else Tweaks()
    checks = QUICK_CHECKS if level == "quick" else FULL_CHECKS
    if only is not None:
        known = {name for name, _, _ in FULL_CHECKS}
        bad = set(only) - known
        if bad:
            raise ValueError(f"unknown check name(s): {sorted(bad)}")
        checks = [c for c in FULL_CHECKS if c[0] in only]
    results = []
    printer(f"{'check':32s} {'measured':>12s} {'tolerance':>12s} {'time':>7s}  status")
    for name, fn, tol in checks:
        rng = np.random.default_rng(seed)
        t0 = time.time()
        measured = float(fn(rng, tweaks))
        res = CheckResult(name, measured, tol, time.time() - t0)
        results.append(res)
        printer(
            f"{res.name:32s} {res.measured:12.3e} {res.tolerance:12.3e} "
            f"{res.seconds:6.1f}s  {'PASS' if res.passed else 'FAIL'}"
        )
    n_fail = sum(not r.passed for r in results)
    printer(f"{len(results) - n_fail}/{len(results)} checks passed")
    return results

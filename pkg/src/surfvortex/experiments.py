"""Experiment drivers: tight-dipole geodesic tracking and Poincare sections."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import (
    VortexState,
    _collision_event,
    _flatten,
    _make_rhs,
    _unflatten,
    hamiltonian,
    integrate_trajectory,
    vortex_velocities,
)
from .errors import CollisionError
from .geodesics import exponential_map, geodesic_integrate
from .greens import GreensEvaluator
from .metrics import ConformalMetric
from .sphere import normalize, tangent_project

log = logging.getLogger(__name__)


# --- tight vortex dipole ------------------------------------------------------


@dataclass
class DipoleReport:
    """Outcome of one dipole run against its reference geodesic."""

    eps: float
    strength: float
    initial_speed: float
    max_deviation: float
    times: np.ndarray
    deviations: np.ndarray
    separations: np.ndarray
    energy_drift: float


def dipole_strength(eps: float) -> float:
    """Pair strength giving unit translation speed at separation 2*eps.

    A pair (+k, -k) at geodesic separation d moves at speed k/(2 pi d) to
    leading order, so k = 4 pi eps yields speed 1 + O(eps^2).
    """
    return 4.0 * np.pi * eps


def dipole_experiment(
    metric: ConformalMetric,
    s0: np.ndarray,
    direction: np.ndarray,
    eps: float,
    T: float,
    tol: float = 1e-11,
    n_samples: int = 201,
    max_separation_factor: float = 4.0,
    evaluator: GreensEvaluator | None = None,
) -> DipoleReport:
    """Launch a tight dipole and measure its drift off the reference geodesic.

    The pair is placed at geodesic distance eps on both sides of s0,
    transverse to `direction`, with strengths +-dipole_strength(eps) signed
    so the pair translates along `direction`.  Deviation is the conformal
    distance from the pair midpoint to the unit-speed geodesic curve
    through (s0, direction).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    s0 = normalize(np.asarray(s0, dtype=float))
    dir_t = tangent_project(s0, np.asarray(direction, dtype=float))
    nd = np.linalg.norm(dir_t)
    if nd < 1e-14:
        raise ValueError("direction must have a nonzero tangential part")
    unit_dir = dir_t / nd
    h0 = metric.h(s0[None])[0]
    offset_dir = np.cross(s0, unit_dir)  # J(direction): transverse placement
    s_plus = exponential_map(metric, s0, (eps / h0) * offset_dir)
    s_minus = exponential_map(metric, s0, -(eps / h0) * offset_dir)
    kappa = dipole_strength(eps)
    state = VortexState(np.stack([s_plus, s_minus]), np.array([kappa, -kappa]))
    ev = evaluator if evaluator is not None else GreensEvaluator(metric)

    v0 = vortex_velocities(ev, state)
    mid0, vmid0 = _midpoint_velocity(state.positions, v0)
    initial_speed = float(metric.h(mid0[None])[0] * np.linalg.norm(vmid0))

    traj = integrate_trajectory(ev, state, T, tol=tol, n_samples=n_samples)
    # reference curve extended past T so the midpoint (speed 1 + O(eps^2))
    # cannot overshoot the endpoint of the sampled geodesic
    t_geo = 1.1 * T + 0.2
    geo = geodesic_integrate(metric, s0, unit_dir / h0, t_geo, n_samples=max(400, 2 * n_samples))

    mids = normalize(traj.positions[:, 0] + traj.positions[:, 1])
    deviations = _distance_to_curve(metric, mids, geo)
    seps = _pair_separation(metric, traj.positions)
    if np.any(seps > max_separation_factor * seps[0]):
        i = int(np.argmax(seps > max_separation_factor * seps[0]))
        raise CollisionError(
            f"dipole separation grew from {seps[0]:.3e} to {seps[i]:.3e} "
            f"at t = {traj.times[i]:.4g}; the pair left its geodesic ball",
            time=float(traj.times[i]),
        )
    return DipoleReport(
        eps=eps,
        strength=kappa,
        initial_speed=initial_speed,
        max_deviation=float(deviations.max()),
        times=traj.times,
        deviations=deviations,
        separations=seps,
        energy_drift=traj.energy_drift,
    )


def _midpoint_velocity(pos, vel):
    a = pos[0] + pos[1]
    adot = vel[0] + vel[1]
    n = np.linalg.norm(a)
    mid = a / n
    vmid = adot / n - a * (a @ adot) / n**3
    return mid, vmid


def _pair_separation(metric, positions):
    chord = np.linalg.norm(positions[:, 0] - positions[:, 1], axis=1)
    arc = 2.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0))
    mids = normalize(positions[:, 0] + positions[:, 1])
    return metric.h(mids) * arc


def _distance_to_curve(metric, points, geo):
    """Conformal distance from each point to the sampled geodesic curve."""
    h_curve = metric.h(geo.points)
    out = np.empty(points.shape[0])
    t_lo, t_hi = geo.times[0], geo.times[-1]
    for i, p in enumerate(points):
        k = int(np.argmin(np.linalg.norm(geo.points - p, axis=1)))
        t = geo.times[k]
        for _ in range(4):  # Newton on (p - g(t)).g'(t) = 0
            g, gd = geo.at(t)
            f = (p - g) @ gd
            fp = -(gd @ gd)
            if fp == 0.0:
                break
            t = min(max(t - f / fp, t_lo), t_hi)
        g, _ = geo.at(t)
        chord = np.linalg.norm(p - g)
        arc = 2.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0))
        out[i] = metric.h(normalize(p + g)[None])[0] * arc if chord > 0 else 0.0
    return out


def fit_convergence_order(eps_list, deviations) -> float:
    """Least-squares slope of log(deviation) against log(eps)."""
    x = np.log(np.asarray(eps_list, dtype=float))
    y = np.log(np.asarray(deviations, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# --- Poincare sections ---------------------------------------------------------


@dataclass(frozen=True)
class SectionSpec:
    """Section surface sigma(state) = level with a crossing direction.

    `coordinate` names an ambient component of one vortex, e.g. "y1" for
    the y-component of the first vortex; `direction` +1 keeps upward
    crossings, -1 downward, 0 both.
    """

    coordinate: str = "y1"
    level: float = 0.0
    direction: int = 1

    def axis_vortex(self) -> tuple[int, int]:
        name = self.coordinate.strip().lower()
        if len(name) < 2 or name[0] not in "xyz" or not name[1:].isdigit():
            raise ValueError(f"bad section coordinate {self.coordinate!r}")
        axis = "xyz".index(name[0])
        vortex = int(name[1:]) - 1
        if vortex < 0:
            raise ValueError("section vortex index is 1-based")
        return axis, vortex

    def evaluate(self, positions: np.ndarray) -> float:
        axis, vortex = self.axis_vortex()
        return float(positions[vortex, axis] - self.level)


@dataclass
class SectionRecord:
    """Section crossings of one trajectory with energies at the crossings."""

    spec: SectionSpec
    times: np.ndarray
    states: np.ndarray  # (M, N, 3)
    energies: np.ndarray
    residuals: np.ndarray

    @property
    def n_crossings(self) -> int:
        return int(self.times.size)


def poincare_section(
    ev: GreensEvaluator,
    state: VortexState,
    spec: SectionSpec,
    T: float,
    tol: float = 1e-10,
) -> SectionRecord:
    """Integrate a vortex pair and collect refined section crossings."""
    if state.n != 2 or abs(state.strengths[0] + state.strengths[1]) > 1e-12:
        raise ValueError("Poincare runs are defined for opposite-strength pairs")
    axis, vortex = spec.axis_vortex()
    if vortex >= state.n:
        raise ValueError("section vortex index out of range")
    rhs = _make_rhs(ev, state.strengths)

    def section_event(t, y):
        return _unflatten(y)[vortex, axis] - spec.level

    section_event.terminal = False
    section_event.direction = float(spec.direction)
    collision = lambda t, y: _collision_event(y)  # noqa: E731
    collision.terminal = True
    collision.direction = -1
    sol = solve_ivp(
        rhs,
        (0.0, T),
        _flatten(state.positions),
        method="RK45",
        rtol=tol,
        atol=tol * 1e-2,
        dense_output=True,
        events=[section_event, collision],
    )
    if sol.t_events[1].size:
        raise CollisionError(
            f"collision guard triggered at t = {sol.t_events[1][0]:.6g} during section run",
            time=float(sol.t_events[1][0]),
        )
    if not sol.success:
        raise RuntimeError(f"section integration failed: {sol.message}")
    times = sol.t_events[0]
    if times.size == 0:
        log.warning("no section crossings in [0, %g] for %s", T, spec)
        empty = np.zeros((0,))
        return SectionRecord(spec, empty, np.zeros((0, state.n, 3)), empty, empty)
    states = np.empty((times.size, state.n, 3))
    energies = np.empty(times.size)
    residuals = np.empty(times.size)
    for i, (t_c, y_c) in enumerate(zip(times, sol.y_events[0])):
        pos = normalize(_unflatten(y_c))
        states[i] = pos
        energies[i] = hamiltonian(ev, VortexState(pos, state.strengths))
        residuals[i] = abs(spec.evaluate(pos))
    return SectionRecord(spec, times, states, energies, residuals)


def pair_reduced_coordinates(record: SectionRecord) -> np.ndarray:
    """(delta_longitude, z1) of the pair at each crossing, shape (M, 2).

    Natural coordinates for axisymmetric metrics where the reduced pair
    dynamics is one-dimensional: crossings of an integrable run fill a
    closed curve in this plane.
    """
    pts = record.states
    phi1 = np.arctan2(pts[:, 0, 1], pts[:, 0, 0])
    phi2 = np.arctan2(pts[:, 1, 1], pts[:, 1, 0])
    dphi = np.angle(np.exp(1j * (phi2 - phi1)))
    return np.stack([dphi, pts[:, 0, 2]], axis=-1)


def closed_curve_residual(points: np.ndarray, n_harmonics: int = 10) -> float:
    """Max distance of planar points from a fitted star-shaped closed curve.

    Fits the radius about the centroid with a truncated Fourier series in
    the polar angle; suitable for section clouds of integrable runs.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 8:
        raise ValueError("too few points for a curve fit")
    center = pts.mean(axis=0)
    rel = pts - center
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    rad = np.linalg.norm(rel, axis=1)
    k = min(n_harmonics, max(1, pts.shape[0] // 8))
    cols = [np.ones_like(ang)]
    for j in range(1, k + 1):
        cols.append(np.cos(j * ang))
        cols.append(np.sin(j * ang))
    design = np.stack(cols, axis=-1)
    coef, *_ = np.linalg.lstsq(design, rad, rcond=None)
    resid = rad - design @ coef
    return float(np.abs(resid).max())

"""Hamiltonian point-vortex dynamics on conformal spheres.

Equations of motion follow from the pair Hamiltonian

    H = sum_{i<j} k_i k_j G(s_i, s_j) + sum_j (k_j^2 / 2) R(s_j)

with the symplectic form sum_j k_j h^2(s_j) w0(s_j): each vortex moves by

    ds_j/dt = (k_j h^2(s_j))^-1  s_j x grad_j H,

where grad_j is the tangential round-metric gradient.  The orientation
convention J(v) = s x v makes a positive vortex drive markers
counterclockwise seen from outside; with it, the round area form entering
the symplectic solve is w0(a, b) = s . (b x a), i.e.

    k_j h^2(s_j) s_j . (v x ds_j/dt) = dH . v   for all tangent v.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import CollisionError, SingularityError
from .greens import ROUND_GREEN_CONSTANT, ROUND_ROBIN, GreensEvaluator
from .metrics import ConformalMetric
from .sphere import normalize, stereo_factor, stereo_lift, tangent_project

log = logging.getLogger(__name__)

COLLISION_GUARD = 1e-8
FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class VortexState:
    """Positions (N,3 unit vectors) and strengths (N,) of massless vortices."""

    positions: np.ndarray
    strengths: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        kap = np.atleast_1d(np.asarray(self.strengths, dtype=float))
        if pos.shape[0] != kap.shape[0] or pos.shape[1] != 3:
            raise ValueError("positions must be (N,3) with N matching strengths")
        if np.any(kap == 0.0):
            raise ValueError("massless vortices must have nonzero strength")
        pos = normalize(pos)
        _check_collisions(pos)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "strengths", kap)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def total_strength(self) -> float:
        return float(self.strengths.sum())


def _check_collisions(pos: np.ndarray, time: float | None = None):
    n = pos.shape[0]
    for i in range(n):
        d = np.linalg.norm(pos[i + 1 :] - pos[i], axis=1)
        if d.size and d.min() < COLLISION_GUARD:
            j = i + 1 + int(np.argmin(d))
            raise CollisionError(
                f"vortices {i} and {j} closer than the collision guard "
                f"({d.min():.3e} < {COLLISION_GUARD:g})",
                pair=(i, j),
                time=time,
            )


# --- Hamiltonian and gradients ---------------------------------------------


def _pair_terms(ev: GreensEvaluator, pos: np.ndarray):
    w = pos @ pos.T
    np.fill_diagonal(w, -1.0)
    g0 = (np.log1p(-w) - np.log(2.0)) / FOUR_PI + ROUND_GREEN_CONSTANT
    return w, g0


def potential_value(
    ev: GreensEvaluator, pos: np.ndarray, kap: np.ndarray, include_self_robin: bool
) -> float:
    """Interaction energy: pair Green terms, optionally Robin self-terms."""
    n = pos.shape[0]
    value = 0.0
    if n > 1:
        w, g0 = _pair_terms(ev, pos)
        u = ev.u(pos)
        iu, ju = np.triu_indices(n, k=1)
        gtilde = g0[iu, ju] - (u[iu] + u[ju]) / ev.area + ev.cterm
        value += float(np.sum(kap[iu] * kap[ju] * gtilde))
    if include_self_robin:
        value += float(np.sum(0.5 * kap**2 * ev.robin(pos)))
    return value


def potential_gradient(
    ev: GreensEvaluator,
    pos: np.ndarray,
    kap: np.ndarray,
    include_self_robin: bool,
    grad_log_h: np.ndarray | None = None,
) -> np.ndarray:
    """Tangential gradients d/ds_j of potential_value, shape (N,3)."""
    n = pos.shape[0]
    ktot = float(kap.sum())
    grads = np.zeros_like(pos)
    if n > 1:
        w = pos @ pos.T
        coef = np.outer(kap, kap) / (FOUR_PI * (1.0 - w + np.eye(n)))
        np.fill_diagonal(coef, 0.0)
        # grad_j G0(s_j, s_i) = -(1/4pi) (s_i - (s_j.s_i) s_j) / (1 - s_j.s_i)
        grads -= coef @ pos
        grads += ((coef * w).sum(axis=1))[:, None] * pos
    if not ev.metric.is_uniform:
        ucoef = kap * (ktot - kap)
        if include_self_robin:
            ucoef = kap * ktot
        if np.any(ucoef != 0.0):
            _, du = ev.metric.u_value_grad(pos)
            grads -= (ucoef / ev.area)[:, None] * du
    if include_self_robin and not ev.metric.is_uniform:
        if grad_log_h is None:
            grad_log_h = ev.metric.grad_log_h(pos)
        grads -= (kap**2 / FOUR_PI)[:, None] * grad_log_h
    return grads


def hamiltonian(ev: GreensEvaluator, state: VortexState, route: str = "greens") -> float:
    """Collective energy; `route` picks the assembly path.

    "greens": pair Green functions plus Robin self-terms of the conformal
    metric.  "conformal": round-sphere energy plus the conformal correction
    (log-factor and inverse-Laplacian terms).  The two differ by a
    state-independent constant.
    """
    pos, kap = state.positions, state.strengths
    _check_collisions(pos)
    if route == "greens":
        return potential_value(ev, pos, kap, include_self_robin=True)
    if route != "conformal":
        raise ValueError("route must be 'greens' or 'conformal'")
    n = state.n
    value = float(np.sum(0.5 * kap**2) * ROUND_ROBIN)
    if n > 1:
        _, g0 = _pair_terms(ev, pos)
        iu, ju = np.triu_indices(n, k=1)
        value += float(np.sum(kap[iu] * kap[ju] * g0[iu, ju]))
    if not ev.metric.is_uniform or ev.metric.uniform_value != 1.0:
        value -= float(np.sum(kap**2 * ev.metric.log_h(pos))) / FOUR_PI
        value -= state.total_strength / ev.area * float(np.sum(kap * ev.u(pos)))
    return value


def hamiltonian_gradient(ev: GreensEvaluator, state: VortexState) -> np.ndarray:
    return potential_gradient(ev, state.positions, state.strengths, include_self_robin=True)


def _velocities_raw(ev: GreensEvaluator, pos: np.ndarray, kap: np.ndarray) -> np.ndarray:
    h, glh = ev.metric.h_and_grad_log(pos)
    grads = potential_gradient(ev, pos, kap, include_self_robin=True, grad_log_h=glh)
    return np.cross(pos, grads) / (kap * h * h)[:, None]


def vortex_velocities(ev: GreensEvaluator, state: VortexState) -> np.ndarray:
    """Velocities ds_j/dt of all vortices, shape (N,3)."""
    _check_collisions(state.positions)
    return _velocities_raw(ev, state.positions, state.strengths)


def vortex_velocities_reduced(metric: ConformalMetric, state: VortexState) -> np.ndarray:
    """Zero-total-vorticity fast path built on the plane-derived energy.

    Valid only when the strengths sum to zero; the collective stream is then
    conformally natural and the energy collapses to
    (1/8pi) sum'_{j,l} k_j k_l log(h_j h_l |s_j - s_l|^2).
    """
    pos, kap = state.positions, state.strengths
    if abs(state.total_strength) > 1e-12 * np.abs(kap).max():
        raise ValueError("reduced velocities require zero total vorticity")
    _check_collisions(pos)
    n = state.n
    glh = metric.grad_log_h(pos)
    grads = np.zeros_like(pos)
    for j in range(n):
        acc = np.zeros(3)
        for l in range(n):
            if l == j:
                continue
            diff = tangent_project(pos[j], pos[j] - pos[l])
            acc += kap[l] * (glh[j] + 2.0 * diff / np.sum((pos[j] - pos[l]) ** 2))
        grads[j] = kap[j] * acc / FOUR_PI
    h2 = metric.h(pos) ** 2
    return np.cross(pos, grads) / (kap * h2)[:, None]


def single_vortex_field(ev: GreensEvaluator, s: np.ndarray) -> np.ndarray:
    """Symplectic gradient of the Robin function (unit-vortex drift field)."""
    s = np.atleast_2d(normalize(np.asarray(s, dtype=float)))
    grad = -ev.metric.grad_log_h(s) / (2.0 * np.pi)
    if not ev.metric.is_uniform:
        _, du = ev.metric.u_value_grad(s)
        grad = grad - 2.0 * du / ev.area
    out = np.cross(s, grad) / (ev.metric.h(s) ** 2)[:, None]
    return out[0] if out.shape[0] == 1 else out


def marker_velocity(ev: GreensEvaluator, s: np.ndarray, state: VortexState) -> np.ndarray:
    """Velocity of a passive marker in the stream of bound vortices."""
    s = normalize(np.asarray(s, dtype=float))
    chord = np.linalg.norm(state.positions - s, axis=1)
    if chord.min() < COLLISION_GUARD:
        raise SingularityError("marker coincides with a vortex")
    pos, kap = state.positions, state.strengths
    w = pos @ s
    grad = -np.sum(
        (kap / (FOUR_PI * (1.0 - w)))[:, None] * (pos - w[:, None] * s[None, :]), axis=0
    )
    if not ev.metric.is_uniform and state.total_strength != 0.0:
        _, du = ev.metric.u_value_grad(s[None])
        grad = grad - state.total_strength * du[0] / ev.area
    return np.cross(s, grad) / ev.metric.h(s[None])[0] ** 2


def collective_stream(ev: GreensEvaluator, s: np.ndarray, state: VortexState) -> float:
    """Stream function of the bound vortices at a marker point."""
    total = 0.0
    for p, k in zip(state.positions, state.strengths):
        total += k * ev.green(s, p)
    return float(total)


# --- momentum map -----------------------------------------------------------


def weighted_center(state: VortexState) -> np.ndarray:
    return state.strengths @ state.positions


def momentum_invariants(metric: ConformalMetric, state: VortexState) -> np.ndarray:
    """Conserved momentum components for the metric's symmetry group.

    Round metrics conserve all three components of sum_j k_j s_j.  An
    axisymmetric metric conserves one quantity, sum_j k_j Phi(axis . s_j),
    where Phi weights latitudes by the conformal area between them (the
    momentum map of the rotation under the h^2-weighted symplectic form);
    Phi(z) = z recovers the plain axis component on the round sphere.  A
    generic metric conserves none (empty array).
    """
    if metric.is_uniform:
        return weighted_center(state)
    if metric.symmetry_axis is not None:
        phi = metric.axis_momentum_profile()
        z = state.positions @ metric.symmetry_axis
        return np.array([float(state.strengths @ phi(z))])
    return np.zeros(0)


def momentum_labels(metric: ConformalMetric) -> list[str]:
    if metric.is_uniform:
        return ["Mx", "My", "Mz"]
    if metric.symmetry_axis is not None:
        return ["J_axis"]
    return []


# --- trajectory integration --------------------------------------------------


@dataclass
class Trajectory:
    """Sampled vortex trajectory with conserved-quantity diagnostics."""

    times: np.ndarray
    positions: np.ndarray  # (M, N, 3)
    strengths: np.ndarray
    energy: np.ndarray
    momentum: np.ndarray  # (M, 3) components of sum k_j s_j
    conserved: np.ndarray  # (M, n_conserved) per momentum_invariants
    conserved_labels: list[str]
    energy_drift: float
    energy_bound: float
    energy_bound_ok: bool
    n_rhs_evals: int
    n_steps: int
    dense: object = field(default=None, repr=False)

    def state_at(self, i: int) -> VortexState:
        return VortexState(self.positions[i], self.strengths)


def _flatten(pos: np.ndarray) -> np.ndarray:
    return pos.reshape(-1)


def _unflatten(y: np.ndarray) -> np.ndarray:
    return y.reshape(-1, 3)


def _make_rhs(ev: GreensEvaluator, kap: np.ndarray):
    # collision safety is enforced by the integrator's terminal event
    def rhs(t, y):
        pos = normalize(_unflatten(y))
        return _flatten(_velocities_raw(ev, pos, kap))

    return rhs


def _collision_event(y: np.ndarray) -> float:
    pos = _unflatten(y)
    n = pos.shape[0]
    dmin = np.inf
    for i in range(n - 1):
        d = np.linalg.norm(pos[i + 1 :] - pos[i], axis=1).min()
        dmin = min(dmin, d)
    return dmin - 10.0 * COLLISION_GUARD


def integrate_trajectory(
    ev: GreensEvaluator,
    state: VortexState,
    T: float,
    tol: float = 1e-10,
    n_samples: int = 401,
) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration over [0, T].

    Positions are renormalized to the sphere at every output sample; the
    energy drift is monitored against the contract 100 * tol * |H(0)|.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    kap = state.strengths
    rhs = _make_rhs(ev, kap)
    event = lambda t, y: _collision_event(y)  # noqa: E731
    event.terminal = True
    event.direction = -1
    sol = solve_ivp(
        rhs,
        (0.0, T),
        _flatten(state.positions),
        method="RK45",
        rtol=tol,
        atol=tol * 1e-2,
        dense_output=True,
        t_eval=np.linspace(0.0, T, n_samples),
        events=[event],
    )
    if sol.t_events[0].size:
        t_c = float(sol.t_events[0][0])
        pos_c = normalize(_unflatten(sol.y_events[0][0]))
        try:
            _check_collisions(pos_c, time=t_c)
        except CollisionError:
            raise
        n = pos_c.shape[0]
        pair = min(
            ((i, j) for i in range(n) for j in range(i + 1, n)),
            key=lambda ij: np.linalg.norm(pos_c[ij[0]] - pos_c[ij[1]]),
        )
        raise CollisionError(
            f"collision guard triggered at t = {t_c:.6g}", pair=pair, time=t_c
        )
    if not sol.success:
        pos_f = normalize(_unflatten(sol.y[:, -1]))
        n = pos_f.shape[0]
        pair = min(
            ((i, j) for i in range(n) for j in range(i + 1, n)),
            key=lambda ij: np.linalg.norm(pos_f[ij[0]] - pos_f[ij[1]]),
        )
        raise CollisionError(
            f"integration failed ({sol.message}); closest pair {pair}",
            pair=pair,
            time=float(sol.t[-1]),
        )
    m_samples = sol.t.size
    labels = momentum_labels(ev.metric)
    positions = np.empty((m_samples, state.n, 3))
    energy = np.empty(m_samples)
    momentum = np.empty((m_samples, 3))
    conserved = np.empty((m_samples, len(labels)))
    for i in range(m_samples):
        pos = normalize(_unflatten(sol.y[:, i]))
        positions[i] = pos
        st = VortexState(pos, kap)
        energy[i] = hamiltonian(ev, st)
        momentum[i] = weighted_center(st)
        conserved[i] = momentum_invariants(ev.metric, st)
    drift = float(np.abs(energy - energy[0]).max())
    bound = 100.0 * tol * max(abs(energy[0]), 1e-30)
    ok = drift <= bound
    if not ok:
        log.warning("energy drift %.3e exceeds the monitoring bound %.3e", drift, bound)
    return Trajectory(
        times=sol.t,
        positions=positions,
        strengths=kap.copy(),
        energy=energy,
        momentum=momentum,
        conserved=conserved,
        conserved_labels=labels,
        energy_drift=drift,
        energy_bound=bound,
        energy_bound_ok=ok,
        n_rhs_evals=sol.nfev,
        n_steps=len(sol.sol.ts) - 1 if sol.sol is not None else 0,
        dense=sol.sol,
    )


# --- vortices with mass -------------------------------------------------------


@dataclass(frozen=True)
class MassVortexState:
    """Positions, conjugate momenta, masses and strengths of heavy vortices.

    Momenta are ambient covector representatives, orthogonal to positions;
    p_j = m_j h^2(s_j) ds_j/dt.  Zero strengths are allowed (free particles).
    """

    positions: np.ndarray
    momenta: np.ndarray
    masses: np.ndarray
    strengths: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        mom = np.atleast_2d(np.asarray(self.momenta, dtype=float))
        mas = np.atleast_1d(np.asarray(self.masses, dtype=float))
        kap = np.atleast_1d(np.asarray(self.strengths, dtype=float))
        if not (pos.shape == mom.shape and pos.shape[0] == mas.size == kap.size):
            raise ValueError("inconsistent mass-vortex state shapes")
        if np.any(mas <= 0.0):
            raise ValueError("masses must be positive")
        pos = normalize(pos)
        mom = tangent_project(pos, mom)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "momenta", mom)
        object.__setattr__(self, "masses", mas)
        object.__setattr__(self, "strengths", kap)

    @property
    def n(self) -> int:
        return self.positions.shape[0]


def mass_vortex_energy(
    ev: GreensEvaluator, state: MassVortexState, include_self_robin: bool = False
) -> float:
    h2 = ev.metric.h(state.positions) ** 2
    kinetic = float(np.sum(np.sum(state.momenta**2, axis=1) / (2.0 * state.masses * h2)))
    return kinetic + potential_value(
        ev, state.positions, state.strengths, include_self_robin=include_self_robin
    )


def mass_vortex_rhs(
    ev: GreensEvaluator, state: MassVortexState, include_self_robin: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives (ds/dt, dp/dt) of the magnetic Hamiltonian system.

    The vorticity enters as a magnetic term k_j h^2 (ds/dt x s) in the
    momentum equation; its orientation is fixed by requiring that in the
    strong-field limit the drift reproduces the massless vortex motion.
    With zero strengths the system reduces to geodesic motion of h^2 g0.
    """
    pos, mom = state.positions, state.momenta
    mas, kap = state.masses, state.strengths
    h, glh = ev.metric.h_and_grad_log(pos)
    h2 = h * h
    vel = mom / (mas * h2)[:, None]
    dV = potential_gradient(ev, pos, kap, include_self_robin=include_self_robin, grad_log_h=glh)
    v2 = np.sum(vel**2, axis=1)
    lorentz = -kap[:, None] * np.cross(pos, vel)
    acc = (
        -v2[:, None] * pos
        - 2.0 * np.sum(glh * vel, axis=1)[:, None] * vel
        + v2[:, None] * glh
        + (lorentz - dV / h2[:, None]) / mas[:, None]
    )
    dp = (mas * h2)[:, None] * acc + 2.0 * (mas * h2 * np.sum(glh * vel, axis=1))[:, None] * vel
    return vel, dp


def integrate_mass_trajectory(
    ev: GreensEvaluator,
    state: MassVortexState,
    T: float,
    tol: float = 1e-10,
    n_samples: int = 401,
    include_self_robin: bool = False,
):
    """Integrate heavy vortices; returns (times, positions, momenta, energy)."""
    n = state.n

    def rhs(t, y):
        pos = normalize(y[: 3 * n].reshape(n, 3))
        mom = tangent_project(pos, y[3 * n :].reshape(n, 3))
        st = MassVortexState(pos, mom, state.masses, state.strengths)
        ds, dp = mass_vortex_rhs(ev, st, include_self_robin=include_self_robin)
        return np.concatenate([ds.reshape(-1), dp.reshape(-1)])

    y0 = np.concatenate([state.positions.reshape(-1), state.momenta.reshape(-1)])
    sol = solve_ivp(
        rhs,
        (0.0, T),
        y0,
        method="RK45",
        rtol=tol,
        atol=tol * 1e-2,
        t_eval=np.linspace(0.0, T, n_samples),
    )
    if not sol.success:
        raise RuntimeError(f"mass-vortex integration failed: {sol.message}")
    m_samples = sol.t.size
    positions = np.empty((m_samples, n, 3))
    momenta = np.empty((m_samples, n, 3))
    energy = np.empty(m_samples)
    for i in range(m_samples):
        pos = normalize(sol.y[: 3 * n, i].reshape(n, 3))
        mom = tangent_project(pos, sol.y[3 * n :, i].reshape(n, 3))
        positions[i] = pos
        momenta[i] = mom
        energy[i] = mass_vortex_energy(
            ev,
            MassVortexState(pos, mom, state.masses, state.strengths),
            include_self_robin=include_self_robin,
        )
    return sol.t, positions, momenta, energy


# --- plane-chart cross-check ---------------------------------------------------


def hally_plane_velocities(
    metric: ConformalMetric, zs: np.ndarray, kappas: np.ndarray
) -> np.ndarray:
    """Vortex velocities in the stereographic chart from the self-term form.

    Implements the chart equations for zero total vorticity,

        htot^2 conj(dz_j/dt) =
            -(i/2pi) [ sum_{l != j} k_l/(z_l - z_j) + k_j d_z log htot(z_j) ],

    with htot the combined factor (metric times chart) and the self-term
    sign matching the regularization rule log htot / 2pi.  The -i (instead
    of +i) reflects that projection from the north pole reverses the
    orientation fixed by J(v) = s x v.
    """
    zs = np.asarray(zs, dtype=complex)
    kappas = np.asarray(kappas, dtype=float)
    pts = stereo_lift(zs)
    h = metric.h(pts)
    ho = stereo_factor(zs)
    htot2 = (h * ho) ** 2
    glh = metric.grad_log_h(pts)
    out = np.empty(zs.shape, dtype=complex)
    for j, z in enumerate(zs):
        inter = 0.0 + 0.0j
        for l, zl in enumerate(zs):
            if l != j:
                inter += kappas[l] / (zl - z)
        # d_z log htot = d_z log(h o lift) + d_z log(2/(1+|z|^2))
        x, y = z.real, z.imag
        wsq = 1.0 + x * x + y * y
        ds_dx = np.array([2.0 / wsq - 4.0 * x * x / wsq**2, -4.0 * x * y / wsq**2, 4.0 * x / wsq**2])
        ds_dy = np.array([-4.0 * x * y / wsq**2, 2.0 / wsq - 4.0 * y * y / wsq**2, 4.0 * y / wsq**2])
        dlh_dx = glh[j] @ ds_dx
        dlh_dy = glh[j] @ ds_dy
        dz_log_h = 0.5 * (dlh_dx - 1j * dlh_dy)
        dz_log_ho = -np.conj(z) / wsq
        self_term = kappas[j] * (dz_log_h + dz_log_ho)
        out[j] = np.conj(-1j / (2.0 * np.pi * htot2[j]) * (inter + self_term))
    return out

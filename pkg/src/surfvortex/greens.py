"""Green, Robin, two-point and dipole-perturbation functions.

On the round unit sphere the Green function of the Laplace-Beltrami
operator (zero-mean convention) has the closed form

    G0(s, s0) = (1/2pi) log sin(d/2) + 1/(4pi),   d = arccos(s.s0),

and its Robin constant (regular diagonal value w.r.t. log d / 2pi) is
(1 - 2 log 2)/(4pi).  For a conformal metric h^2 g0 the pair (G, R)
transforms through u = Lap0^-1 h^2 and log h; the additive constant cterm
is carried explicitly but cancels from all dynamics.
"""

from __future__ import annotations

import numpy as np

from . import spectral
from .errors import SingularityError
from .geodesics import conformal_distance
from .metrics import ConformalMetric, gaussian_curvature_grid
from .sphere import normalize, tangent_project

#: zero-mean constant of the round-sphere Green function
ROUND_GREEN_CONSTANT = 1.0 / (4.0 * np.pi)
#: Robin constant of the round unit sphere
ROUND_ROBIN = (1.0 - 2.0 * np.log(2.0)) / (4.0 * np.pi)

SINGULARITY_GUARD = 1e-10


def _pairwise_cos(s, s0):
    s = np.atleast_2d(np.asarray(s, dtype=float))
    s0 = np.asarray(s0, dtype=float)
    w = s @ s0
    chord2 = 2.0 * np.clip(1.0 - w, 0.0, None)
    if np.any(chord2 < SINGULARITY_GUARD**2):
        raise SingularityError("Green function evaluated at coincident points")
    return s, w


def green_standard(s: np.ndarray, s0: np.ndarray) -> float | np.ndarray:
    """Round-sphere Green function, zero mean, symmetric."""
    s, w = _pairwise_cos(s, s0)
    g = (np.log1p(-w) - np.log(2.0)) / (4.0 * np.pi) + ROUND_GREEN_CONSTANT
    return float(g[0]) if g.size == 1 else g


def green_standard_gradient(s: np.ndarray, s0: np.ndarray) -> np.ndarray:
    """Tangential gradient of G0 with respect to the first argument."""
    s, w = _pairwise_cos(s, s0)
    proj = tangent_project(s, np.broadcast_to(s0, s.shape))
    return -proj / (4.0 * np.pi * (1.0 - w))[:, None]


def robin_standard() -> float:
    """Robin constant of the round unit sphere."""
    return ROUND_ROBIN


class GreensEvaluator:
    """Green/Robin functions of a conformal metric, built on cached data.

    Immutable after construction; all evaluations are pure.
    """

    def __init__(self, metric: ConformalMetric):
        self.metric = metric
        self.area = metric.area
        # constant from the conformal transformation rule; state-independent
        self.cterm = metric.grid.integrate(metric.h2_grid * metric.u_grid) / self.area**2

    # -- scalar evaluations ------------------------------------------------
    def u(self, pts: np.ndarray) -> np.ndarray:
        return self.metric.u_value_grad(pts)[0]

    def green(self, s: np.ndarray, s0: np.ndarray) -> float | np.ndarray:
        """Green function of h^2 g0 (zero h^2-weighted mean, symmetric)."""
        s_arr = np.atleast_2d(np.asarray(s, dtype=float))
        g0 = green_standard(s_arr, s0)
        u_s = self.u(s_arr)
        u_s0 = self.u(np.asarray(s0, dtype=float)[None])[0]
        g = g0 - (u_s + u_s0) / self.area + self.cterm
        return float(g[0]) if g.size == 1 else g

    def robin(self, s: np.ndarray) -> float | np.ndarray:
        """Robin function of h^2 g0 (regular diagonal part of green)."""
        s_arr = np.atleast_2d(np.asarray(s, dtype=float))
        r = (
            ROUND_ROBIN
            - self.metric.log_h(s_arr) / (2.0 * np.pi)
            - 2.0 * self.u(s_arr) / self.area
            + self.cterm
        )
        return float(r[0]) if r.size == 1 else r

    def two_point_green(self, s: np.ndarray, s0: np.ndarray, s1: np.ndarray) -> float | np.ndarray:
        """Difference green(s, s0) - green(s, s1); conformally natural."""
        s_arr = np.atleast_2d(np.asarray(s, dtype=float))
        s0 = np.asarray(s0, dtype=float)
        s1 = np.asarray(s1, dtype=float)
        if np.linalg.norm(s0 - s1) < SINGULARITY_GUARD:
            out = np.zeros(s_arr.shape[0])
            return float(out[0]) if out.size == 1 else out
        g = np.asarray(self.green(s_arr, s0)) - np.asarray(self.green(s_arr, s1))
        g = np.atleast_1d(g)
        return float(g[0]) if g.size == 1 else g

    def conformal_dist(self, s1: np.ndarray, s2: np.ndarray) -> float:
        return conformal_distance(self.metric, s1, s2)

    def batman(self, s1: np.ndarray, s2: np.ndarray) -> float:
        """Symmetric regular pair interaction (the dipole perturbation term).

        B = (R(s1)+R(s2))/2 - (G(s1,s2) - log d(s1,s2)/2pi) with d the
        geodesic distance of the conformal metric; vanishes on the diagonal.
        """
        s1 = normalize(np.asarray(s1, dtype=float))
        s2 = normalize(np.asarray(s2, dtype=float))
        d = self.conformal_dist(s1, s2)
        if d < SINGULARITY_GUARD:
            raise SingularityError("batman function evaluated at coincident points")
        r1 = self.robin(s1)
        r2 = self.robin(s2)
        g = self.green(s1, s2)
        return 0.5 * (r1 + r2) - (g - np.log(d) / (2.0 * np.pi))

    # -- validation quantities ----------------------------------------------
    def robin_grid(self) -> np.ndarray:
        m = self.metric
        return (
            ROUND_ROBIN
            - np.log(m.h_grid) / (2.0 * np.pi)
            - 2.0 * m.u_grid / self.area
            + self.cterm
        )

    def steiner_residual(self) -> float:
        """Sup-norm defect of the curvature identity for the Robin function.

        Checks Lap0 R = (1/2pi) h^2 (K - 4pi/A) on the grid, with K the
        curvature and A the area of the conformal metric; both sides are
        assembled spectrally, so a small value validates the construction.
        """
        m = self.metric
        lap_r = m.grid.synthesize(spectral.laplacian_coeffs(m.grid.analyze(self.robin_grid())))
        rhs = m.h2_grid * (gaussian_curvature_grid(m) - 4.0 * np.pi / self.area) / (2.0 * np.pi)
        return float(np.abs(lap_r - rhs).max())


def weighted_mean_of_green(ev: GreensEvaluator, s0: np.ndarray, nphi: int = 64) -> float:
    """Area-weighted mean of green(., s0), singularity-aware quadrature.

    Rotates s0 to the pole so the logarithmic singularity sits at a chart
    endpoint, averages over longitude with a uniform rule (spectrally exact
    for smooth factors) and integrates the colatitude adaptively.  Should
    vanish for a correctly assembled evaluator.
    """
    from scipy.integrate import quad

    from .sphere import tangent_basis

    s0 = normalize(np.asarray(s0, dtype=float))
    e1, e2 = tangent_basis(s0)
    frame = np.stack([e1, e2, s0], axis=1)  # columns map pole frame -> ambient
    phis = 2.0 * np.pi * np.arange(nphi) / nphi

    def ring_integrand(theta: float) -> float:
        st, ct = np.sin(theta), np.cos(theta)
        local = np.stack(
            [st * np.cos(phis), st * np.sin(phis), np.full(nphi, ct)], axis=-1
        )
        pts = local @ frame.T
        gvals = np.asarray(ev.green(pts, s0))
        h2 = ev.metric.h(pts) ** 2
        return float(np.mean(gvals * h2)) * 2.0 * np.pi * st

    val, _ = quad(ring_integrand, 1e-9, np.pi, limit=200, epsabs=1e-12, epsrel=1e-12)
    return val / ev.area

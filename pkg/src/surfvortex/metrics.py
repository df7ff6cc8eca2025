"""Conformal metrics h^2 g0 on the unit sphere and their cached spectral data.

A ConformalMetric bundles a positive factor h (closed-form callable or a
spherical-harmonic table), the quadrature grid of its truncation degree,
and everything the Green/Robin machinery needs: total area, coefficients of
log h, and coefficients of the inverse Laplacian of h^2.
"""

from __future__ import annotations

import logging

import numpy as np

from . import spectral
from .ellipsoid import TriaxialConformalMap
from .errors import MetricError
from .sphere import normalize, rotation_matrix

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

log = logging.getLogger(__name__)

DEFAULT_LMAX = 32
_POLE_CLAMP = 1.0 - 1e-12


_POLE_SERIES_THETA = 1e-3


def _pole_series_constants(a: float, c: float) -> tuple[float, float]:
    """Leading constants of TH(theta) = lam*theta*(1 + q2*theta^2) at a pole.

    The closed-form inversion cancels catastrophically there (artanh of
    1 - O(TH^2)); the series takes over below _POLE_SERIES_THETA.
    """
    b_par = a * a - c * c
    if b_par > 0:
        e1 = np.sqrt(b_par) * np.arcsinh(np.sqrt(b_par) / c) / a
    elif b_par < 0:
        e1 = -np.sqrt(-b_par) * np.arcsin(min(np.sqrt(-b_par) / c, 1.0)) / a
    else:
        e1 = 0.0
    lam = (a / c) * np.exp(-e1)
    gamma = (c * c - a * a) / (a * a)
    q2 = 1.0 / 12.0 - (1.0 / 12.0 + gamma / 4.0) * lam * lam
    return lam, q2


def _colatitude_solve_py(theta, a, c):
    """Newton solve of the spheroid conformal-latitude equation (fallback)."""
    b_par = a * a - c * c
    sqb = np.sqrt(abs(b_par))
    target = -np.arctanh(np.clip(np.cos(theta), -_POLE_CLAMP, _POLE_CLAMP))
    tau = target.copy()
    for _ in range(80):
        big = 2.0 * np.arctan(np.exp(tau))
        u = np.cos(big)
        w = np.sqrt(c * c + b_par * u * u)
        main = -np.arctanh(np.clip(a * u / w, -1 + 1e-16, 1 - 1e-16))
        if b_par > 0:
            extra = sqb * np.arcsinh(sqb * u / c) / a
        elif b_par < 0:
            extra = -sqb * np.arcsin(np.clip(sqb * u / c, -1.0, 1.0)) / a
        else:
            extra = 0.0
        resid = main + extra - target
        deriv = np.sqrt(a * a * np.cos(big) ** 2 + c * c * np.sin(big) ** 2) / a
        step = resid / deriv
        tau = tau - step
        if np.max(np.abs(step)) < 1e-15:
            break
    out = 2.0 * np.arctan(np.exp(tau))
    lam, q2 = _pole_series_constants(a, c)
    north = theta < _POLE_SERIES_THETA
    if np.any(north):
        out = np.where(north, lam * theta * (1.0 + q2 * theta * theta), out)
    south = np.pi - theta < _POLE_SERIES_THETA
    if np.any(south):
        tp = np.pi - theta
        out = np.where(south, np.pi - lam * tp * (1.0 + q2 * tp * tp), out)
    return out


if _HAVE_NUMBA:

    @njit(cache=True)
    def _colatitude_solve_nb(theta, a, c, lam, q2):  # pragma: no cover
        b_par = a * a - c * c
        sqb = np.sqrt(abs(b_par))
        clamp = 1.0 - 1e-12
        out = np.empty_like(theta)
        for i in range(theta.size):
            if theta[i] < 1e-3:
                out[i] = lam * theta[i] * (1.0 + q2 * theta[i] * theta[i])
                continue
            if np.pi - theta[i] < 1e-3:
                tp = np.pi - theta[i]
                out[i] = np.pi - lam * tp * (1.0 + q2 * tp * tp)
                continue
            ct = np.cos(theta[i])
            if ct > clamp:
                ct = clamp
            elif ct < -clamp:
                ct = -clamp
            target = -np.arctanh(ct)
            tau = target
            for _ in range(80):
                big = 2.0 * np.arctan(np.exp(tau))
                u = np.cos(big)
                w = np.sqrt(c * c + b_par * u * u)
                arg = a * u / w
                if arg > 1.0 - 1e-16:
                    arg = 1.0 - 1e-16
                elif arg < -1.0 + 1e-16:
                    arg = -1.0 + 1e-16
                if b_par > 0.0:
                    extra = sqb * np.arcsinh(sqb * u / c) / a
                elif b_par < 0.0:
                    sarg = sqb * u / c
                    if sarg > 1.0:
                        sarg = 1.0
                    elif sarg < -1.0:
                        sarg = -1.0
                    extra = -sqb * np.arcsin(sarg) / a
                else:
                    extra = 0.0
                resid = -np.arctanh(arg) + extra - target
                sb = np.sin(big)
                deriv = np.sqrt(a * a * u * u + c * c * sb * sb) / a
                step = resid / deriv
                tau -= step
                if abs(step) < 1e-15:
                    break
            out[i] = 2.0 * np.arctan(np.exp(tau))
        return out


def _colatitude_solve(theta, a, c):
    if _HAVE_NUMBA:
        lam, q2 = _pole_series_constants(a, c)
        return _colatitude_solve_nb(np.ascontiguousarray(theta, dtype=float), a, c, lam, q2)
    return _colatitude_solve_py(np.asarray(theta, dtype=float), a, c)


class ConformalMetric:
    """Metric h^2 g0 with cached spectral data on a degree-lmax grid.

    Immutable after construction; safe to share between concurrent runs.
    """

    def __init__(
        self,
        lmax: int = DEFAULT_LMAX,
        h_func=None,
        grad_log_h_func=None,
        h_grid_values: np.ndarray | None = None,
        uniform_value: float | None = None,
        symmetry_axis: np.ndarray | None = None,
        name: str = "custom",
        surface_map: TriaxialConformalMap | None = None,
    ):
        self.lmax = int(lmax)
        self.grid = spectral.SphereGrid(self.lmax)
        self.name = name
        self.surface_map = surface_map
        self.uniform_value = uniform_value
        self.symmetry_axis = None if symmetry_axis is None else normalize(symmetry_axis)
        self._h_func = h_func
        self._grad_log_h_func = grad_log_h_func

        if h_func is not None:
            hg = self.grid.sample(h_func)
        elif h_grid_values is not None:
            hg = np.asarray(h_grid_values, dtype=float)
            if hg.shape != (self.grid.nlat, self.grid.nlon):
                raise MetricError("h table does not match the quadrature grid")
        else:
            raise MetricError("either h_func or h_grid_values is required")
        bad = np.argwhere(~(hg > 0.0) | ~np.isfinite(hg))
        if bad.size:
            i, j = bad[0]
            raise MetricError(
                f"conformal factor must be positive: h = {hg[i, j]:.6g} at grid node "
                f"theta = {self.grid.theta[i]:.6f}, phi = {self.grid.phi[j]:.6f}"
            )
        self.h_grid = hg
        self.h2_grid = hg * hg
        self.area = self.grid.integrate(self.h2_grid)
        if self.uniform_value is not None:
            self.log_h_coeffs = spectral.coeff_zeros(self.lmax)
            self.log_h_coeffs[0, self.lmax] = np.log(self.uniform_value) * np.sqrt(4.0 * np.pi)
            self.u_coeffs = spectral.coeff_zeros(self.lmax)
        else:
            self.log_h_coeffs = self.grid.analyze(np.log(hg))
            self.u_coeffs = spectral.invert_laplacian(self.grid.analyze(self.h2_grid))
        self.u_grid = self.grid.synthesize(self.u_coeffs)
        self.spectral_tail = self._tail_fraction(self.log_h_coeffs)
        if self.spectral_tail > 1e-8:
            log.warning(
                "metric %s: log h spectrum tail fraction %.2e at lmax=%d; "
                "consider a higher truncation degree",
                name,
                self.spectral_tail,
                self.lmax,
            )

    @staticmethod
    def _tail_fraction(coeffs: np.ndarray) -> float:
        lmax = coeffs.shape[0] - 1
        if lmax < 5:
            return 0.0
        power = np.sum(coeffs[1:] ** 2, axis=1)
        total = power.sum()
        if total == 0.0:
            return 0.0
        lcut = max(1, int(0.8 * lmax))
        return float(power[lcut:].sum() / total)

    # -- factor evaluation --------------------------------------------------
    @property
    def is_uniform(self) -> bool:
        return self.uniform_value is not None

    def h(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.uniform_value is not None:
            return np.full(pts.shape[0], self.uniform_value)
        if self._h_func is not None:
            return np.asarray(self._h_func(pts), dtype=float)
        return np.exp(spectral.eval_values(self.log_h_coeffs, pts))

    def log_h(self, pts: np.ndarray) -> np.ndarray:
        return np.log(self.h(pts))

    def grad_log_h(self, pts: np.ndarray) -> np.ndarray:
        """Tangential gradient of log h, shape (P, 3)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.uniform_value is not None:
            return np.zeros_like(pts)
        if self._grad_log_h_func is not None:
            return np.asarray(self._grad_log_h_func(pts), dtype=float)
        return spectral.eval_gradients(self.log_h_coeffs, pts)

    def h_and_grad_log(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Factor and tangential grad(log h) in one pass (dynamics hot path)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.uniform_value is not None:
            return np.full(pts.shape[0], self.uniform_value), np.zeros_like(pts)
        if isinstance(self._h_func, SpheroidFactor):
            return self._h_func.value_and_grad_log(pts)
        if self._h_func is not None:
            return self.h(pts), self.grad_log_h(pts)
        vals, grads = spectral.eval_expansion(self.log_h_coeffs, pts)
        return np.exp(vals), grads

    def u_value_grad(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Value and tangential gradient of u = Lap0^-1 h^2 (zero-mean)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.uniform_value is not None:
            return np.zeros(pts.shape[0]), np.zeros_like(pts)
        return spectral.eval_expansion(self.u_coeffs, pts)

    def inv_laplacian(self, f_values: np.ndarray) -> np.ndarray:
        """Conformal inverse Laplacian of grid samples (coefficients of u)."""
        return spectral.solve_poisson_conformal(self.grid, self.h2_grid, f_values, self.area)

    def axis_momentum_profile(self):
        """Antiderivative Phi of the longitudinal mean of h^2 along the axis.

        For an axisymmetric metric the rotation about symmetry_axis has
        momentum map sum_j k_j Phi(axis . s_j): latitudes are weighted by
        the conformal area between them, which reduces to the plain height
        for the round sphere.  Returns a vectorized callable of z = axis.s.
        """
        if self.symmetry_axis is None and self.uniform_value is None:
            raise MetricError("axis momentum profile needs a symmetry axis")
        if getattr(self, "_axis_profile", None) is None:
            if self.uniform_value is not None:
                coeffs = np.array([0.0, self.uniform_value**2])
            else:
                axis = self.symmetry_axis
                k = np.argmin(np.abs(axis))
                e1 = np.cross(axis, np.eye(3)[k])
                e1 /= np.linalg.norm(e1)
                e2 = np.cross(axis, e1)
                nlat = 2 * self.lmax + 2
                x, w = np.polynomial.legendre.leggauss(nlat)
                phis = 2.0 * np.pi * np.arange(64) / 64
                st = np.sqrt(1.0 - x * x)
                pts = (
                    st[:, None, None] * (np.cos(phis)[None, :, None] * e1 + np.sin(phis)[None, :, None] * e2)
                    + x[:, None, None] * axis
                )
                h2bar = (self.h(pts.reshape(-1, 3)) ** 2).reshape(nlat, 64).mean(axis=1)
                deg = self.lmax
                vand = np.polynomial.legendre.legvander(x, deg)
                ck = ((w * h2bar) @ vand) * (np.arange(deg + 1) + 0.5)
                coeffs = np.polynomial.legendre.legint(ck)
            self._axis_profile = coeffs
        coeffs = self._axis_profile
        return lambda z: np.polynomial.legendre.legval(np.asarray(z, dtype=float), coeffs)


def total_area(metric: ConformalMetric) -> float:
    return metric.area


def gaussian_curvature(metric: ConformalMetric, pts: np.ndarray) -> float | np.ndarray:
    """Curvature of h^2 g0 via the conformal identity (1 - Lap0 log h)/h^2."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if metric.is_uniform:
        k = np.full(pts.shape[0], 1.0 / metric.uniform_value**2)
    else:
        lap = spectral.eval_values(spectral.laplacian_coeffs(metric.log_h_coeffs), pts)
        k = (1.0 - lap) / metric.h(pts) ** 2
    return float(k[0]) if k.size == 1 else k


def gaussian_curvature_grid(metric: ConformalMetric) -> np.ndarray:
    """Curvature sampled on the metric's own quadrature grid."""
    if metric.is_uniform:
        return np.full_like(metric.h_grid, 1.0 / metric.uniform_value**2)
    lap = metric.grid.synthesize(spectral.laplacian_coeffs(metric.log_h_coeffs))
    return (1.0 - lap) / metric.h2_grid


def inv_laplacian_conformal(metric: ConformalMetric, f_values: np.ndarray) -> np.ndarray:
    """Module-level alias for the conformal Poisson solve on grid samples."""
    return metric.inv_laplacian(f_values)


# --- built-in factors -------------------------------------------------------


def round_metric(lmax: int = DEFAULT_LMAX) -> ConformalMetric:
    return ConformalMetric(
        lmax,
        h_func=lambda p: np.ones(np.atleast_2d(p).shape[0]),
        uniform_value=1.0,
        name="round",
    )


def scaled_metric(c: float, lmax: int = DEFAULT_LMAX) -> ConformalMetric:
    if c <= 0:
        raise MetricError("scale factor must be positive")
    return ConformalMetric(
        lmax,
        h_func=lambda p: np.full(np.atleast_2d(p).shape[0], float(c)),
        uniform_value=float(c),
        name=f"scaled:{c:g}",
    )


class SpheroidFactor:
    """Closed-form conformal factor of a spheroid (axisymmetric ellipsoid).

    The sphere latitude maps to the spheroid's parametric latitude through
    the conformal-latitude integral of the meridian ellipse,

        M(TH) = int sqrt(a^2 cos^2 t + c^2 sin^2 t)/(a sin t) dt
              = -artanh(a u / w) + (1/a) int B/sqrt(c^2 + B t^2) dt,

    with u = cos TH, B = a^2 - c^2, w = sqrt(c^2 + B u^2); the second term
    is an arsinh (oblate) or arcsin (prolate).  The factor is
    h = a sin TH / sin th with ln tan(th/2) = M(TH).
    """

    def __init__(self, a: float, c: float, axis: np.ndarray | None = None):
        if a <= 0 or c <= 0:
            raise MetricError("spheroid semi-axes must be positive")
        self.a, self.c = float(a), float(c)
        self.B = self.a**2 - self.c**2
        self.rot = None
        if axis is not None:
            axis = normalize(np.asarray(axis, dtype=float))
            if abs(axis @ np.array([0.0, 0.0, 1.0])) < 1.0 - 1e-14:
                raxis = np.cross(axis, [0.0, 0.0, 1.0])
                ang = np.arccos(np.clip(axis @ np.array([0.0, 0.0, 1.0]), -1, 1))
                self.rot = rotation_matrix(raxis, ang)

    def _conformal_lat(self, u):
        """M as a function of u = cos TH."""
        a, c, B = self.a, self.c, self.B
        w = np.sqrt(c * c + B * u * u)
        main = -np.arctanh(np.clip(a * u / w, -1 + 1e-16, 1 - 1e-16))
        if B > 0:
            extra = np.sqrt(B) * np.arcsinh(np.sqrt(B) * u / c) / a
        elif B < 0:
            extra = -np.sqrt(-B) * np.arcsin(np.clip(np.sqrt(-B) * u / c, -1.0, 1.0)) / a
        else:
            extra = 0.0
        return main + extra

    def _meridian_speed(self, big_theta):
        return np.sqrt(self.a**2 * np.cos(big_theta) ** 2 + self.c**2 * np.sin(big_theta) ** 2)

    def parametric_colatitude(self, theta):
        """Spheroid parametric colatitude TH(theta) solving M(TH) = m(theta).

        Newton in tau = ln tan(TH/2); the derivative dM/dtau lies between
        min(1, c/a) and max(1, c/a), so the iteration is well conditioned.
        """
        return _colatitude_solve(np.asarray(theta, dtype=float), self.a, self.c)

    def _theta_of(self, pts):
        z = np.clip(pts[:, 2], -_POLE_CLAMP, _POLE_CLAMP)
        return np.arccos(z)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.rot is not None:
            pts = pts @ self.rot.T
        theta = self._theta_of(pts)
        big = self.parametric_colatitude(theta)
        return self.a * np.sin(big) / np.sin(theta)

    def grad_log(self, pts: np.ndarray) -> np.ndarray:
        return self.value_and_grad_log(pts)[1]

    def value_and_grad_log(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Factor h and tangential grad(log h) with one colatitude solve."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        work = pts @ self.rot.T if self.rot is not None else pts
        theta = self._theta_of(work)
        big = self.parametric_colatitude(theta)
        st = np.sin(theta)
        h = self.a * np.sin(big) / st
        dlog = (self.a * np.cos(big) / self._meridian_speed(big) - np.cos(theta)) / st
        rho = np.sqrt(work[:, 0] ** 2 + work[:, 1] ** 2)
        safe = rho > 1e-9
        e_theta = np.zeros_like(work)
        e_theta[safe, 0] = work[safe, 2] * work[safe, 0] / rho[safe]
        e_theta[safe, 1] = work[safe, 2] * work[safe, 1] / rho[safe]
        e_theta[safe, 2] = -rho[safe]
        grad = dlog[:, None] * e_theta
        grad[~safe] = 0.0  # axis points: gradient vanishes by symmetry
        if self.rot is not None:
            grad = grad @ self.rot
        return h, grad

    def map_point(self, pts: np.ndarray) -> np.ndarray:
        """Correspondence sphere -> embedded spheroid (axis-aligned frame)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.rot is not None:
            pts = pts @ self.rot.T
        theta = self._theta_of(pts)
        big = self.parametric_colatitude(theta)
        rho = np.sqrt(pts[:, 0] ** 2 + pts[:, 1] ** 2)
        cosp = np.where(rho > 1e-15, pts[:, 0] / np.where(rho > 1e-15, rho, 1.0), 1.0)
        sinp = np.where(rho > 1e-15, pts[:, 1] / np.where(rho > 1e-15, rho, 1.0), 0.0)
        return np.stack(
            [
                self.a * np.sin(big) * cosp,
                self.a * np.sin(big) * sinp,
                self.c * np.cos(big),
            ],
            axis=-1,
        )


def spheroid_metric(a: float, c: float, lmax: int = DEFAULT_LMAX) -> ConformalMetric:
    """Spheroid x^2/a^2 + y^2/a^2 + z^2/c^2 = 1, symmetric about the z-axis."""
    if a == c:
        return scaled_metric(a, lmax)
    factor = SpheroidFactor(a, c)
    return ConformalMetric(
        lmax,
        h_func=factor,
        grad_log_h_func=factor.grad_log,
        symmetry_axis=np.array([0.0, 0.0, 1.0]),
        name=f"spheroid:{a:g},{c:g}",
    )


def spheroid_area(a: float, c: float) -> float:
    """Closed-form surface area of the spheroid (oracle for quadrature)."""
    if a == c:
        return 4.0 * np.pi * a * a
    if a > c:  # oblate
        e = np.sqrt(1.0 - c * c / (a * a))
        return 2.0 * np.pi * a * a * (1.0 + (1.0 - e * e) / e * np.arctanh(e))
    e = np.sqrt(1.0 - a * a / (c * c))  # prolate
    return 2.0 * np.pi * a * a * (1.0 + c / (a * e) * np.arcsin(e))


def ellipsoid_metric(a: float, b: float, c: float, lmax: int = DEFAULT_LMAX) -> ConformalMetric:
    """Conformal factor of the ellipsoid with semi-axes a >= b >= c > 0.

    Strictly triaxial axes use the sphero-conical construction; coincident
    axes reduce to the closed-form spheroid (about z for a = b, about x for
    b = c) or to a scaled sphere.
    """
    if not (a >= b >= c > 0):
        raise MetricError("ellipsoid semi-axes must satisfy a >= b >= c > 0")
    if a == b == c:
        return scaled_metric(a, lmax)
    if a == b:  # oblate about z
        m = spheroid_metric(a, c, lmax)
        m.name = f"ellipsoid:{a:g},{b:g},{c:g}"
        return m
    if b == c:  # prolate about x
        factor = SpheroidFactor(b, a, axis=np.array([1.0, 0.0, 0.0]))
        return ConformalMetric(
            lmax,
            h_func=factor,
            grad_log_h_func=factor.grad_log,
            symmetry_axis=np.array([1.0, 0.0, 0.0]),
            name=f"ellipsoid:{a:g},{b:g},{c:g}",
        )
    # sample the exact factor on the quadrature grid; dynamics then works
    # with the spectral representation while the exact map stays available
    # on surface_map for diagnostics
    cmap = TriaxialConformalMap(a, b, c)
    grid = spectral.SphereGrid(lmax)
    h_values = cmap.factor(grid.xyz.reshape(-1, 3)).reshape(grid.nlat, grid.nlon)
    return ConformalMetric(
        lmax,
        h_grid_values=h_values,
        name=f"ellipsoid:{a:g},{b:g},{c:g}",
        surface_map=cmap,
    )


def metric_from_table(path, lmax: int = DEFAULT_LMAX) -> ConformalMetric:
    """Metric from a CSV coefficient table of `log_h` or `h`."""
    coeffs, field = spectral.load_coeffs(path)
    table_lmax = coeffs.shape[0] - 1
    if table_lmax > lmax:
        raise MetricError(
            f"table degree {table_lmax} exceeds the metric truncation degree {lmax}"
        )
    padded = spectral.coeff_zeros(lmax)
    padded[: table_lmax + 1, lmax - table_lmax : lmax + table_lmax + 1] = coeffs
    grid = spectral.SphereGrid(lmax)
    values = grid.synthesize(padded)
    if field == "log_h":
        h_values = np.exp(values)
    elif field == "h":
        h_values = values
    else:
        raise MetricError(f"table field must be 'log_h' or 'h', got {field!r}")
    return ConformalMetric(lmax, h_grid_values=h_values, name=f"sh-table:{path}")


def metric_from_name(name: str, lmax: int = DEFAULT_LMAX) -> ConformalMetric:
    """Parse built-in metric names used in configuration files.

    Accepted: "round", "scaled:c", "spheroid:a,c", "ellipsoid:a,b,c",
    "sh-table:<path>".
    """
    name = name.strip()
    if name == "round":
        return round_metric(lmax)
    if ":" not in name:
        raise MetricError(f"unknown metric name {name!r}")
    kind, arg = name.split(":", 1)
    if kind == "scaled":
        return scaled_metric(float(arg), lmax)
    if kind == "spheroid":
        parts = [float(v) for v in arg.split(",")]
        if len(parts) != 2:
            raise MetricError("spheroid metric needs two parameters a,c")
        return spheroid_metric(parts[0], parts[1], lmax)
    if kind == "ellipsoid":
        parts = [float(v) for v in arg.split(",")]
        if len(parts) != 3:
            raise MetricError("ellipsoid metric needs three parameters a,b,c")
        return ellipsoid_metric(parts[0], parts[1], parts[2], lmax)
    if kind == "sh-table":
        return metric_from_table(arg, lmax)
    raise MetricError(f"unknown metric name {name!r}")

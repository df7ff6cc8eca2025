"""Real spherical-harmonic analysis/synthesis and Laplace-Beltrami inversion.

Basis: orthonormal real harmonics on the unit sphere,

    Y_{l,0}  = K_{l,0}(cos th)
    Y_{l,m}  = sqrt(2) K_{l,m}(cos th) cos(m ph)   (m > 0)
    Y_{l,-m} = sqrt(2) K_{l,m}(cos th) sin(m ph)   (m > 0)

with K_{l,m} the 4pi-normalized associated Legendre functions (no
Condon-Shortley phase).  Coefficients are stored in a dense array of shape
(L+1, 2L+1), entry [l, L+m].  The l=0 coefficient equals the field mean
times sqrt(4pi).

Point evaluation away from the grid uses the ambient polynomial form
K_{l,m}(z) = A_{l,m}(z) sin^m(th) with sin^m(th) e^{im ph} = (x+iy)^m, which
is stable everywhere including the poles.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


SQRT2 = np.sqrt(2.0)


def lm_index(l: int, m: int) -> int:
    """Packed index of (l, m) with 0 <= m <= l."""
    return l * (l + 1) // 2 + m


def num_lm(lmax: int) -> int:
    return (lmax + 1) * (lmax + 2) // 2


def coeff_zeros(lmax: int) -> np.ndarray:
    return np.zeros((lmax + 1, 2 * lmax + 1))


def _recurrence_tables(lmax: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients for the stable l-recurrence of normalized Legendre functions."""
    acoef = np.zeros((lmax + 1, lmax + 1))
    bcoef = np.zeros((lmax + 1, lmax + 1))
    for m in range(lmax + 1):
        for l in range(m + 2, lmax + 1):
            acoef[l, m] = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            bcoef[l, m] = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
    cmm = np.zeros(lmax + 1)
    cmm[0] = np.sqrt(1.0 / (4.0 * np.pi))
    for m in range(1, lmax + 1):
        cmm[m] = cmm[m - 1] * np.sqrt((2.0 * m + 1.0) / (2.0 * m))
    return acoef, bcoef, cmm


_TABLE_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _tables(lmax: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if lmax not in _TABLE_CACHE:
        _TABLE_CACHE[lmax] = _recurrence_tables(lmax)
    return _TABLE_CACHE[lmax]


def stripped_legendre(lmax: int, z: np.ndarray) -> np.ndarray:
    """A_{l,m}(z) = K_{l,m}(z) / sin^m(th), shape (num_lm, len(z)).

    Polynomial in z, finite at the poles; the building block for both the
    grid tables and the ambient point evaluator.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    acoef, bcoef, cmm = _tables(lmax)
    out = np.zeros((num_lm(lmax), z.size))
    for m in range(lmax + 1):
        pmm = np.full(z.size, cmm[m])
        out[lm_index(m, m)] = pmm
        if m < lmax:
            pm1 = np.sqrt(2.0 * m + 3.0) * z * pmm
            out[lm_index(m + 1, m)] = pm1
            pm2 = pmm
            for l in range(m + 2, lmax + 1):
                pl = acoef[l, m] * (z * pm1 - bcoef[l, m] * pm2)
                out[lm_index(l, m)] = pl
                pm2, pm1 = pm1, pl
    return out


class SphereGrid:
    """Gauss-Legendre x uniform-longitude quadrature grid of degree lmax.

    lmax+1 latitude nodes and 2*lmax+2 longitudes: analysis is exact for
    fields band-limited to degree lmax.
    """

    def __init__(self, lmax: int):
        if lmax < 0:
            raise ValueError("lmax must be nonnegative")
        self.lmax = int(lmax)
        x, w = np.polynomial.legendre.leggauss(self.lmax + 1)
        self.x = x  # cos(theta), ascending
        self.wlat = w
        self.theta = np.arccos(x)
        self.nlat = self.lmax + 1
        self.nlon = 2 * self.lmax + 2
        self.phi = 2.0 * np.pi * np.arange(self.nlon) / self.nlon
        self.dphi = 2.0 * np.pi / self.nlon
        s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
        alf = stripped_legendre(self.lmax, x)
        ktab = np.empty_like(alf)
        for m in range(self.lmax + 1):
            spow = s**m
            for l in range(m, self.lmax + 1):
                ktab[lm_index(l, m)] = alf[lm_index(l, m)] * spow
        self.ktab = ktab  # K_{l,m}(x_i), packed (l,m) x latitude
        self.cosm = np.cos(np.outer(np.arange(self.lmax + 1), self.phi))
        self.sinm = np.sin(np.outer(np.arange(self.lmax + 1), self.phi))
        # ambient coordinates of the nodes, shape (nlat, nlon, 3)
        st, ct = np.sin(self.theta), np.cos(self.theta)
        cp, sp = np.cos(self.phi), np.sin(self.phi)
        self.xyz = np.stack(
            [np.outer(st, cp), np.outer(st, sp), np.outer(ct, np.ones(self.nlon))],
            axis=-1,
        )

    # -- quadrature -------------------------------------------------------
    def integrate(self, values: np.ndarray) -> float:
        """Integral over the sphere w.r.t. the round area element."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.nlat, self.nlon):
            raise ValueError(f"grid field must have shape {(self.nlat, self.nlon)}")
        return float(self.wlat @ values.sum(axis=1)) * self.dphi

    def mean(self, values: np.ndarray) -> float:
        return self.integrate(values) / (4.0 * np.pi)

    def sample(self, func) -> np.ndarray:
        """Sample a callable of ambient points (P,3)->(P,) on the grid."""
        pts = self.xyz.reshape(-1, 3)
        return np.asarray(func(pts), dtype=float).reshape(self.nlat, self.nlon)

    # -- transforms -------------------------------------------------------
    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Grid samples -> coefficients; exact for band limit <= lmax."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.nlat, self.nlon):
            raise ValueError(f"grid field must have shape {(self.nlat, self.nlon)}")
        fhat = np.fft.rfft(values, axis=1)
        ccos = fhat.real[:, : self.lmax + 1] * self.dphi
        csin = -fhat.imag[:, : self.lmax + 1] * self.dphi
        coeffs = coeff_zeros(self.lmax)
        L = self.lmax
        for m in range(L + 1):
            rows = [lm_index(l, m) for l in range(m, L + 1)]
            wk = self.ktab[rows] * self.wlat  # (L+1-m, nlat)
            if m == 0:
                coeffs[m:, L] = wk @ ccos[:, 0]
            else:
                coeffs[m:, L + m] = SQRT2 * (wk @ ccos[:, m])
                coeffs[m:, L - m] = SQRT2 * (wk @ csin[:, m])
        return coeffs

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficients -> grid samples."""
        coeffs = self._check_coeffs(coeffs)
        L = self.lmax
        values = np.zeros((self.nlat, self.nlon))
        for m in range(L + 1):
            rows = [lm_index(l, m) for l in range(m, L + 1)]
            k = self.ktab[rows]  # (L+1-m, nlat)
            if m == 0:
                values += np.outer(coeffs[:, L] @ k, np.ones(self.nlon))
            else:
                gc = coeffs[m:, L + m] @ k
                gs = coeffs[m:, L - m] @ k
                values += SQRT2 * (np.outer(gc, self.cosm[m]) + np.outer(gs, self.sinm[m]))
        return values

    def _check_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.lmax + 1, 2 * self.lmax + 1):
            raise ValueError(f"coefficients must have shape {(self.lmax + 1, 2 * self.lmax + 1)}")
        return coeffs


def laplacian_coeffs(coeffs: np.ndarray) -> np.ndarray:
    """Forward Laplace-Beltrami operator of the round sphere, spectrally."""
    coeffs = np.asarray(coeffs, dtype=float)
    lmax = coeffs.shape[0] - 1
    l = np.arange(lmax + 1, dtype=float)
    return coeffs * (-l * (l + 1.0))[:, None]


def invert_laplacian(coeffs: np.ndarray) -> np.ndarray:
    """Spectral inverse of the round Laplacian with zero-mean convention.

    Coefficient (l, m) is divided by -l(l+1); the l=0 component (the mean)
    is projected out, so the result always has zero round-sphere mean.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    lmax = coeffs.shape[0] - 1
    l = np.arange(lmax + 1, dtype=float)
    fac = np.zeros(lmax + 1)
    fac[1:] = -1.0 / (l[1:] * (l[1:] + 1.0))
    return coeffs * fac[:, None]


def solve_poisson_conformal(
    grid: SphereGrid, h2_values: np.ndarray, f_values: np.ndarray, total_area: float
) -> np.ndarray:
    """Invert the Laplacian of the metric h^2 g0 on grid samples of f.

    Returns coefficients of u with  Lap0 u = h^2 (f - fbar)  and zero
    round-sphere mean, where fbar is the h^2-weighted mean of f.  Since
    Lap_{h^2 g0} = h^-2 Lap0, u realizes the conformal inverse Laplacian up
    to its additive constant.
    """
    fbar = grid.integrate(f_values * h2_values) / total_area
    rhs = h2_values * (f_values - fbar)
    return invert_laplacian(grid.analyze(rhs))


# --- point evaluation (values and tangential gradients) -------------------


@njit(cache=True)
def _eval_kernel(coeffs, pts, acoef, bcoef, cmm, vals, grads):  # pragma: no cover
    nf = coeffs.shape[0]
    lmax = coeffs.shape[1] - 1
    npts = pts.shape[0]
    sq2 = np.sqrt(2.0)
    for p in range(npts):
        x = pts[p, 0]
        y = pts[p, 1]
        z = pts[p, 2]
        tc = 1.0
        ts = 0.0
        tcp = 0.0
        tsp = 0.0
        for m in range(lmax + 1):
            if m > 0:
                tcp = tc
                tsp = ts
                tc = tcp * x - tsp * y
                ts = tcp * y + tsp * x
            pmm = cmm[m]
            dmm = 0.0
            pm1 = pmm
            dm1 = dmm
            pm2 = 0.0
            dm2 = 0.0
            for l in range(m, lmax + 1):
                if l == m:
                    pl = pmm
                    dl = dmm
                elif l == m + 1:
                    sq = np.sqrt(2.0 * m + 3.0)
                    pl = sq * z * pm1
                    dl = sq * (pm1 + z * dm1)
                else:
                    a = acoef[l, m]
                    b = bcoef[l, m]
                    pl = a * (z * pm1 - b * pm2)
                    dl = a * (pm1 + z * dm1 - b * dm2)
                if l > m:
                    pm2 = pm1
                    dm2 = dm1
                    pm1 = pl
                    dm1 = dl
                for f in range(nf):
                    if m == 0:
                        cc = coeffs[f, l, lmax]
                        vals[f, p] += cc * pl
                        grads[f, p, 2] += cc * dl
                    else:
                        cc = coeffs[f, l, lmax + m]
                        cs = coeffs[f, l, lmax - m]
                        vals[f, p] += sq2 * pl * (cc * tc + cs * ts)
                        grads[f, p, 0] += sq2 * pl * m * (cc * tcp + cs * tsp)
                        grads[f, p, 1] += sq2 * pl * m * (cs * tcp - cc * tsp)
                        grads[f, p, 2] += sq2 * dl * (cc * tc + cs * ts)
        for f in range(nf):
            r = grads[f, p, 0] * x + grads[f, p, 1] * y + grads[f, p, 2] * z
            grads[f, p, 0] -= r * x
            grads[f, p, 1] -= r * y
            grads[f, p, 2] -= r * z


def _eval_fallback(coeffs, pts, acoef, bcoef, cmm, vals, grads):
    """Pure-numpy version of the point kernel (vectorized over points)."""
    nf, lmax = coeffs.shape[0], coeffs.shape[1] - 1
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    tc, ts = np.ones_like(x), np.zeros_like(x)
    tcp, tsp = np.zeros_like(x), np.zeros_like(x)
    for m in range(lmax + 1):
        if m > 0:
            tcp, tsp = tc, ts
            tc, ts = tcp * x - tsp * y, tcp * y + tsp * x
        pm1 = np.full_like(x, cmm[m])
        dm1 = np.zeros_like(x)
        pm2 = np.zeros_like(x)
        dm2 = np.zeros_like(x)
        for l in range(m, lmax + 1):
            if l == m:
                pl, dl = pm1, dm1
            elif l == m + 1:
                sq = np.sqrt(2.0 * m + 3.0)
                pl = sq * z * pm1
                dl = sq * (pm1 + z * dm1)
            else:
                a, b = acoef[l, m], bcoef[l, m]
                pl = a * (z * pm1 - b * pm2)
                dl = a * (pm1 + z * dm1 - b * dm2)
            if l > m:
                pm2, dm2, pm1, dm1 = pm1, dm1, pl, dl
            for f in range(nf):
                if m == 0:
                    cc = coeffs[f, l, lmax]
                    vals[f] += cc * pl
                    grads[f, :, 2] += cc * dl
                else:
                    cc = coeffs[f, l, lmax + m]
                    cs = coeffs[f, l, lmax - m]
                    vals[f] += SQRT2 * pl * (cc * tc + cs * ts)
                    grads[f, :, 0] += SQRT2 * pl * m * (cc * tcp + cs * tsp)
                    grads[f, :, 1] += SQRT2 * pl * m * (cs * tcp - cc * tsp)
                    grads[f, :, 2] += SQRT2 * dl * (cc * tc + cs * ts)
    r = np.einsum("fpk,pk->fp", grads, pts)
    grads -= r[:, :, None] * pts[None, :, :]


def eval_expansion(
    coeffs: np.ndarray, pts: np.ndarray, use_numba: bool | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate SH expansions at arbitrary sphere points.

    Parameters
    ----------
    coeffs : (L+1, 2L+1) or (nf, L+1, 2L+1)
        One or several coefficient sets.
    pts : (3,) or (P, 3)
        Unit vectors.

    Returns
    -------
    values : (nf, P) and gradients (nf, P, 3), tangential (projected).
        Leading axis squeezed if a single coefficient set was passed.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    single_f = coeffs.ndim == 2
    if single_f:
        coeffs = coeffs[None]
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    lmax = coeffs.shape[1] - 1
    acoef, bcoef, cmm = _tables(lmax)
    vals = np.zeros((coeffs.shape[0], pts.shape[0]))
    grads = np.zeros((coeffs.shape[0], pts.shape[0], 3))
    if use_numba is None:
        use_numba = _HAVE_NUMBA
    if use_numba and _HAVE_NUMBA:
        _eval_kernel(
            np.ascontiguousarray(coeffs),
            np.ascontiguousarray(pts),
            acoef,
            bcoef,
            cmm,
            vals,
            grads,
        )
    else:
        _eval_fallback(coeffs, pts, acoef, bcoef, cmm, vals, grads)
    if single_f:
        return vals[0], grads[0]
    return vals, grads


def eval_values(coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return eval_expansion(coeffs, pts)[0]


def eval_gradients(coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return eval_expansion(coeffs, pts)[1]


# --- coefficient table files ----------------------------------------------


def save_coeffs(path, coeffs: np.ndarray, field_name: str) -> None:
    """Write coefficients as CSV rows `l,m,value` with a named header."""
    coeffs = np.asarray(coeffs, dtype=float)
    lmax = coeffs.shape[0] - 1
    with open(path, "w") as fh:
        fh.write(f"l,m,{field_name}\n")
        for l in range(lmax + 1):
            for m in range(-l, l + 1):
                fh.write(f"{l},{m},{coeffs[l, lmax + m]:.17g}\n")


def load_coeffs(path) -> tuple[np.ndarray, str]:
    """Read a coefficient CSV; returns (coeffs, field_name)."""
    with open(path) as fh:
        header = fh.readline().strip()
        parts = header.split(",")
        if len(parts) != 3 or parts[0] != "l" or parts[1] != "m":
            raise ValueError(f"bad coefficient table header: {header!r}")
        field_name = parts[2]
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            l_s, m_s, v_s = line.split(",")
            rows.append((int(l_s), int(m_s), float(v_s)))
    if not rows:
        raise ValueError("empty coefficient table")
    lmax = max(r[0] for r in rows)
    coeffs = coeff_zeros(lmax)
    for l, m, v in rows:
        if abs(m) > l:
            raise ValueError(f"invalid entry l={l}, m={m}")
        coeffs[l, lmax + m] = v
    return coeffs, field_name

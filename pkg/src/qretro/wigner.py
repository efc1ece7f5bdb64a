"""Phase-space (Wigner) evaluation.

Conventions: hbar = 1, x = (a + a^dag)/sqrt 2, vacuum variance 1/2. The
identity maps to 1/(2 pi) everywhere and the vacuum to e^{-(x^2+p^2)}/pi.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .detectors import ApdParams, HomodyneParams
from .errors import NonPhysicalOperator, SeriesNotConverged
from .fock import FockOperator

SERIES_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """Uniform ``nx`` x ``np`` sampling of [x_min, x_max] x [p_min, p_max].

    ``values[i, j]`` is W(xs[i], ps[j]).
    """

    x_min: float = -6.0
    x_max: float = 6.0
    p_min: float = -6.0
    p_max: float = 6.0
    nx: int = 201
    np: int = 201
    values: Optional[object] = None

    def __post_init__(self):
        if self.nx < 2 or self.np < 2:
            raise ValueError("grids need at least two points per axis")
        if not (self.x_max > self.x_min and self.p_max > self.p_min):
            raise ValueError("grid bounds must be increasing")
        if self.values is not None:
            vals = np.array(self.values, dtype=float)
            if vals.shape != (self.nx, self.np):
                raise ValueError(f"values shape {vals.shape} != ({self.nx}, {self.np})")
            if not np.all(np.isfinite(vals)):
                raise ValueError("grid values must be finite")
            vals.setflags(write=False)
            object.__setattr__(self, "values", vals)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ps(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.np)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.np - 1)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dp

    def mesh(self):
        return np.meshgrid(self.xs, self.ps, indexing="ij")

    def with_values(self, values) -> "WignerGrid":
        return replace(self, values=values)

    def integral(self) -> float:
        """Cell-sum (Riemann) integral of the values."""
        return float(np.sum(self.values) * self.cell_area)

    def bounds(self) -> dict:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "p_min": self.p_min,
            "p_max": self.p_max,
            "nx": self.nx,
            "np": self.np,
        }

    @classmethod
    def centered(cls, x0: float, sx: float, p0: float, sp: float, n: int = 201, nsigma: float = 6.0) -> "WignerGrid":
        """Grid spanning ``nsigma`` standard deviations around (x0, p0)."""
        return cls(x0 - nsigma * sx, x0 + nsigma * sx, p0 - nsigma * sp, p0 + nsigma * sp, n, n)


def wigner_transform(op: FockOperator, grid: WignerGrid) -> WignerGrid:
    """Wigner function of a Hermitian Fock operator on ``grid``."""
    herm = op.hermiticity_error()
    if herm > op.space.tol:
        raise NonPhysicalOperator(f"operator is not Hermitian (max |A - A^dag| = {herm:.3e})")
    return grid.with_values(_kernels.wigner_fock(grid.xs, grid.ps, op.matrix))


def parity_origin(op: FockOperator) -> float:
    """W(0, 0) = (1/pi) sum_n (-1)^n A_nn."""
    diag = np.real(np.diagonal(op.matrix))
    return float(np.sum(diag * (-1.0) ** np.arange(diag.size)) / math.pi)


def series_terms(params: ApdParams, tol: float = SERIES_TOL) -> int:
    """Smallest term count whose geometric remainder bound is below ``tol``."""
    if params.eta >= 1.0:
        return 1
    if params.eta <= 0.0:
        raise SeriesNotConverged("the 'off' Laguerre series does not converge for eta = 0")
    ratio = 1.0 - params.eta
    scale = math.exp(-params.nu) / (math.pi * params.eta)
    if scale <= tol:
        return 1
    return max(1, int(math.ceil(math.log(tol / scale) / math.log(ratio))))


def series_remainder_bound(params: ApdParams, terms: int) -> float:
    # |e^{-t/2} L_m(t)| <= 1
    if params.eta >= 1.0:
        return 0.0
    if params.eta <= 0.0:
        return math.inf
    return math.exp(-params.nu) * (1.0 - params.eta) ** terms / (math.pi * params.eta)


def _on_series(xs, ps, params: ApdParams, terms: Optional[int]):
    if terms is None:
        terms = series_terms(params)
    bound = series_remainder_bound(params, terms)
    if bound > SERIES_TOL:
        raise SeriesNotConverged(f"remainder bound {bound:.2e} with {terms} terms exceeds {SERIES_TOL:.0e}")
    coeffs = math.exp(-params.nu) * (params.eta - 1.0) ** np.arange(terms)
    off = _kernels.laguerre_series(xs, ps, coeffs) / math.pi
    return 1.0 / (2.0 * math.pi) - off, bound


def wigner_on_closed(x, p, params: ApdParams, terms: Optional[int] = None, full_output: bool = False):
    """APD 'on' element Wigner function from its Laguerre series.

    ``x`` and ``p`` broadcast against each other. With ``full_output`` the
    geometric remainder bound is returned as well.
    """
    x_arr, p_arr = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    # the series depends on x^2 + p^2 only: evaluate along the x axis at p = 0
    radius = np.hypot(x_arr, p_arr).ravel()
    vals, bound = _on_series(radius, np.zeros(1), params, terms)
    vals = vals[:, 0].reshape(x_arr.shape)
    if vals.ndim == 0:
        vals = float(vals)
    return (vals, bound) if full_output else vals


def wigner_on_grid(params: ApdParams, grid: WignerGrid, terms: Optional[int] = None) -> WignerGrid:
    values, _ = _on_series(grid.xs, grid.ps, params, terms)
    return grid.with_values(values)


def wigner_on_matrix(pi_off: FockOperator, grid: WignerGrid) -> WignerGrid:
    """Wigner function of 1 - Pi_off via the Fock kernel.

    The identity is mapped to its exact value 1/(2 pi); only the truncated
    'off' element goes through the kernel.
    """
    off = wigner_transform(pi_off, grid)
    return grid.with_values(1.0 / (2.0 * math.pi) - off.values)


def negativity_on(params: ApdParams) -> float:
    """W_on(0, 0) = 1/(2 pi) - e^{-nu} / (pi (2 - eta))."""
    return 1.0 / (2.0 * math.pi) - math.exp(-params.nu) / (math.pi * (2.0 - params.eta))


def negativity_threshold(eta: float) -> float:
    """Dark-count level -ln(1 - eta/2) at which W_on(0, 0) changes sign."""
    if not (0.0 <= eta <= 1.0):
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    return -math.log1p(-0.5 * eta)


def rotated(grid: WignerGrid, phi: float):
    """Rotated-frame quadratures (x_phi, p_phi) on the grid mesh."""
    X, P = grid.mesh()
    c, s = math.cos(phi), math.sin(phi)
    return X * c + P * s, -X * s + P * c


def hd_variance(eta: float) -> float:
    """x-variance (1 - eta)/(2 eta) of the homodyne element's Wigner ridge."""
    return (1.0 - eta) / (2.0 * eta)


def wigner_hd(params: HomodyneParams, grid: WignerGrid) -> WignerGrid:
    """Wigner function of the homodyne POVM density (a ridge flat in p_phi)."""
    var = hd_variance(params.eta)
    xphi, _ = rotated(grid, params.phi)
    center = params.x_I / math.sqrt(params.eta)
    amp = 1.0 / math.sqrt(8.0 * math.pi**3 * params.eta * var)
    return grid.with_values(amp * np.exp(-((xphi - center) ** 2) / (2.0 * var)))


def squeezing_parameter(eta: float) -> float:
    return (1.0 - eta) / eta


@dataclass(frozen=True)
class HdRetroParams:
    hd: HomodyneParams
    excess_noise: float = 1e3

    def __post_init__(self):
        if not self.excess_noise >= 10.0:
            raise ValueError(f"excess noise must be >= 10, got {self.excess_noise}")

    def variances(self) -> tuple:
        """(x_phi, p_phi) variances of the retrodicted Gaussian."""
        s = squeezing_parameter(self.hd.eta)
        return 0.5 * s, 0.5 * (1.0 / s + self.excess_noise)

    def center(self) -> tuple:
        return self.hd.x_I / math.sqrt(self.hd.eta), 0.0


def hd_retro_wigner(params: HdRetroParams, grid: WignerGrid) -> WignerGrid:
    """Retrodicted homodyne state: squeezed Gaussian with excess noise along p_phi."""
    s = squeezing_parameter(params.hd.eta)
    en = params.excess_noise
    xphi, pphi = rotated(grid, params.hd.phi)
    x0, _ = params.center()
    norm = 1.0 / (math.pi * math.sqrt(1.0 + en * s))
    vals = norm * np.exp(-((xphi - x0) ** 2) / s - pphi**2 / (1.0 / s + en))
    return grid.with_values(vals)


def hd_retro_grid(params: HdRetroParams, n: int = 201, nsigma: float = 6.0) -> WignerGrid:
    """Axis-aligned grid spanning ``nsigma`` standard deviations of the retrodicted state."""
    vx, vp = params.variances()
    x0, p0 = params.center()
    phi = params.hd.phi
    c, s = math.cos(phi), math.sin(phi)
    # lab-frame centre and per-axis spread of the rotated Gaussian
    lx, lp = x0 * c, x0 * s
    sx = math.sqrt(vx * c * c + vp * s * s)
    sp = math.sqrt(vx * s * s + vp * c * c)
    return WignerGrid.centered(lx, sx, lp, sp, n, nsigma)


def gaussian_fit(grid: WignerGrid) -> tuple:
    """Mean and covariance of a (nonnegative, normalisable) grid by moment matching."""
    X, P = grid.mesh()
    w = grid.values
    total = w.sum()
    mx = float((X * w).sum() / total)
    mp = float((P * w).sum() / total)
    cxx = float(((X - mx) ** 2 * w).sum() / total)
    cpp = float(((P - mp) ** 2 * w).sum() / total)
    cxp = float(((X - mx) * (P - mp) * w).sum() / total)
    return np.array([mx, mp]), np.array([[cxx, cxp], [cxp, cpp]])


def squeezing_db(variance: float) -> float:
    """10 log10 of a quadrature variance relative to the vacuum value 1/2."""
    return 10.0 * math.log10(variance / 0.5)


def tmsv_covariances(lam: float) -> tuple:
    """(x_A, x_B) and (p_A, p_B) covariance blocks of the two-mode squeezed vacuum."""
    c = (1.0 + lam * lam) / (1.0 - lam * lam)
    s = 2.0 * lam / (1.0 - lam * lam)
    return 0.5 * np.array([[c, s], [s, c]]), 0.5 * np.array([[c, -s], [-s, c]])


def _gauss2(cov: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    inv = np.linalg.inv(cov)
    U, V = np.meshgrid(u, v, indexing="ij")
    quad = inv[0, 0] * U * U + 2.0 * inv[0, 1] * U * V + inv[1, 1] * V * V
    return np.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(np.linalg.det(cov)))


def heralded_wigner_convolution(lam: float, retro: WignerGrid, out: WignerGrid) -> WignerGrid:
    """Conditioned Wigner function of mode A from the two-mode Gaussian resource.

    Integrates W_AB(x, p; x', p') W_retr(x', p') over the ``retro`` grid.
    The TMSV Wigner function factorises into x and p blocks, so the double
    integral is two matrix products. The normalising constant comes from the
    thermal marginal of mode B.
    """
    cov_x, cov_p = tmsv_covariances(lam)
    gx = _gauss2(cov_x, out.xs, retro.xs)
    gp = _gauss2(cov_p, out.ps, retro.ps)
    raw = gx @ retro.values @ gp.T * retro.cell_area
    var_b = cov_x[1, 1]
    XB, PB = retro.mesh()
    marginal_b = np.exp(-(XB**2 + PB**2) / (2.0 * var_b)) / (2.0 * math.pi * var_b)
    z = float(np.sum(marginal_b * retro.values) * retro.cell_area)
    return out.with_values(raw / z)


def write_grid_csv(grid: WignerGrid, path, metadata: Optional[dict] = None) -> Path:
    """Write ``x,p,w`` rows (x outer, p inner) plus a ``.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    xs, ps = grid.xs, grid.ps
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "p", "w"])
        for i, x in enumerate(xs):
            for j, p in enumerate(ps):
                writer.writerow([f"{x:.17g}", f"{p:.17g}", f"{grid.values[i, j]:.17g}"])
    meta = {
        "convention": {
            "hbar": 1.0,
            "vacuum_variance": 0.5,
            "identity_value": 1.0 / (2.0 * math.pi),
            "vacuum_origin_value": 1.0 / math.pi,
        },
        "grid": grid.bounds(),
    }
    if metadata:
        meta.update(metadata)
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return sidecar


def read_grid_csv(path) -> WignerGrid:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs = np.unique(data[:, 0])
    ps = np.unique(data[:, 1])
    values = data[:, 2].reshape(xs.size, ps.size)
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        b = json.loads(sidecar.read_text())["grid"]
        return WignerGrid(b["x_min"], b["x_max"], b["p_min"], b["p_max"], b["nx"], b["np"], values)
    return WignerGrid(xs[0], xs[-1], ps[0], ps[-1], xs.size, ps.size, values)

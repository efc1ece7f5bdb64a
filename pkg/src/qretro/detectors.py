"""Parametric POVMs: on/off APD, ideal photon counter, inefficient homodyne."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss

from .errors import NonPhysicalOperator, QuadratureUnderresolved
from .fock import FockOperator, FockSpace, Povm, QuantumState


@dataclass(frozen=True)
class ApdParams:
    """Efficiency ``eta`` in [0, 1] and mean dark counts ``nu`` >= 0."""

    eta: float
    nu: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not (self.nu >= 0.0) or not math.isfinite(self.nu):
            raise ValueError(f"nu must be finite and >= 0, got {self.nu}")


@dataclass(frozen=True)
class HomodyneParams:
    eta: float
    phi: float = 0.0
    x_I: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.eta < 1.0):
            raise ValueError(f"homodyne eta must lie in (0, 1), got {self.eta}")


def apd_off_diagonal(params: ApdParams, dim: int) -> np.ndarray:
    """Diagonal of Pi_off: e^{-nu} (1 - eta)^n."""
    return math.exp(-params.nu) * (1.0 - params.eta) ** np.arange(dim)


def apd_povm(params: ApdParams, space: FockSpace) -> Povm:
    off = apd_off_diagonal(params, space.dim)
    pi_off = FockOperator(np.diag(off).astype(complex), space)
    pi_on = FockOperator(np.diag(1.0 - off).astype(complex), space)
    return Povm(("off", "on"), (pi_off, pi_on), completeness_tol=1e-15)


def pnrd_povm(space: FockSpace) -> Povm:
    elements = []
    for n in range(space.dim):
        proj = np.zeros((space.dim, space.dim), dtype=complex)
        proj[n, n] = 1.0
        elements.append(FockOperator(proj, space))
    return Povm(tuple(str(n) for n in range(space.dim)), tuple(elements), completeness_tol=0.0)


def _hermite_functions(x: np.ndarray, dim: int) -> np.ndarray:
    """psi_n(x) for n < dim, vacuum variance 1/2; shape (dim, len(x))."""
    x = np.asarray(x, dtype=float)
    out = np.empty((dim, x.size))
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if dim > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, dim - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def _phase_matrix(phi: float, dim: int) -> np.ndarray:
    n = np.arange(dim)
    return np.exp(1j * phi * (n[:, None] - n[None, :]))


@lru_cache(maxsize=16)
def _hermgauss_log(nodes: int) -> tuple:
    t, w = hermgauss(nodes)
    with np.errstate(divide="ignore"):
        return t, np.log(w)


def _hd_gauss_matrix(x_I: float, eta: float, dim: int, nodes: int) -> np.ndarray:
    # e^{-x^2} * Gaussian kernel collapses to e^{-x_I^2} e^{-(x - sqrt(eta) x_I)^2 / (1 - eta)}:
    # substitute x = sqrt(eta) x_I + sqrt(1 - eta) t and integrate polynomial x e^{-t^2} exactly.
    t, logw = _hermgauss_log(nodes)
    x = math.sqrt(eta) * x_I + math.sqrt(1.0 - eta) * t
    psi = _hermite_functions(x, dim)
    scale = np.exp(logw + x * x - x_I * x_I) / math.sqrt(math.pi)
    return (psi * scale) @ psi.T


def hd_povm_element(
    params: HomodyneParams,
    space: FockSpace,
    nodes: Optional[int] = None,
    max_nodes: int = 1024,
) -> FockOperator:
    """Homodyne POVM density at quadrature value ``x_I``.

    Gauss-Hermite quadrature starting from ``4 D`` nodes, doubled until the
    (D-1, D-1) entry changes by less than 1e-12. Raises
    :class:`QuadratureUnderresolved` if the change is still above 1e-9 at
    ``max_nodes``.
    """
    dim = space.dim
    n = nodes or 4 * dim
    mat = _hd_gauss_matrix(params.x_I, params.eta, dim, n)
    change = math.inf
    while 2 * n <= max_nodes:
        finer = _hd_gauss_matrix(params.x_I, params.eta, dim, 2 * n)
        change = abs(finer[-1, -1] - mat[-1, -1])
        mat, n = finer, 2 * n
        if change < 1e-12:
            break
    if change > 1e-9:
        raise QuadratureUnderresolved(f"top-corner quadrature change {change:.2e} exceeds 1e-9 at {n} nodes")
    mat = 0.5 * (mat + mat.T)
    return FockOperator(mat * _phase_matrix(params.phi, dim), space)


def hd_binned_povm(
    eta: float,
    phi: float,
    space: FockSpace,
    dx: float = 0.25,
    xmax: float = 5.0,
    nodes_per_bin: int = 12,
) -> Povm:
    """Homodyne outcomes discretised into bins of width ``dx`` on [-xmax, xmax].

    Two overflow bins cover the tails. Each bin integrates the POVM density
    over ``x_I`` with Gauss-Legendre nodes.
    """
    HomodyneParams(eta)
    nbins = int(round(2 * xmax / dx))
    if nbins < 1 or not math.isclose(nbins * dx, 2 * xmax, rel_tol=1e-9):
        raise ValueError("2 * xmax must be a positive multiple of dx")
    # psi_n is negligible beyond |x| ~ sqrt(2D + 1); pad for the kernel width
    far = math.sqrt(2 * space.dim + 1) / math.sqrt(eta) + 12.0
    ntail = int(math.ceil(max(far - xmax, dx) / dx))
    edges = np.linspace(-xmax, xmax, nbins + 1)
    lo_tail = np.linspace(-xmax - ntail * dx, -xmax, ntail + 1)
    hi_tail = np.linspace(xmax, xmax + ntail * dx, ntail + 1)
    leg_t, leg_w = leggauss(nodes_per_bin)

    def integrate(a, b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        acc = np.zeros((space.dim, space.dim))
        for t, w in zip(leg_t, leg_w):
            acc += w * half * _hd_gauss_matrix(mid + half * t, eta, space.dim, 4 * space.dim)
        return acc

    phase = _phase_matrix(phi, space.dim)
    mats = [sum(integrate(a, b) for a, b in zip(lo_tail[:-1], lo_tail[1:]))]
    mats += [integrate(a, b) for a, b in zip(edges[:-1], edges[1:])]
    mats.append(sum(integrate(a, b) for a, b in zip(hi_tail[:-1], hi_tail[1:])))
    labels = ["under"] + [f"{0.5 * (a + b):.6g}" for a, b in zip(edges[:-1], edges[1:])] + ["over"]
    elements = tuple(FockOperator(0.5 * (m + m.T) * phase, space) for m in mats)
    povm = Povm(tuple(labels), elements, completeness_tol=1e-8)
    residual = povm.completeness_residual()
    if residual > povm.completeness_tol:
        raise QuadratureUnderresolved(f"binned homodyne completeness residual {residual:.2e}")
    return povm


def predictive_prob(state: FockOperator, element: FockOperator) -> float:
    """Born-rule probability Tr(rho Pi), clipped to [0, 1] within tolerance."""
    value = float(np.real(np.trace(state.matrix @ element.matrix)))
    tol = state.space.tol
    if value < -tol or value > 1.0 + tol:
        raise NonPhysicalOperator(f"probability {value:.15g} outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def predictive_matrix(kets: np.ndarray, povm: Povm) -> np.ndarray:
    """Pr(n | m) = <psi_m|Pi_n|psi_m> for pure probes, shape (M, N)."""
    kets = np.asarray(kets, dtype=complex)
    return np.real(np.einsum("mi,nij,mj->mn", kets.conj(), povm.stacked(), kets))


def povm_from_config(config: dict, space: FockSpace) -> Povm:
    """Build a POVM from ``{"type": "apd"|"pnrd"|"hd", ...}``."""
    kind = config.get("type")
    if kind == "apd":
        return apd_povm(ApdParams(float(config["eta"]), float(config.get("nu", 0.0))), space)
    if kind == "pnrd":
        return pnrd_povm(space)
    if kind == "hd":
        bins = config.get("bins", {})
        return hd_binned_povm(
            float(config["eta"]),
            float(config.get("phi", 0.0)),
            space,
            dx=float(bins.get("dx", 0.25)),
            xmax=float(bins.get("xmax", 5.0)),
        )
    raise ValueError(f"unknown detector type {kind!r}")


def state_probabilities(state: QuantumState, povm: Povm) -> np.ndarray:
    return np.array([predictive_prob(state, el) for el in povm.elements])

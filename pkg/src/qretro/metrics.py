"""Measurement-quality metrics for POVM elements and their pre-measurement states."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .detectors import ApdParams
from .fock import FockOperator, fidelity_pure, ladder, purity, von_neumann_entropy
from .retrodiction import premeasurement_state
from .wigner import parity_origin

PROJECTIVE_TOL = 1e-6


@dataclass(frozen=True)
class GaussianMoments:
    mean: np.ndarray
    cov: np.ndarray

    def symplectic_eigenvalue(self) -> float:
        return math.sqrt(max(float(np.linalg.det(self.cov)), 0.0))


def projectivity(element: FockOperator) -> float:
    """Purity of the pre-measurement state of ``element``."""
    return purity(premeasurement_state(element))


def effective_efficiency(element: FockOperator) -> Optional[float]:
    """Tr(Pi) for a projective (rank-one) element, otherwise ``None``."""
    if projectivity(element) >= 1.0 - PROJECTIVE_TOL:
        return element.trace()
    return None


def fidelity_off(n: int, eta: float) -> float:
    """Overlap of the APD 'off' pre-measurement state with |n>: eta (1 - eta)^n."""
    if not (0.0 <= eta <= 1.0):
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    return eta * (1.0 - eta) ** n


def fidelity_on_profile(n: int, params: ApdParams) -> float:
    """Pr(on | n) = 1 - e^{-nu} (1 - eta)^n.

    This is D times the fidelity of the asymptotic 'on' pre-measurement
    state with |n>; the 1/D factor is dropped because it carries no
    dependence on n, eta or nu.
    """
    return 1.0 - math.exp(-params.nu) * (1.0 - params.eta) ** n


def gaussian_moments(state: FockOperator) -> GaussianMoments:
    """Means and symmetrised covariance of (x, p) from ladder-operator moments.

    Second moments are built from a^2 and a^dag a, which are exact on the
    truncated space (unlike products of truncated x and p matrices).
    """
    a = ladder(state.space).matrix
    rho = state.matrix
    ea = complex(np.trace(rho @ a))
    ea2 = complex(np.trace(rho @ a @ a))
    en = float(np.real(np.trace(rho @ a.conj().T @ a)))
    mx = math.sqrt(2.0) * ea.real
    mp = math.sqrt(2.0) * ea.imag
    xx = ea2.real + en + 0.5
    pp = -ea2.real + en + 0.5
    xp = ea2.imag  # <xp + px>/2
    cov = np.array([[xx - mx * mx, xp - mx * mp], [xp - mx * mp, pp - mp * mp]])
    return GaussianMoments(np.array([mx, mp]), cov)


def gaussian_entropy(nu_bar: float) -> float:
    """Entropy (nats) of a single-mode Gaussian state with symplectic eigenvalue ``nu_bar``."""
    lo = nu_bar - 0.5
    hi = nu_bar + 0.5
    out = hi * math.log(hi)
    if lo > 0:
        out -= lo * math.log(lo)
    return out


def non_gaussianity(state: FockOperator) -> float:
    """Relative entropy to the Gaussian state with the same first and second moments."""
    moments = gaussian_moments(state)
    return gaussian_entropy(moments.symplectic_eigenvalue()) - von_neumann_entropy(state)


def squeezing_db_of_state(state: FockOperator) -> float:
    """Smallest quadrature variance (over all phases) in dB relative to vacuum."""
    cov = gaussian_moments(state).cov
    return 10.0 * math.log10(float(np.linalg.eigvalsh(cov)[0]) / 0.5)


def metric_report(element: FockOperator, fock_targets: Sequence[int] = range(6)) -> dict:
    """JSON-ready summary of one POVM element."""
    retro = premeasurement_state(element)
    fids = {}
    for n in fock_targets:
        if n < retro.dim:
            fids[str(n)] = fidelity_pure(retro, retro.space.basis(n))
    return {
        "projectivity": purity(retro),
        "effective_efficiency": effective_efficiency(element),
        "fidelities": fids,
        "non_gaussianity": non_gaussianity(retro),
        "negativity_origin": parity_origin(retro),
    }

"""Pre-measurement states, proposition operators and heralded preparation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .detectors import ApdParams, apd_off_diagonal
from .errors import (
    NotMaximallyMixed,
    TruncationLeakage,
    UnreachableOutcome,
    ZeroSuccessProbability,
    ZeroTraceElement,
)
from .fock import FockOperator, FockSpace, QuantumState, coherent_ket, partial_trace

TRACE_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ProbeEnsemble:
    """Pure probe states with preparation probabilities.

    ``kets`` has shape (M, D). ``alphas`` holds the coherent amplitudes when
    the probes are coherent states, otherwise ``None``.
    """

    kets: np.ndarray
    probs: np.ndarray
    space: FockSpace
    alphas: Optional[np.ndarray] = None

    def __post_init__(self):
        kets = np.array(self.kets, dtype=complex)
        probs = np.array(self.probs, dtype=float)
        if kets.ndim != 2 or kets.shape[1] != self.space.dim:
            raise ValueError(f"kets must have shape (M, {self.space.dim})")
        if probs.shape != (kets.shape[0],):
            raise ValueError("one probability per probe required")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probe probabilities must be >= 0 and sum to 1")
        kets.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "kets", kets)
        object.__setattr__(self, "probs", probs)
        if self.alphas is not None:
            alphas = np.array(self.alphas, dtype=complex)
            alphas.setflags(write=False)
            object.__setattr__(self, "alphas", alphas)

    def __len__(self):
        return self.kets.shape[0]

    @classmethod
    def coherent(cls, alphas, space: FockSpace, probs=None, warn: bool = True) -> "ProbeEnsemble":
        alphas = np.asarray(alphas, dtype=complex).ravel()
        if probs is None:
            probs = np.full(alphas.size, 1.0 / alphas.size)
        kets = np.array([coherent_ket(a, space, warn=warn) for a in alphas])
        return cls(kets, probs, space, alphas)

    @classmethod
    def rings(cls, radii: Sequence[float], n_phases: int, space: FockSpace, warn: bool = True) -> "ProbeEnsemble":
        """Equal-weight amplitudes ``r e^{2 pi i k / n_phases}`` for every radius."""
        radii = np.asarray(radii, dtype=float)
        phases = np.exp(2j * np.pi * np.arange(n_phases) / n_phases)
        return cls.coherent((radii[:, None] * phases[None, :]).ravel(), space, warn=warn)

    @classmethod
    def from_kets(cls, kets, probs, space: FockSpace) -> "ProbeEnsemble":
        kets = np.asarray(kets, dtype=complex)
        kets = kets / np.linalg.norm(kets, axis=1, keepdims=True)
        return cls(kets, probs, space)

    def state_matrices(self) -> np.ndarray:
        return np.einsum("mi,mj->mij", self.kets, self.kets.conj())


@dataclass(frozen=True, eq=False)
class PropositionSet:
    """Proposition operators; ``sigma`` is the Cholesky factor for the lambda kind."""

    ops: tuple
    kind: str
    sigma: Optional[FockOperator] = None

    def __post_init__(self):
        if self.kind not in ("theta", "lambda"):
            raise ValueError(f"unknown proposition kind {self.kind!r}")
        object.__setattr__(self, "ops", tuple(self.ops))

    def __len__(self):
        return len(self.ops)

    def stacked(self) -> np.ndarray:
        return np.stack([op.matrix for op in self.ops])

    def completeness_residual(self) -> float:
        total = self.stacked().sum(axis=0)
        return float(np.max(np.abs(total - np.eye(total.shape[0]))))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "ops": [op.to_dict() for op in self.ops]}


def premeasurement_state(element: FockOperator, trace_floor: float = TRACE_FLOOR) -> QuantumState:
    """Normalised POVM element Pi / Tr(Pi)."""
    tr = element.trace()
    if tr <= trace_floor:
        raise ZeroTraceElement(f"element trace {tr:.3e} is at or below the floor {trace_floor:.1e}")
    return QuantumState(element.matrix / tr, element.space, element.dims)


def premeasurement_on_asymptotic(params: ApdParams, space: FockSpace) -> QuantumState:
    """Diagonal state proportional to 1 - e^{-nu} (1 - eta)^n over n < D."""
    weights = 1.0 - apd_off_diagonal(params, space.dim)
    total = weights.sum()
    if total <= TRACE_FLOOR:
        raise ZeroTraceElement("the 'on' element vanishes for eta = 0 and nu = 0")
    return QuantumState(np.diag(weights / total).astype(complex), space)


def unread_mixture(ensemble: ProbeEnsemble) -> QuantumState:
    rho = np.einsum("m,mi,mj->ij", ensemble.probs, ensemble.kets, ensemble.kets.conj())
    return QuantumState(rho, ensemble.space)


def proposition_set_theta(ensemble: ProbeEnsemble, theta_tol: float = 1e-8) -> PropositionSet:
    """Theta_m = D p_m rho_m; needs the unread mixture to be maximally mixed."""
    dim = ensemble.space.dim
    rho = unread_mixture(ensemble).matrix
    dev = float(np.max(np.abs(rho - np.eye(dim) / dim)))
    if dev > theta_tol:
        raise NotMaximallyMixed(f"unread mixture deviates from 1/D by {dev:.3e}")
    mats = dim * ensemble.probs[:, None, None] * ensemble.state_matrices()
    return PropositionSet(tuple(FockOperator(m, ensemble.space) for m in mats), "theta")


def retrodictive_prob(element: FockOperator, proposition: FockOperator) -> float:
    """Tr(rho_retr Theta)."""
    retro = premeasurement_state(element)
    return float(np.real(np.trace(retro.matrix @ proposition.matrix)))


def bayes_retrodict(predictive, priors) -> np.ndarray:
    """Pr(m | n) from Pr(n | m) (rows m) and priors Pr(m); columns sum to one."""
    predictive = np.asarray(predictive, dtype=float)
    priors = np.asarray(priors, dtype=float)
    if predictive.ndim != 2 or priors.shape != (predictive.shape[0],):
        raise ValueError("predictive must be (M, N) with M priors")
    if abs(priors.sum() - 1.0) > 1e-12 or np.any(priors < 0):
        raise ValueError("priors must be a probability vector")
    joint = predictive * priors[:, None]
    marginal = joint.sum(axis=0)
    dead = np.flatnonzero(marginal <= 0)
    if dead.size:
        raise UnreachableOutcome(f"outcomes {dead.tolist()} have zero probability")
    return joint / marginal[None, :]


def conditioned_state(resource: FockOperator, element: FockOperator, trace_floor: float = TRACE_FLOOR):
    """State of A after outcome ``element`` on B; returns (state, success probability)."""
    if resource.dims is None:
        raise ValueError("resource must be bipartite")
    da, db = resource.dims
    if element.dim != db:
        raise ValueError(f"element dimension {element.dim} does not match mode B ({db})")
    lifted = np.kron(np.eye(da), element.matrix)
    prod = FockOperator(resource.matrix @ lifted, resource.space, resource.dims)
    reduced = partial_trace(prod, keep=0)
    prob = float(np.trace(reduced).real)
    if prob <= trace_floor:
        raise ZeroSuccessProbability(f"heralding probability {prob:.3e}")
    reduced = 0.5 * (reduced + reduced.conj().T) / prob
    return QuantumState(reduced, FockSpace(da, resource.space.tol)), prob


def tmsv_ket(lam: float, dim: int) -> np.ndarray:
    amps = math.sqrt(1.0 - lam * lam) * lam ** np.arange(dim)
    ket = np.zeros(dim * dim, dtype=complex)
    ket[np.arange(dim) * (dim + 1)] = amps
    return ket


def tmsv(lam: float, space: FockSpace) -> QuantumState:
    """Two-mode squeezed vacuum sqrt(1 - lam^2) sum lam^n |n, n>, D per mode."""
    if not (0.0 <= lam < 1.0):
        raise ValueError(f"lambda must lie in [0, 1), got {lam}")
    leak = lam ** (2 * space.dim)
    if leak >= 1e-9:
        raise TruncationLeakage(f"TMSV weight {leak:.2e} beyond dimension {space.dim}")
    ket = tmsv_ket(lam, space.dim)
    ket = ket / np.linalg.norm(ket)
    bi = FockSpace(space.dim**2, space.tol)
    return QuantumState(np.outer(ket, ket.conj()), bi, (space.dim, space.dim))

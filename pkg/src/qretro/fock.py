"""Truncated Fock-space linear algebra.

Operators live on the basis |0>, ..., |D-1>. Bipartite operators use the
row-major product index ``i_A * D_B + i_B``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import NonPhysicalOperator, SingularMixture, TruncationWarning

LEAKAGE_WARN = 1e-6


@dataclass(frozen=True)
class FockSpace:
    """Fock truncation ``dim`` plus the default numerical tolerance."""

    dim: int
    tol: float = 1e-9

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"Fock dimension must be an integer >= 2, got {self.dim}")
        if not (0 < self.tol < 1e-6):
            raise ValueError(f"tolerance must lie in (0, 1e-6), got {self.tol}")

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def basis(self, n: int) -> np.ndarray:
        ket = np.zeros(self.dim, dtype=complex)
        ket[n] = 1.0
        return ket


def _frozen(matrix) -> np.ndarray:
    arr = np.array(matrix, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense ``D x D`` complex matrix on a truncated Fock space.

    ``dims`` is set for bipartite operators, ``(D_A, D_B)``; ``space.dim``
    is then the product dimension.
    """

    matrix: np.ndarray
    space: FockSpace
    dims: Optional[tuple] = None

    def __post_init__(self):
        arr = _frozen(self.matrix)
        if arr.ndim != 2 or arr.shape != (self.space.dim, self.space.dim):
            raise ValueError(f"matrix shape {arr.shape} does not match dimension {self.space.dim}")
        if self.dims is not None:
            dims = tuple(int(d) for d in self.dims)
            if math.prod(dims) != self.space.dim:
                raise ValueError(f"dims {dims} do not multiply to {self.space.dim}")
            object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return self.space.dim

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def is_hermitian(self, tol: Optional[float] = None) -> bool:
        tol = self.space.tol if tol is None else tol
        return self.hermiticity_error() <= tol

    def is_positive(self, tol: Optional[float] = None) -> bool:
        tol = self.space.tol if tol is None else tol
        return self.is_hermitian(tol) and self.min_eigenvalue() >= -tol

    def check_positive(self, what: str = "operator", tol: Optional[float] = None) -> "FockOperator":
        tol = self.space.tol if tol is None else tol
        herm = self.hermiticity_error()
        if herm > tol:
            raise NonPhysicalOperator(f"{what} is not Hermitian (max |A - A^dag| = {herm:.3e})")
        lo = self.min_eigenvalue()
        if lo < -tol:
            raise NonPhysicalOperator(f"{what} has negative eigenvalue {lo:.3e}")
        return self

    def __add__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(self.matrix + other.matrix, self.space, self.dims)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(self.matrix - other.matrix, self.space, self.dims)

    def scaled(self, factor: float) -> "FockOperator":
        return FockOperator(self.matrix * factor, self.space, self.dims)

    def to_dict(self) -> dict:
        out = {
            "dim": self.dim,
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
        }
        if self.dims is not None:
            out["dims"] = list(self.dims)
        return out

    @classmethod
    def from_dict(cls, data: dict, tol: float = 1e-9) -> "FockOperator":
        matrix = _matrix_from_json(data["matrix"])
        return cls(matrix, FockSpace(int(data["dim"]), tol), data.get("dims"))


class QuantumState(FockOperator):
    """Density matrix: Hermitian, positive semidefinite, unit trace."""

    def __post_init__(self):
        super().__post_init__()
        tol = self.space.tol
        if abs(self.trace() - 1.0) > tol:
            raise NonPhysicalOperator(f"state trace is {self.trace():.15g}, expected 1")
        self.check_positive("state")

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["trace_tol"] = self.space.tol
        return out

    @classmethod
    def from_dict(cls, data: dict, tol: Optional[float] = None) -> "QuantumState":
        tol = data.get("trace_tol", 1e-9) if tol is None else tol
        matrix = _matrix_from_json(data["matrix"])
        return cls(matrix, FockSpace(int(data["dim"]), tol), data.get("dims"))

    @classmethod
    def from_ket(cls, ket: np.ndarray, space: FockSpace) -> "QuantumState":
        ket = np.asarray(ket, dtype=complex)
        ket = ket / np.linalg.norm(ket)
        return cls(np.outer(ket, ket.conj()), space)


def _matrix_from_json(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass(frozen=True, eq=False)
class Povm:
    """Labelled POVM elements; ``completeness_tol`` bounds |sum Pi - 1|."""

    labels: tuple
    elements: tuple
    completeness_tol: float = 1e-12
    notes: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(lab) for lab in self.labels))
        object.__setattr__(self, "elements", tuple(self.elements))
        if len(self.labels) != len(self.elements):
            raise ValueError("labels and elements differ in length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate POVM labels")
        if not self.elements:
            raise ValueError("empty POVM")

    @property
    def space(self) -> FockSpace:
        return self.elements[0].space

    def __len__(self):
        return len(self.elements)

    def __getitem__(self, label: str) -> FockOperator:
        return self.elements[self.labels.index(str(label))]

    def stacked(self) -> np.ndarray:
        """Elements as an ``(N, D, D)`` array."""
        return np.stack([el.matrix for el in self.elements])

    def completeness_residual(self) -> float:
        total = self.stacked().sum(axis=0)
        return float(np.max(np.abs(total - np.eye(total.shape[0]))))

    def is_complete(self) -> bool:
        return self.completeness_residual() <= self.completeness_tol

    def check(self) -> "Povm":
        for lab, el in zip(self.labels, self.elements):
            el.check_positive(f"POVM element {lab!r}")
        return self

    def to_dict(self) -> dict:
        return {
            "dim": self.space.dim,
            "labels": list(self.labels),
            "completeness_tol": self.completeness_tol,
            "elements": [el.to_dict()["matrix"] for el in self.elements],
        }

    @classmethod
    def from_dict(cls, data: dict, tol: float = 1e-9) -> "Povm":
        space = FockSpace(int(data["dim"]), tol)
        elements = [FockOperator(_matrix_from_json(m), space) for m in data["elements"]]
        return cls(tuple(data["labels"]), tuple(elements), float(data["completeness_tol"]))


def ladder(space: FockSpace) -> FockOperator:
    """Annihilation operator, ``a[n-1, n] = sqrt(n)``."""
    return FockOperator(np.diag(np.sqrt(np.arange(1, space.dim)), k=1).astype(complex), space)


def number_operator(space: FockSpace) -> FockOperator:
    return FockOperator(np.diag(np.arange(space.dim)).astype(complex), space)


def coherent_leakage(alpha: complex, dim: int) -> float:
    """Weight of the untruncated coherent state on ``n >= dim``."""
    return float(stats.poisson.sf(dim - 1, abs(alpha) ** 2))


def coherent_ket(alpha: complex, space: FockSpace, warn: bool = True) -> np.ndarray:
    """Normalised, truncated coherent-state amplitudes."""
    leak = coherent_leakage(alpha, space.dim)
    if warn and leak > LEAKAGE_WARN:
        warnings.warn(
            f"coherent amplitude |alpha|={abs(alpha):.3g} leaks {leak:.2e} of its weight "
            f"beyond dimension {space.dim}",
            TruncationWarning,
            stacklevel=3,
        )
    ket = np.empty(space.dim, dtype=complex)
    ket[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, space.dim):
        ket[n] = ket[n - 1] * alpha / math.sqrt(n)
    return ket / np.linalg.norm(ket)


def coherent_state(alpha: complex, space: FockSpace, warn: bool = True) -> QuantumState:
    """Coherent state |alpha><alpha|, renormalised after truncation.

    Emits :class:`TruncationWarning` when more than 1e-6 of the weight
    falls outside the truncation.
    """
    ket = coherent_ket(alpha, space, warn=warn)
    return QuantumState(np.outer(ket, ket.conj()), space)


def fock_state(n: int, space: FockSpace) -> QuantumState:
    return QuantumState.from_ket(space.basis(n), space)


def thermal_state(nbar: float, space: FockSpace) -> QuantumState:
    """Geometric photon-number distribution, renormalised over n < D."""
    if nbar == 0:
        weights = np.zeros(space.dim)
        weights[0] = 1.0
    else:
        q = nbar / (1.0 + nbar)
        weights = q ** np.arange(space.dim)
    return QuantumState(np.diag(weights / weights.sum()).astype(complex), space)


def maximally_mixed(space: FockSpace) -> QuantumState:
    return QuantumState(np.eye(space.dim, dtype=complex) / space.dim, space)


def purity(state: FockOperator) -> float:
    m = state.matrix
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(m) ** 2))


def fidelity_pure(state: FockOperator, target: np.ndarray) -> float:
    """<psi|rho|psi> for a normalised target ket."""
    target = np.asarray(target, dtype=complex)
    norm = np.linalg.norm(target)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"target ket is not normalised (norm {norm:.12g})")
    return float(np.real(target.conj() @ state.matrix @ target))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    # eigenvalues at round-off level would otherwise turn into ~1e-8 square roots
    floor = 1e-14 * max(float(np.max(np.abs(evals))), 1e-300)
    evals = np.where(evals > floor, evals, 0.0)
    return (vecs * np.sqrt(evals)) @ vecs.conj().T


def fidelity(a: FockOperator, b: FockOperator) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2; equals <psi|a|psi> for pure b."""
    if a.dim != b.dim:
        raise ValueError("states live on different spaces")
    # nuclear norm of sqrt(a) sqrt(b): no square roots of round-off eigenvalues
    sv = np.linalg.svd(_psd_sqrt(a.matrix) @ _psd_sqrt(b.matrix), compute_uv=False)
    return float(np.sum(sv) ** 2)


def cholesky_factor(state: FockOperator, tol: Optional[float] = None) -> FockOperator:
    """Upper-triangular ``sigma`` with ``rho = sigma^dag sigma``.

    Raises :class:`SingularMixture` when the smallest eigenvalue of ``rho``
    is at or below ``tol``.
    """
    tol = state.space.tol if tol is None else tol
    lo = state.min_eigenvalue()
    if lo <= tol:
        raise SingularMixture(f"mixture is singular: smallest eigenvalue {lo:.3e} <= {tol:.1e}")
    herm = 0.5 * (state.matrix + state.matrix.conj().T)
    lower = np.linalg.cholesky(herm)
    return FockOperator(lower.conj().T, state.space)


def von_neumann_entropy(state: FockOperator) -> float:
    """Entropy in nats, with 0 ln 0 = 0."""
    evals = np.linalg.eigvalsh(0.5 * (state.matrix + state.matrix.conj().T))
    evals = evals[evals > 0]
    return float(-np.sum(evals * np.log(evals)))


def expectation(state: FockOperator, op: np.ndarray) -> complex:
    return complex(np.trace(state.matrix @ op))


def born_probabilities(state: FockOperator, povm: Povm) -> np.ndarray:
    """Tr(rho Pi_n) for every element, checked against the probability axioms.

    Each probability must lie in [-tol, 1 + tol] and they must sum to one
    within the POVM's completeness tolerance.
    """
    tol = max(state.space.tol, povm.completeness_tol)
    probs = np.real(np.einsum("ij,nji->n", state.matrix, povm.stacked()))
    if np.any(probs < -tol) or np.any(probs > 1 + tol):
        raise NonPhysicalOperator(f"probabilities outside [0, 1]: {probs}")
    if abs(probs.sum() - 1.0) > tol:
        raise NonPhysicalOperator(f"probabilities sum to {probs.sum():.15g}")
    return probs


def tensor(a: FockOperator, b: FockOperator) -> FockOperator:
    space = FockSpace(a.dim * b.dim, max(a.space.tol, b.space.tol))
    return FockOperator(np.kron(a.matrix, b.matrix), space, (a.dim, b.dim))


def partial_trace(op: FockOperator, keep: int = 0) -> np.ndarray:
    """Trace out one factor of a bipartite operator; ``keep`` is 0 (A) or 1 (B)."""
    if op.dims is None:
        raise ValueError("operator is not bipartite")
    da, db = op.dims
    t = op.matrix.reshape(da, db, da, db)
    if keep == 0:
        return np.einsum("ibjb->ij", t)
    return np.einsum("aiaj->ij", t)


def quadrature_operators(space: FockSpace) -> tuple:
    """x = (a + a^dag)/sqrt 2 and p = (a - a^dag)/(i sqrt 2)."""
    a = ladder(space).matrix
    ad = a.conj().T
    return (a + ad) / math.sqrt(2), (a - ad) / (1j * math.sqrt(2))


def phase_rotation(theta: float, space: FockSpace) -> np.ndarray:
    """exp(-i theta n)."""
    return np.diag(np.exp(-1j * theta * np.arange(space.dim)))


def squeezed_vacuum_ket(r: float, space: FockSpace) -> np.ndarray:
    """Squeezed vacuum with real squeezing ``r`` (x variance e^{-2r}/2)."""
    ket = np.zeros(space.dim, dtype=complex)
    t = math.tanh(r)
    ket[0] = 1.0 / math.sqrt(math.cosh(r))
    for n in range(2, space.dim, 2):
        ket[n] = ket[n - 2] * (-t) * math.sqrt((n - 1) / n)
    return ket / np.linalg.norm(ket)


def mixture(kets: np.ndarray, probs: Sequence[float], space: FockSpace) -> QuantumState:
    kets = np.asarray(kets, dtype=complex)
    probs = np.asarray(probs, dtype=float)
    rho = np.einsum("m,mi,mj->ij", probs, kets, kets.conj())
    return QuantumState(rho, space)

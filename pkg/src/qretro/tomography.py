"""Simulated detector tomography and pre-measurement-state reconstruction."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .detectors import predictive_matrix
from .errors import IncompletePovm, NoConvergence, UnreachableOutcome
from .fock import FockOperator, FockSpace, Povm, QuantumState, cholesky_factor
from .retrodiction import ProbeEnsemble, PropositionSet, unread_mixture

log = logging.getLogger(__name__)

EIG_FLOOR = 1e-14
MAX_DILUTION_HALVINGS = 40


@dataclass(frozen=True, eq=False)
class CountTable:
    """Outcome counts per probe; every row sums to ``shots_per_probe``."""

    probes: ProbeEnsemble
    labels: tuple
    counts: np.ndarray
    shots_per_probe: int
    seed: Optional[int] = None

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.shape != (len(self.probes), len(self.labels)):
            raise ValueError(f"counts shape {counts.shape} != ({len(self.probes)}, {len(self.labels)})")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if np.any(counts.sum(axis=1) != self.shots_per_probe):
            raise ValueError("every probe row must sum to shots_per_probe")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "labels", tuple(str(lab) for lab in self.labels))

    def frequencies(self) -> np.ndarray:
        return self.counts / float(self.shots_per_probe)

    def to_csv(self, path) -> None:
        if self.probes.alphas is None:
            raise ValueError("CSV export needs coherent probes")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["probe_re", "probe_im", "prob", *self.labels])
            for alpha, prob, row in zip(self.probes.alphas, self.probes.probs, self.counts):
                writer.writerow([f"{alpha.real:.17g}", f"{alpha.imag:.17g}", f"{prob:.17g}", *map(str, row)])

    @classmethod
    def from_csv(cls, path, space: FockSpace, seed: Optional[int] = None) -> "CountTable":
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        if header[:3] != ["probe_re", "probe_im", "prob"]:
            raise ValueError(f"unexpected CSV header {header}")
        alphas = np.array([float(r[0]) + 1j * float(r[1]) for r in rows])
        probs = np.array([float(r[2]) for r in rows])
        counts = np.array([[int(v) for v in r[3:]] for r in rows], dtype=np.int64)
        shots = int(counts[0].sum())
        ensemble = ProbeEnsemble.coherent(alphas, space, probs=probs, warn=False)
        return cls(ensemble, tuple(header[3:]), counts, shots, seed)


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    """Exact (noise-free) response frequencies, for oracle-style reconstructions."""

    probes: ProbeEnsemble
    labels: tuple
    freqs: np.ndarray

    def frequencies(self) -> np.ndarray:
        return np.asarray(self.freqs, dtype=float)

    @classmethod
    def exact(cls, ensemble: ProbeEnsemble, povm: Povm) -> "FrequencyTable":
        probs = np.clip(predictive_matrix(ensemble.kets, povm), 0.0, None)
        return cls(ensemble, povm.labels, probs / probs.sum(axis=1, keepdims=True))


def simulate_counts(ensemble: ProbeEnsemble, povm: Povm, shots: int, seed: int) -> CountTable:
    """Multinomial outcome counts for every probe, deterministic given ``seed``."""
    residual = povm.completeness_residual()
    if residual > 1e-8:
        raise IncompletePovm(f"POVM completeness residual {residual:.2e} > 1e-8")
    if shots <= 0:
        raise ValueError("shots must be positive")
    probs = predictive_matrix(ensemble.kets, povm)
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum(axis=1, keepdims=True)
    rng = np.random.default_rng(np.uint64(seed))
    counts = np.array([rng.multinomial(shots, row) for row in probs], dtype=np.int64)
    return CountTable(ensemble, povm.labels, counts, int(shots), int(seed))


@dataclass(eq=False)
class ReconstructionReport:
    povm: Povm
    iterations: int
    final_log_likelihood: float
    completeness_residual: float
    stop_reason: str
    log_likelihoods: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    notes: list = field(default_factory=list)

    def min_increment(self) -> float:
        if self.log_likelihoods.size < 2:
            return 0.0
        return float(np.min(np.diff(self.log_likelihoods)))

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_log_likelihood": self.final_log_likelihood,
            "completeness_residual": self.completeness_residual,
            "stop_reason": self.stop_reason,
            "min_log_likelihood_increment": self.min_increment(),
            "notes": list(self.notes),
            "povm": self.povm.to_dict(),
        }


def _inv_sqrt(mat: np.ndarray) -> np.ndarray:
    evals, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    evals = np.maximum(evals, EIG_FLOOR)
    return (vecs / np.sqrt(evals)) @ vecs.conj().T


def _loglik(freqs: np.ndarray, probs: np.ndarray) -> float:
    mask = freqs > 0
    if np.any(probs[mask] <= 0):
        return -np.inf
    return float(np.sum(freqs[mask] * np.log(probs[mask])))


class _DiagonalModel:
    """Iterates restricted to diagonal matrices: POVM stored as (N, D) weights."""

    def __init__(self, kets):
        self.w = np.abs(kets) ** 2

    def init(self, n_out, dim):
        return np.full((n_out, dim), 1.0 / n_out)

    def probs(self, pis):
        return self.w @ pis.T

    def step(self, pis, ratio, eps):
        r = ratio.T @ self.w  # (N, D)
        if eps is not None:
            r = 1.0 + eps * r
        new = r * r * pis
        total = new.sum(axis=0)
        return new / np.where(total > 0, total, 1.0)

    def matrices(self, pis):
        return [np.diag(row).astype(complex) for row in pis]


class _FullModel:
    def __init__(self, kets):
        self.kets = kets

    def init(self, n_out, dim):
        return np.repeat(np.eye(dim, dtype=complex)[None] / n_out, n_out, axis=0)

    def probs(self, pis):
        return np.real(np.einsum("mi,nij,mj->mn", self.kets.conj(), pis, self.kets))

    def step(self, pis, ratio, eps):
        # R_n[i, j] = sum_m ratio[m, n] psi_m[i] psi_m[j]^*
        r = np.einsum("mn,mi,mj->nij", ratio, self.kets, self.kets.conj())
        if eps is not None:
            r = np.eye(pis.shape[1])[None] + eps * r
        rpr = r @ pis @ r
        lam = rpr.sum(axis=0)
        s = _inv_sqrt(lam)
        new = s[None] @ rpr @ s[None]
        new = 0.5 * (new + np.conj(np.swapaxes(new, 1, 2)))
        # lam can be nearly singular along weakly probed directions; a second
        # pass with the well-conditioned sum (close to 1) restores completeness
        s = _inv_sqrt(new.sum(axis=0))
        new = s[None] @ new @ s[None]
        return 0.5 * (new + np.conj(np.swapaxes(new, 1, 2)))

    def matrices(self, pis):
        return list(pis)


def maxlik_povm(
    table: Union[CountTable, FrequencyTable],
    max_iters: int = 5000,
    ll_tol: float = 1e-13,
    diagonal_constraint: bool = False,
    strict: bool = False,
    init: Optional[Povm] = None,
) -> ReconstructionReport:
    """Maximum-likelihood POVM from probe response frequencies.

    Each iteration maps Pi_n -> lam^{-1/2} R_n Pi_n R_n lam^{-1/2} with
    R_n = sum_m (f_mn / p_mn) rho_m and lam = sum_n R_n Pi_n R_n, so the
    elements sum to the identity after every step. A step that would lower
    the log-likelihood is retried with the diluted operator 1 + eps R_n,
    halving eps until the likelihood does not decrease.

    Stops when the relative log-likelihood change drops below ``ll_tol`` or
    after ``max_iters`` iterations. With ``strict`` the latter raises
    :class:`NoConvergence` carrying the report. ``init`` replaces the
    default starting point 1/N for every element.
    """
    ensemble = table.probes
    freqs = table.frequencies()
    labels = tuple(table.labels)
    dim = ensemble.space.dim
    n_out = len(labels)
    notes = []

    live = np.flatnonzero(freqs.sum(axis=0) > 0)
    for idx in np.flatnonzero(freqs.sum(axis=0) == 0):
        notes.append(f"outcome {labels[idx]!r} never observed; element frozen at zero")
    f_live = freqs[:, live]

    model = _DiagonalModel(ensemble.kets) if diagonal_constraint else _FullModel(ensemble.kets)
    pis = model.init(live.size, dim)
    if init is not None:
        start = init.stacked()[live]
        pis = np.real(np.einsum("nii->ni", start)) if diagonal_constraint else start.copy()
    probs = model.probs(pis)
    ll = _loglik(f_live, probs)
    history = [ll]
    stop = "max_iters"
    it = 0
    for it in range(1, max_iters + 1):
        ratio = np.divide(f_live, probs, out=np.zeros_like(f_live), where=probs > 0)
        eps = None
        accepted = False
        for _ in range(MAX_DILUTION_HALVINGS):
            cand = model.step(pis, ratio, eps)
            cand_probs = model.probs(cand)
            cand_ll = _loglik(f_live, cand_probs)
            if cand_ll >= ll:
                accepted = True
                break
            eps = 1.0 if eps is None else 0.5 * eps
        if not accepted:
            # no ascent direction left at working precision
            stop = "tol"
            it -= 1
            break
        change = cand_ll - ll
        pis, probs, ll = cand, cand_probs, cand_ll
        history.append(ll)
        if change <= ll_tol * abs(ll):
            stop = "tol"
            break

    space = ensemble.space
    mats = [np.zeros((dim, dim), dtype=complex) for _ in range(n_out)]
    for k, m in zip(live, model.matrices(pis)):
        mats[k] = m
    povm = Povm(labels, tuple(FockOperator(m, space) for m in mats), completeness_tol=1e-8, notes=tuple(notes))
    report = ReconstructionReport(
        povm=povm,
        iterations=it,
        final_log_likelihood=ll,
        completeness_residual=povm.completeness_residual(),
        stop_reason=stop,
        log_likelihoods=np.array(history),
        notes=notes,
    )
    log.debug("maxlik stopped after %d iterations (%s), ll=%.12g", it, stop, ll)
    if strict and stop == "max_iters":
        raise NoConvergence(f"MaxLik did not converge in {max_iters} iterations", report)
    return report


def lambda_propositions(ensemble: ProbeEnsemble, mixture: Optional[QuantumState] = None) -> PropositionSet:
    """Lambda_m = (sigma^-1)^dag p_m |a_m><a_m| sigma^-1 with rho = sigma^dag sigma.

    ``mixture`` defaults to the designed unread mixture of ``ensemble``; an
    externally reconstructed mixture can be supplied instead.
    """
    rho = unread_mixture(ensemble) if mixture is None else mixture
    sigma = cholesky_factor(rho)
    sinv = np.linalg.inv(sigma.matrix)
    # (sigma^-1)^dag |psi_m> = (<psi_m| sigma^-1)^dag
    u = np.conj(ensemble.kets.conj() @ sinv)
    mats = ensemble.probs[:, None, None] * np.einsum("mi,mj->mij", u, u.conj())
    ops = tuple(FockOperator(m, ensemble.space) for m in mats)
    return PropositionSet(ops, "lambda", sigma=sigma)


def repair_state(matrix: np.ndarray, space: FockSpace) -> QuantumState:
    """Clip negative eigenvalues to zero and renormalise."""
    herm = 0.5 * (matrix + matrix.conj().T)
    evals, vecs = np.linalg.eigh(herm)
    evals = np.clip(evals, 0.0, None)
    fixed = (vecs * evals) @ vecs.conj().T
    return QuantumState(fixed / np.trace(fixed).real, space)


def qst_premeasurement(
    retro_probs: Sequence[float],
    ensemble: ProbeEnsemble,
    max_iters: int = 20000,
    ll_tol: float = 1e-14,
    diagonal_constraint: bool = False,
    mixture: Optional[QuantumState] = None,
    strict: bool = False,
) -> QuantumState:
    """Pre-measurement state from retrodictive probabilities Pr(m | n).

    Finds rho_n whose probabilities Tr(rho_n Lambda_m) best match
    ``retro_probs`` (iterative MaxLik), then maps back with
    sigma^-1 rho_n (sigma^-1)^dag and renormalises.
    """
    f = np.asarray(retro_probs, dtype=float)
    if f.shape != (len(ensemble),):
        raise ValueError("need one retrodictive probability per probe")
    if np.any(f < 0) or abs(f.sum() - 1.0) > 1e-9:
        raise ValueError("retrodictive probabilities must form a distribution")
    props = lambda_propositions(ensemble, mixture)
    lam = props.stacked()
    space = ensemble.space
    dim = space.dim
    mask = f > 0

    if diagonal_constraint:
        ld = np.real(np.einsum("mii->mi", lam))
        rho = np.full(dim, 1.0 / dim)
        probs_of = lambda r: ld @ r  # noqa: E731

        def step(r, ratio, eps):
            big_r = ratio @ ld
            if eps is not None:
                big_r = 1.0 + eps * big_r
            new = big_r * r * big_r
            return new / new.sum()

    else:
        rho = np.eye(dim, dtype=complex) / dim
        probs_of = lambda r: np.real(np.einsum("ij,mji->m", r, lam))  # noqa: E731

        def step(r, ratio, eps):
            big_r = np.einsum("m,mij->ij", ratio, lam)
            if eps is not None:
                big_r = np.eye(dim) + eps * big_r
            new = big_r @ r @ big_r
            new = 0.5 * (new + new.conj().T)
            return new / np.trace(new).real

    probs = probs_of(rho)
    ll = float(np.sum(f[mask] * np.log(probs[mask])))
    converged = False
    for _ in range(max_iters):
        ratio = np.divide(f, probs, out=np.zeros_like(f), where=probs > 0)
        eps = None
        for _ in range(MAX_DILUTION_HALVINGS):
            cand = step(rho, ratio, eps)
            cand_probs = probs_of(cand)
            if np.all(cand_probs[mask] > 0):
                cand_ll = float(np.sum(f[mask] * np.log(cand_probs[mask])))
                if cand_ll >= ll:
                    break
            eps = 1.0 if eps is None else 0.5 * eps
        else:
            converged = True
            break
        change = cand_ll - ll
        rho, probs, ll = cand, cand_probs, cand_ll
        if change <= ll_tol * abs(ll):
            converged = True
            break
    if not converged and strict:
        raise NoConvergence(f"state reconstruction did not converge in {max_iters} iterations")

    rho_n = np.diag(rho).astype(complex) if diagonal_constraint else rho
    sinv = np.linalg.inv(props.sigma.matrix)
    back = sinv @ rho_n @ sinv.conj().T
    return repair_state(back, space)


def qdt_retrodict(data) -> np.ndarray:
    """Pr(m | n) = Pr(n | m) / sum_m' Pr(n | m') assuming equal preparation rates.

    ``data`` is a :class:`CountTable` (one shot count for all probes), a
    :class:`FrequencyTable`, or an (M, N) predictive matrix.
    """
    if isinstance(data, (CountTable, FrequencyTable)):
        pred = data.frequencies()
    else:
        pred = np.asarray(data, dtype=float)
    if pred.ndim != 2:
        raise ValueError("predictive matrix must be two-dimensional")
    col = pred.sum(axis=0)
    dead = np.flatnonzero(col <= 0)
    if dead.size:
        raise UnreachableOutcome(f"outcomes {dead.tolist()} were never produced by any probe")
    return pred / col[None, :]


def ring_radii(r_max: float = 3.0, num: int = 25) -> np.ndarray:
    return np.linspace(0.0, r_max, num)


def min_dimension(r_max: float) -> int:
    """Smallest D with |alpha|^2 + 4|alpha| + 6 < D."""
    return int(np.floor(r_max * r_max + 4.0 * r_max + 6.0)) + 1


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.asarray(a) - np.asarray(b)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))

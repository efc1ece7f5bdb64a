import json
import math

import numpy as np
import pytest

from qretro.errors import NonPhysicalOperator, SingularMixture, TruncationWarning
from qretro.fock import (
    FockOperator,
    FockSpace,
    Povm,
    QuantumState,
    cholesky_factor,
    coherent_ket,
    coherent_state,
    fidelity,
    fidelity_pure,
    fock_state,
    ladder,
    maximally_mixed,
    number_operator,
    partial_trace,
    purity,
    tensor,
    thermal_state,
    von_neumann_entropy,
)


def random_density(dim, rng, rank=None):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def test_space_rejects_bad_dimension_and_tolerance():
    with pytest.raises(ValueError):
        FockSpace(1)
    with pytest.raises(ValueError):
        FockSpace(4, tol=1e-3)
    with pytest.raises(ValueError):
        FockSpace(4, tol=0.0)


def test_ladder_smallest_dimension():
    a = ladder(FockSpace(2)).matrix
    assert np.array_equal(a, np.array([[0, 1], [0, 0]], dtype=complex))


def test_ladder_action():
    sp = FockSpace(6)
    a = ladder(sp).matrix
    assert np.allclose(a @ sp.basis(1), sp.basis(0))
    assert np.allclose(a @ sp.basis(0), 0.0)
    assert np.allclose(a @ sp.basis(4), 2.0 * sp.basis(3))


def test_coherent_vacuum():
    sp = FockSpace(8)
    rho = coherent_state(0.0, sp)
    assert np.allclose(rho.matrix, fock_state(0, sp).matrix)


def test_coherent_mean_photon_number():
    sp = FockSpace(32)
    rho = coherent_state(1.0, sp)
    n = np.trace(rho.matrix @ number_operator(sp).matrix).real
    assert abs(n - 1.0) <= 1e-8


def test_coherent_overlap():
    sp = FockSpace(32)
    a = coherent_ket(0.5, sp)
    b = coherent_ket(-0.5, sp)
    assert abs(abs(np.vdot(b, a)) ** 2 - math.exp(-1.0)) <= 1e-8


def test_coherent_truncation_warns():
    with pytest.warns(TruncationWarning):
        coherent_state(3.0, FockSpace(10))


def test_state_validation():
    sp = FockSpace(3)
    with pytest.raises(NonPhysicalOperator):
        QuantumState(np.diag([0.5, 0.5, 0.5]).astype(complex), sp)
    with pytest.raises(NonPhysicalOperator):
        QuantumState(np.diag([1.2, -0.2, 0.0]).astype(complex), sp)
    with pytest.raises(NonPhysicalOperator):
        QuantumState(np.array([[0.5, 0.1, 0], [0.3, 0.5, 0], [0, 0, 0]], dtype=complex), sp)


def test_operator_matrix_is_read_only():
    op = fock_state(1, FockSpace(3))
    with pytest.raises(ValueError):
        op.matrix[0, 0] = 1.0


def test_purity_examples():
    sp = FockSpace(5)
    assert purity(coherent_state(0.7, sp, warn=False)) == pytest.approx(1.0, abs=1e-12)
    assert purity(maximally_mixed(sp)) == pytest.approx(1.0 / 5, abs=1e-15)


def test_fidelity_pure_examples():
    sp = FockSpace(4)
    ket = (sp.basis(0) + 1j * sp.basis(2)) / math.sqrt(2)
    rho = QuantumState.from_ket(ket, sp)
    assert fidelity_pure(rho, ket) == pytest.approx(1.0, abs=1e-15)
    orth = (sp.basis(0) - 1j * sp.basis(2)) / math.sqrt(2)
    assert fidelity_pure(rho, orth) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        fidelity_pure(rho, 2 * ket)


def test_uhlmann_fidelity_reduces_to_pure_overlap():
    rng = np.random.default_rng(3)
    sp = FockSpace(5)
    rho = QuantumState(random_density(5, rng), sp)
    ket = rng.normal(size=5) + 1j * rng.normal(size=5)
    ket /= np.linalg.norm(ket)
    assert fidelity(rho, QuantumState.from_ket(ket, sp)) == pytest.approx(fidelity_pure(rho, ket), abs=1e-10)
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)


def test_cholesky_examples():
    sp = FockSpace(4)
    assert np.allclose(cholesky_factor(maximally_mixed(sp)).matrix, np.eye(4) / 2)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    sigma = cholesky_factor(QuantumState(np.diag(p).astype(complex), sp)).matrix
    assert np.allclose(sigma, np.diag(np.sqrt(p)), atol=1e-15)


def test_cholesky_round_trip_and_triangularity():
    rng = np.random.default_rng(11)
    sp = FockSpace(7)
    rho = QuantumState(random_density(7, rng), sp)
    sigma = cholesky_factor(rho).matrix
    assert np.max(np.abs(sigma.conj().T @ sigma - rho.matrix)) <= 1e-12
    assert np.allclose(np.tril(sigma, -1), 0.0)


def test_cholesky_rejects_singular():
    sp = FockSpace(3)
    with pytest.raises(SingularMixture):
        cholesky_factor(fock_state(0, sp))


def test_entropy_examples():
    sp = FockSpace(6)
    assert von_neumann_entropy(fock_state(2, sp)) == pytest.approx(0.0, abs=1e-12)
    assert von_neumann_entropy(maximally_mixed(sp)) == pytest.approx(math.log(6), abs=1e-12)
    # thermal n=1 needs a long tail: weights 2^-(n+1)
    big = FockSpace(80)
    expected = 2 * math.log(2)  # (n+1) ln(n+1) - n ln n at n = 1
    assert von_neumann_entropy(thermal_state(1.0, big)) == pytest.approx(expected, abs=1e-12)


def test_json_round_trip_is_bit_exact():
    rng = np.random.default_rng(5)
    sp = FockSpace(4)
    rho = QuantumState(random_density(4, rng), sp)
    text = json.dumps(rho.to_dict())
    back = QuantumState.from_dict(json.loads(text))
    assert np.array_equal(back.matrix, rho.matrix)
    assert json.loads(text)["trace_tol"] == sp.tol


def test_bipartite_partial_trace():
    sp = FockSpace(3)
    a = QuantumState(np.diag([0.5, 0.3, 0.2]).astype(complex), sp)
    b = coherent_state(0.4, sp, warn=False)
    ab = tensor(a, b)
    assert ab.dims == (3, 3)
    assert np.allclose(partial_trace(ab, 0), a.matrix)
    assert np.allclose(partial_trace(ab, 1), b.matrix)
    data = json.loads(json.dumps(ab.to_dict()))
    assert data["dims"] == [3, 3]
    assert FockOperator.from_dict(data).dims == (3, 3)


def test_povm_checks():
    sp = FockSpace(2)
    e0 = FockOperator(np.diag([1.0, 0.0]).astype(complex), sp)
    e1 = FockOperator(np.diag([0.0, 1.0]).astype(complex), sp)
    povm = Povm(("a", "b"), (e0, e1)).check()
    assert povm.is_complete()
    assert povm["b"] is e1
    with pytest.raises(ValueError):
        Povm(("a", "a"), (e0, e1))
    bad = FockOperator(np.diag([1.5, -0.5]).astype(complex), sp)
    with pytest.raises(NonPhysicalOperator):
        Povm(("a", "b"), (bad, e1)).check()
    back = Povm.from_dict(json.loads(json.dumps(povm.to_dict())))
    assert back.labels == povm.labels

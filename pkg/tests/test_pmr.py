import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odesign import models
from odesign.errors import ValidationError
from odesign.pmr import (
    PmrHamiltonian,
    Term,
    conjugate_by_unitary,
    cycles,
    decompose,
    hopping_amplitude,
    is_stoquastic,
    recompose,
    stoquasticize,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2)


def random_hermitian(rng, n, sparsity=0.5):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    a[rng.random((n, n)) < sparsity] = 0
    return a + a.conj().T


def test_pauli_x():
    h = decompose(X)
    assert np.array_equal(h.d0, [0, 0])
    assert h.n_terms == 1
    assert np.array_equal(h.terms[0].perm, [1, 0])
    assert np.allclose(h.terms[0].diag, [1, 1])


def test_pauli_y_row_convention():
    h = decompose(Y)
    assert h.n_terms == 1
    assert np.allclose(h.terms[0].diag, [-1j, 1j])


def test_qutrit_structure():
    phi, J = 0.7, 1.3
    h = decompose(recompose(models.qutrit(phi, J)))
    assert np.allclose(h.d0, [0, J, 0])
    assert h.n_terms == 2
    phases = sorted((complex(t.diag[0]) for t in h.terms), key=lambda z: z.imag)
    assert np.allclose(phases, [np.exp(-1j * phi), np.exp(1j * phi)])
    for t in h.terms:
        assert np.allclose(t.diag, t.diag[0])
        assert len(cycles(t.perm)) == 1


def test_diagonal_has_no_terms():
    assert decompose(np.diag([1.0, 2.0, -3.0])).n_terms == 0


def test_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        decompose(np.array([[0, 1], [2, 0]]))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 16), st.integers(0, 2**32 - 1))
def test_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    m = random_hermitian(rng, n)
    h = decompose(m)
    assert np.max(np.abs(recompose(h) - m)) <= 1e-12
    for j in range(h.n_terms):
        assert h.inverse_index(j) is not None


def test_decompose_idempotent():
    m = random_hermitian(np.random.default_rng(3), 6)
    h1 = decompose(m)
    h2 = decompose(recompose(h1))
    assert np.array_equal(h1.d0, h2.d0)
    assert len(h1.terms) == len(h2.terms)
    for a, b in zip(h1.terms, h2.terms):
        assert np.array_equal(a.perm, b.perm) and np.array_equal(a.diag, b.diag)


def test_single_qubit_recomposes_to_paulis():
    a = (0.3, -1.1, 0.8, 0.25)
    m = recompose(models.single_qubit(*a))
    assert np.allclose(m, a[0] * I2 + a[1] * X + a[2] * Y + a[3] * Z, atol=1e-15)


def test_perm_cycle_recomposes():
    eps = 0.37
    p = np.roll(np.eye(4), 1, axis=0)
    expected = -(p + p @ p @ p) + eps * p @ p
    assert np.allclose(recompose(models.perm_cycle(eps)), expected)


def test_term_validation():
    with pytest.raises(ValidationError):
        Term(np.ones(3), (0, 2, 1))  # fixed point at 0
    with pytest.raises(ValidationError):
        Term(np.ones(3), (1, 1, 0))
    with pytest.raises(ValidationError):
        PmrHamiltonian(np.zeros(2), (Term([1, 1], (1, 0)), Term([2, 2], (1, 0))))


def test_build_merges_and_prunes():
    h = PmrHamiltonian.build(np.zeros(2), [([1, 1], (1, 0)), ([-1, -1], (1, 0))])
    assert h.n_terms == 0


def tfim_matrix(gamma):
    return recompose(models.tfim(models.LatticeParams(3, {(0, 1): 1.0, (1, 2): 1.0}, gamma=gamma)))


def test_stoquasticity_of_tfim():
    m = tfim_matrix(1.0)
    assert not is_stoquastic(m)
    u = np.diag([1.0, -1.0])
    full = np.kron(np.kron(u, u), u)
    assert is_stoquastic(conjugate_by_unitary(m, full))
    assert is_stoquastic(np.diag([3.0, -1.0]))


def test_stoquasticize():
    phi, J = 1.1, 0.6
    h = stoquasticize(models.qutrit(phi, J))
    assert np.allclose(recompose(h), recompose(models.qutrit(math.pi, J)))
    s = stoquasticize(models.perm_cycle(0.5))
    p = np.roll(np.eye(4), 1, axis=0)
    assert np.allclose(recompose(s), -(p + p @ p @ p) - 0.5 * p @ p)
    again = stoquasticize(s)
    assert np.array_equal(recompose(again), recompose(s))


def test_conjugation():
    had = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    assert np.allclose(conjugate_by_unitary(Z, had), X)
    assert np.array_equal(conjugate_by_unitary(X, np.eye(2)), X)
    with pytest.raises(ValidationError):
        conjugate_by_unitary(X, 2 * np.eye(2))


def test_hopping_amplitude():
    phi = 0.4
    h = models.qutrit(phi, 1.0)
    for z in range(3):
        assert hopping_amplitude(h, 0, z) == pytest.approx(np.exp(1j * phi))
    q = models.single_qubit(0, 0.6, 0.8, 0)
    assert abs(hopping_amplitude(q, 0, 0)) == pytest.approx(1.0)
    zero_row = PmrHamiltonian(np.zeros(2), (Term([0, 2], (1, 0)),))
    assert hopping_amplitude(zero_row, 0, 1) == 0

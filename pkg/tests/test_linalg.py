import numpy as np
import pytest

from rsma_ee import linalg


def test_dft_matrix_size_one_is_identity():
    assert np.allclose(linalg.dft_matrix(1), np.array([[1.0 + 0.0j]]))


def test_dft_matrix_size_two_analytic():
    expected = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    assert np.max(np.abs(linalg.dft_matrix(2) - expected)) < 1e-15


def test_dft_matrix_64_unitary():
    u = linalg.dft_matrix(64)
    err = np.max(np.abs(u.conj().T @ u - np.eye(64)))
    assert err < 1e-12


def test_dft_matrix_entries_definition():
    m = 5
    u = linalg.dft_matrix(m)
    a, b = 3, 4
    assert abs(u[a, b] - np.exp(-2j * np.pi * a * b / m) / np.sqrt(m)) < 1e-14


def test_is_unitary():
    assert linalg.is_unitary(linalg.dft_matrix(8))
    assert not linalg.is_unitary(2.0 * np.eye(3, dtype=complex))


def test_herm_symmetrizes():
    a = np.array([[1.0, 2.0 + 1j], [0.0, 3.0]], dtype=complex)
    h = linalg.herm(a)
    assert np.allclose(h, h.conj().T)
    assert np.allclose(np.diag(h).imag, 0.0)


def test_psd_clamp_floors_small_negatives():
    m = np.diag([1.0, -1e-9]).astype(complex)
    c = linalg.psd_clamp(m)
    w = np.linalg.eigvalsh(c)
    assert w.min() >= 0.0
    assert abs(w.max() - 1.0) < 1e-12


def test_psd_clamp_rejects_large_negatives():
    with pytest.raises(ValueError):
        linalg.psd_clamp(np.diag([1.0, -0.5]).astype(complex))


def test_psd_sqrt_squares_back(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m = a @ a.conj().T
    r = linalg.psd_sqrt(m)
    assert np.max(np.abs(r @ r - m)) < 1e-10


def test_psd_inv_sqrt(rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    m = a @ a.conj().T + np.eye(3)
    r = linalg.psd_inv_sqrt(m)
    assert np.max(np.abs(r @ m @ r - np.eye(3))) < 1e-10


def test_logdet_psd_matches_slogdet(rng):
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    m = a @ a.conj().T + 0.1 * np.eye(5)
    expected = np.linalg.slogdet(m).logabsdet
    assert abs(linalg.logdet_psd(m) - expected) < 1e-10


def test_logdet_psd_near_singular_is_finite():
    m = np.diag([1.0, 1e-30]).astype(complex)
    val = linalg.logdet_psd(m)
    assert np.isfinite(val)


def test_logdet_i_plus_ab_identity(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    a = a @ a.conj().T
    b = b @ b.conj().T
    direct = np.linalg.slogdet(np.eye(4, dtype=complex) + a @ b).logabsdet
    assert abs(linalg.logdet_i_plus_ab(a, b) - direct) < 1e-10

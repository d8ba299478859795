"""Small Hermitian linear-algebra helpers shared by the model and the solvers."""

import numpy as np

# Eigenvalues in [-PSD_CLAMP_TOL, 0) are treated as roundoff and clamped to zero.
PSD_CLAMP_TOL = 1e-8


def herm(x):
    """Hermitian part (X + X^H)/2."""
    return 0.5 * (x + x.conj().T)


def dft_matrix(m: int) -> np.ndarray:
    """Unitary DFT matrix, entries exp(-2j*pi*a*b/m)/sqrt(m)."""
    if m < 1:
        raise ValueError("matrix size must be positive")
    a = np.arange(m)
    return np.exp(-2j * np.pi * np.outer(a, a) / m) / np.sqrt(m)


def is_unitary(u, tol=1e-10):
    n = u.shape[0]
    return u.shape == (n, n) and np.linalg.norm(u.conj().T @ u - np.eye(n)) <= tol * max(1.0, n)


def psd_clamp(x, tol=PSD_CLAMP_TOL, label="matrix"):
    """Project a nominally-PSD Hermitian matrix onto the PSD cone.

    Eigenvalues in [-tol, 0) are clamped to zero; anything more negative is a
    genuine violation and raises ValueError.
    """
    xh = herm(np.asarray(x))
    w, v = np.linalg.eigh(xh)
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
    if w.size and w[0] < -tol * scale:
        raise ValueError(f"{label} is not positive semidefinite (min eig {w[0]:.3e})")
    w = np.maximum(w, 0.0)
    return (v * w) @ v.conj().T


def psd_sqrt(x):
    """Hermitian square root with negative roundoff eigenvalues clamped to zero."""
    w, v = np.linalg.eigh(herm(np.asarray(x)))
    return (v * np.sqrt(np.maximum(w, 0.0))) @ v.conj().T


def psd_inv_sqrt(x, floor=1e-300):
    """Inverse Hermitian square root; eigenvalues below `floor` are rejected."""
    w, v = np.linalg.eigh(herm(np.asarray(x)))
    if w.min() <= floor:
        raise ValueError(f"matrix is singular (min eig {w.min():.3e}), cannot invert")
    return (v / np.sqrt(w)) @ v.conj().T


def logdet_psd(x):
    """log det of a Hermitian positive definite matrix.

    Cholesky first; on failure fall back to a symmetric eigendecomposition with
    eigenvalues floored at 1e-14 * trace.
    """
    xh = herm(np.asarray(x))
    try:
        chol = np.linalg.cholesky(xh)
        return 2.0 * float(np.sum(np.log(np.real(np.diag(chol)))))
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(xh)
        floor = 1e-14 * max(float(np.real(np.trace(xh))), np.finfo(float).tiny)
        return float(np.sum(np.log(np.maximum(w, floor))))


def logdet_i_plus_ab(a_psd, b_psd):
    """log det(I + A B) for Hermitian PSD A, B via det(I + A^{1/2} B A^{1/2})."""
    ah = psd_sqrt(a_psd)
    return logdet_psd(np.eye(a_psd.shape[0]) + ah @ b_psd @ ah)

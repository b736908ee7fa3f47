"""Truncated Fock-space kernel: ladder operators, canonical states, expectations.

Operators are plain dense complex ndarrays of shape (dim, dim); kets are
complex vectors of length dim. Dense storage is deliberate: at desk scale
(dim <= 256) the N^2 footprint is trivial, and sparsity only pays off at the
superoperator level (see :mod:`kerrsim.lindblad`).
"""

import math

import numpy as np

from .errors import TruncationError

__all__ = [
    "destroy",
    "create",
    "number",
    "adequate_dim",
    "check_adequacy",
    "coherent_ket",
    "fock_ket",
    "ket_to_dm",
    "thermal_density",
    "expect",
    "validate_density_matrix",
]


def destroy(dim: int) -> np.ndarray:
    """Annihilation operator on a Fock space truncated at ``dim`` levels.

    Entries a[n-1, n] = sqrt(n); the creation operator is its conjugate
    transpose.
    """
    if dim < 2:
        raise ValueError(f"Fock dimension must be >= 2, got {dim}")
    a = np.zeros((dim, dim), dtype=complex)
    ns = np.arange(1, dim)
    a[ns - 1, ns] = np.sqrt(ns)
    return a


def create(dim: int) -> np.ndarray:
    """Creation operator, conjugate transpose of :func:`destroy`."""
    return destroy(dim).conj().T


def number(dim: int) -> np.ndarray:
    """Photon number operator, diagonal 0..dim-1."""
    if dim < 2:
        raise ValueError(f"Fock dimension must be >= 2, got {dim}")
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def adequate_dim(alpha: complex) -> int:
    """Smallest cutoff considered adequate for a coherent amplitude.

    Heuristic |alpha|^2 + 6|alpha| + 10, sized so the truncated tail mass of
    a coherent state stays below 1e-9.
    """
    a = abs(alpha)
    return int(math.ceil(a * a + 6.0 * a + 10.0))


def check_adequacy(dim: int, alpha: complex) -> None:
    """Raise :class:`TruncationError` if ``dim`` is too small for ``alpha``."""
    need = adequate_dim(alpha)
    if dim < need:
        raise TruncationError(
            f"dim={dim} too small for coherent amplitude |alpha|={abs(alpha):.3f}; "
            f"use dim >= {need}",
            suggested_dim=need,
        )


def coherent_ket(dim: int, alpha: complex) -> np.ndarray:
    """Coherent state |alpha> on the truncated space, renormalized.

    Amplitudes c_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!), renormalized after
    truncation so downstream expectation values do not inherit norm drift.
    """
    check_adequacy(dim, alpha)
    # recurrence c_n = c_{n-1} alpha / sqrt(n) keeps every intermediate finite
    c = np.empty(dim, dtype=complex)
    c[0] = 1.0
    for n in range(1, dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    c *= math.exp(-0.5 * abs(alpha) ** 2)
    return c / np.linalg.norm(c)


def fock_ket(dim: int, n: int) -> np.ndarray:
    """Number state |n>."""
    if not 0 <= n < dim:
        raise ValueError(f"level {n} outside truncated space of dim {dim}")
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return psi


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    """Pure-state density matrix |psi><psi|."""
    return np.outer(psi, psi.conj())


def thermal_density(dim: int, n_th: float) -> np.ndarray:
    """Thermal (Bose-Einstein) density matrix, diagonal, renormalized.

    rho_nn proportional to (n_th/(1+n_th))^n; <n> approaches n_th for an
    adequate cutoff.
    """
    if n_th < 0:
        raise ValueError(f"thermal occupation must be >= 0, got {n_th}")
    if dim < 2:
        raise ValueError(f"Fock dimension must be >= 2, got {dim}")
    if n_th == 0.0:
        p = np.zeros(dim)
        p[0] = 1.0
    else:
        r = n_th / (1.0 + n_th)
        p = r ** np.arange(dim)
        p = p / p.sum()
    return np.diag(p).astype(complex)


def rotate_dm(rho: np.ndarray, phi: float) -> np.ndarray:
    """Rotate a state in phase space: a -> a e^{i phi}.

    phi = -arg<a> puts the mean field on the positive x axis, the frame in
    which squeezing angles and Wigner plots are conventionally quoted.
    """
    u = np.exp(1j * phi * np.arange(rho.shape[0]))
    return (u[:, None] * rho) * u.conj()[None, :]


def expect(op: np.ndarray, rho: np.ndarray) -> complex:
    """Tr(op rho) for an operator and a density matrix (or any state matrix).

    Also accepts a ket in place of rho.
    """
    if rho.ndim == 1:
        if op.shape[1] != rho.shape[0]:
            raise ValueError(f"shape mismatch: op {op.shape} vs ket {rho.shape}")
        return complex(np.vdot(rho, op @ rho))
    if op.shape != rho.shape:
        raise ValueError(f"shape mismatch: op {op.shape} vs rho {rho.shape}")
    # Tr(A B) = sum_ij A_ij B_ji without forming the product
    return complex(np.sum(op * rho.T))


def validate_density_matrix(rho: np.ndarray, herm_tol: float = 1e-10,
                            trace_tol: float = 1e-10, eig_tol: float = 1e-8) -> None:
    """Assert Hermiticity, unit trace and numerical positivity.

    Raises ValueError with the offending quantity on failure.
    """
    dh = np.max(np.abs(rho - rho.conj().T))
    if dh > herm_tol:
        raise ValueError(f"density matrix not Hermitian: max deviation {dh:.3e}")
    dt = abs(np.trace(rho) - 1.0)
    if dt > trace_tol:
        raise ValueError(f"density matrix trace off unity by {dt:.3e}")
    w = np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)
    if w.min() < -eig_tol:
        raise ValueError(f"density matrix indefinite: min eigenvalue {w.min():.3e}")

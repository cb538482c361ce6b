"""Dense complex-matrix helpers on the joint transmon (x) resonator space.

Tensor ordering is fixed everywhere as ``transmon (x) resonator``: the joint
basis index of ``|k, n>`` is ``k * n_fock + n``.
"""
import math

import numpy as np


class DimensionError(ValueError):
    """Raised when operator dimensions are invalid or incompatible."""


def kron(a, b):
    """Kronecker product with ``out[i*rb + k, j*cb + l] = a[i, j] * b[k, l]``."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def identity(dim):
    return np.eye(dim, dtype=complex)


def annihilation(dim):
    """Truncated ladder operator with ``a[n, n+1] = sqrt(n+1)``."""
    if dim < 2:
        raise DimensionError(f"annihilation operator needs dim >= 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def creation(dim):
    return annihilation(dim).conj().T


def number(dim):
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def projector(dim, i, j=None):
    """Matrix unit ``|i><j|`` (``|i><i|`` when ``j`` is omitted)."""
    j = i if j is None else j
    out = np.zeros((dim, dim), dtype=complex)
    out[i, j] = 1.0
    return out


def dagger(m):
    return np.asarray(m).conj().T


def basis(dim, n):
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return v


def coherent(dim, alpha):
    """Truncated coherent state vector from the Fock series (not renormalized
    beyond the truncation, so ``<a>`` equals ``alpha`` up to truncation error)."""
    n = np.arange(dim)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    mag = np.abs(alpha)
    if mag == 0:
        return basis(dim, 0)
    amp = np.exp(-0.5 * mag**2 + n * np.log(mag) - 0.5 * log_fact)
    return amp * np.exp(1j * n * np.angle(alpha))


def ket2dm(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def expectation(op, rho):
    """Return ``trace(op @ rho)``."""
    op = np.asarray(op)
    rho = np.asarray(rho)
    if op.shape != rho.shape or op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DimensionError(f"cannot take expectation of {op.shape} operator on {rho.shape} state")
    # trace(A B) = sum_ij A_ij B_ji without forming the product
    return complex(np.einsum("ij,ji->", op, rho))


def is_hermitian(m, atol=1e-12):
    m = np.asarray(m)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= atol)


def check_density(rho, trace_tol=1e-6, herm_tol=1e-12, diag_imag_tol=1e-9):
    """Validate a density matrix; raise ``ValueError`` describing the first
    violated condition."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T), initial=0.0)
    if herm > herm_tol:
        raise ValueError(f"density matrix not Hermitian (max deviation {herm:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"density matrix trace {tr!r} outside 1 +/- {trace_tol}")
    if np.max(np.abs(np.diag(rho).imag), initial=0.0) > diag_imag_tol:
        raise ValueError("density matrix has complex diagonal entries")
    return rho


def joint_ops(n_transmon, n_fock):
    """Resonator annihilation operator and transmon matrix-unit factory on the
    joint space."""
    a = kron(identity(n_transmon), annihilation(n_fock))

    def level(i, j=None):
        return kron(projector(n_transmon, i, j), identity(n_fock))

    return a, level


def partial_trace_resonator(rho, n_transmon, n_fock):
    """Reduced transmon density matrix."""
    r = np.asarray(rho).reshape(n_transmon, n_fock, n_transmon, n_fock)
    return np.einsum("injn->ij", r)


def partial_trace_transmon(rho, n_transmon, n_fock):
    r = np.asarray(rho).reshape(n_transmon, n_fock, n_transmon, n_fock)
    return np.einsum("kmkn->mn", r)

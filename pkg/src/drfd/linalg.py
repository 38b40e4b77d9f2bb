"""Dense symmetric matrix kernels used across the package.

Every routine here works on small dense ``numpy`` arrays (dimension in the
tens at most). Symmetric inputs are validated and symmetrized on entry.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InvalidInput, NotPsd, SingularB, SingularInput, ZeroMatrix

# relative cutoff used for rank decisions (pseudo-determinant, pseudo-inverse)
RANK_RTOL = 1e-12
SYM_RTOL = 1e-12


def as_sym(A, name="matrix"):
    """Return ``A`` as a symmetric float array, raising if it is not."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} has non-finite entries")
    scale = max(np.abs(A).max(), 1.0) if A.size else 1.0
    if np.abs(A - A.T).max(initial=0.0) > SYM_RTOL * scale:
        raise InvalidInput(f"{name} is not symmetric")
    return 0.5 * (A + A.T)


def sym_eig(A):
    """Eigen-decomposition of a symmetric matrix, eigenvalues descending."""
    A = as_sym(A)
    w, V = np.linalg.eigh(A)
    return w[::-1].copy(), V[:, ::-1].copy()


def _check_psd(A, name):
    w = np.linalg.eigvalsh(A)
    scale = max(np.abs(w).max(initial=0.0), 1.0)
    if w.size and w[0] < -1e-10 * scale:
        raise NotPsd(f"{name} is not positive semi-definite (min eigenvalue {w[0]:.3e})")
    return w


def gen_eig_largest(A, B):
    """Largest eigenpair of the pencil ``A p = w B p``.

    ``B`` must be positive definite. The eigenvector is normalized so that
    ``p' B p = 1``.
    """
    A = as_sym(A, "A")
    B = as_sym(B, "B")
    if A.shape != B.shape:
        raise InvalidInput("A and B must have the same shape")
    wb = np.linalg.eigvalsh(B)
    if wb[0] <= RANK_RTOL * max(np.abs(wb).max(), 1e-300):
        raise SingularB("B is not positive definite")
    n = A.shape[0]
    w, V = sla.eigh(A, B, subset_by_index=[n - 1, n - 1])
    p = V[:, 0]
    p = p / np.sqrt(p @ B @ p)
    # fix the sign so results are reproducible across LAPACK builds
    k = np.argmax(np.abs(p))
    if p[k] < 0:
        p = -p
    return float(w[0]), p


def psd_sqrt(A):
    """Symmetric square root of a PSD matrix."""
    A = as_sym(A)
    _check_psd(A, "matrix")
    w, V = np.linalg.eigh(A)
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def psd_sqrt_inv(A):
    """Return ``(A^{1/2}, A^{-1/2})`` for a positive definite matrix."""
    A = as_sym(A)
    _check_psd(A, "matrix")
    w, V = np.linalg.eigh(A)
    if w[0] <= RANK_RTOL * max(w[-1], 1e-300):
        raise SingularInput("matrix is singular; inverse square root undefined")
    r = np.sqrt(w)
    return (V * r) @ V.T, (V / r) @ V.T


def pinv_psd(A):
    """Moore-Penrose inverse of a PSD matrix with the package rank cutoff."""
    A = as_sym(A)
    w, V = np.linalg.eigh(A)
    keep = w > RANK_RTOL * max(np.abs(w).max(initial=0.0), 1e-300)
    return (V[:, keep] / w[keep]) @ V[:, keep].T


def pseudo_det(A, log=False):
    """Product of the eigenvalues above ``1e-12 * lambda_max``."""
    A = as_sym(A)
    w = _check_psd(A, "matrix")
    top = w[-1] if w.size else 0.0
    if top <= 0.0:
        raise ZeroMatrix("pseudo-determinant of the zero matrix")
    keep = w[w > RANK_RTOL * top]
    if log:
        return float(np.sum(np.log(keep)))
    return float(np.prod(keep))


@dataclass(frozen=True)
class CompactSvd:
    U1: np.ndarray
    s: np.ndarray
    U2: np.ndarray

    @property
    def rank(self):
        return self.s.size

    @property
    def Lambda(self):
        return np.diag(self.s)

    def reconstruct(self):
        return (self.U1 * self.s) @ self.U2.T


def compact_svd(V):
    """Rank-revealing SVD ``V = U1 diag(s) U2'`` with strictly positive ``s``."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if not np.all(np.isfinite(V)):
        raise InvalidInput("non-finite entries")
    U, s, Wt = np.linalg.svd(V, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise ZeroMatrix("compact SVD of the zero matrix")
    r = int(np.sum(s > RANK_RTOL * s[0]))
    return CompactSvd(U[:, :r].copy(), s[:r].copy(), Wt[:r].T.copy())


def min_eig(A):
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])

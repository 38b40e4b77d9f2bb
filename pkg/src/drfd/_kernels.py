"""Hot numeric loops, each with a numba and a pure-numpy implementation.

The backend is picked once at import time. Set ``DRFD_NUMBA=0`` to force the
numpy path (useful for debugging and for the kernel benchmark); numba is also
skipped silently when it cannot be imported.
"""

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("DRFD_NUMBA", "1").lower() not in ("0", "false", "no", "off")

# samples processed per chunk by the numpy tail counter
_CHUNK = 1 << 16


# ---------------------------------------------------------------------------
# LTI state recursion  x(k+1) = A x(k) + B u(k) + Bd d(k) + Bf f(k)
# ---------------------------------------------------------------------------

def _lti_states_np(A, B, Bd, Bf, u, d, f, x0):
    horizon = u.shape[0]
    X = np.empty((horizon, A.shape[0]))
    x = x0.copy()
    # inputs are pre-mixed so that the loop carries a single matvec
    drive = u @ B.T + d @ Bd.T + f @ Bf.T
    for k in range(horizon):
        X[k] = x
        x = A @ x + drive[k]
    return X


if _HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _lti_states_nb(A, B, Bd, Bf, u, d, f, x0):
        horizon = u.shape[0]
        nx = A.shape[0]
        X = np.empty((horizon, nx))
        x = x0.copy()
        xn = np.empty(nx)
        for k in range(horizon):
            for i in range(nx):
                X[k, i] = x[i]
            for i in range(nx):
                acc = 0.0
                for j in range(nx):
                    acc += A[i, j] * x[j]
                for j in range(B.shape[1]):
                    acc += B[i, j] * u[k, j]
                for j in range(Bd.shape[1]):
                    acc += Bd[i, j] * d[k, j]
                for j in range(Bf.shape[1]):
                    acc += Bf[i, j] * f[k, j]
                xn[i] = acc
            for i in range(nx):
                x[i] = xn[i]
        return X


def lti_states(A, B, Bd, Bf, u, d, f, x0):
    """State trajectory x(0..horizon-1) of the discrete-time recursion."""
    args = tuple(np.ascontiguousarray(a, dtype=float) for a in (A, B, Bd, Bf, u, d, f, x0))
    if USE_NUMBA:
        return _lti_states_nb(*args)
    return _lti_states_np(*args)


# ---------------------------------------------------------------------------
# Radial-mixture tail counting.  A sample is xi = U2**(1/alpha) * w_j where
# the atom j is drawn from the cumulative weights with U1.  Counts xi'M xi > J.
# ---------------------------------------------------------------------------

def _radial_tail_count_np(atoms, cumw, alpha, M, J, u_atom, u_rad):
    count = 0
    n = u_atom.shape[0]
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        idx = np.searchsorted(cumw, u_atom[start:stop], side="right")
        np.minimum(idx, atoms.shape[0] - 1, out=idx)
        lam = u_rad[start:stop] ** (1.0 / alpha)
        xi = lam[:, None] * atoms[idx]
        quad = np.einsum("ij,jk,ik->i", xi, M, xi)
        count += int(np.count_nonzero(quad > J))
    return count


if _HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _radial_tail_count_nb(atoms, cumw, alpha, M, J, u_atom, u_rad):
        n = u_atom.shape[0]
        dim = atoms.shape[1]
        last = atoms.shape[0] - 1
        inv_alpha = 1.0 / alpha
        xi = np.empty(dim)
        count = 0
        for s in range(n):
            j = np.searchsorted(cumw, u_atom[s], side="right")
            if j > last:
                j = last
            lam = u_rad[s] ** inv_alpha
            for a in range(dim):
                xi[a] = lam * atoms[j, a]
            quad = 0.0
            for a in range(dim):
                row = 0.0
                for b in range(dim):
                    row += M[a, b] * xi[b]
                quad += xi[a] * row
            if quad > J:
                count += 1
        return count


def radial_tail_count(atoms, cumw, alpha, M, J, u_atom, u_rad):
    """Number of radial-mixture samples with xi'M xi > J."""
    atoms = np.ascontiguousarray(atoms, dtype=float)
    cumw = np.ascontiguousarray(cumw, dtype=float)
    M = np.ascontiguousarray(M, dtype=float)
    u_atom = np.ascontiguousarray(u_atom, dtype=float)
    u_rad = np.ascontiguousarray(u_rad, dtype=float)
    if USE_NUMBA:
        return int(_radial_tail_count_nb(atoms, cumw, float(alpha), M, float(J), u_atom, u_rad))
    return _radial_tail_count_np(atoms, cumw, float(alpha), M, float(J), u_atom, u_rad)


# ---------------------------------------------------------------------------
# Schur complement of one LMI block for the HKM direction:
#     H[i, j] = Tr(F_i S^{-1} F_j Z)
# ---------------------------------------------------------------------------

def _schur_block_np(Fa, Sinv, Z):
    k = Fa.shape[0]
    G = Sinv @ Fa @ Z
    # Tr(F_i G_j) = <F_i, G_j^T>
    H = Fa.reshape(k, -1) @ G.transpose(0, 2, 1).reshape(k, -1).T
    return 0.5 * (H + H.T)


if _HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _schur_block_nb(Fa, Sinv, Z):
        k, d, _ = Fa.shape
        # (S^-1 F_j Z)' = Z F_j S^-1 for symmetric F_j, S, Z: rows stay contiguous
        GT = np.empty((k, d * d))
        for j in range(k):
            GT[j] = (Z @ Fa[j] @ Sinv).ravel()
        H = Fa.reshape(k, d * d) @ GT.T
        return 0.5 * (H + H.T)


def schur_block(Fa, Sinv, Z):
    Fa = np.ascontiguousarray(Fa, dtype=float)
    Sinv = np.ascontiguousarray(Sinv, dtype=float)
    Z = np.ascontiguousarray(Z, dtype=float)
    if USE_NUMBA:
        return _schur_block_nb(Fa, Sinv, Z)
    return _schur_block_np(Fa, Sinv, Z)


def backend():
    return "numba" if USE_NUMBA else "numpy"

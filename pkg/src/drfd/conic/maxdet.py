"""Log-determinant maximization by sequential quadratic models.

The objective ``lin(x) + weight * log det X(x)`` is handled by the linear SDP
solver alone. Each outer step maximizes the second-order model of ``log det``
around the current iterate,

    Tr(X_k^-1 dX) - 1/2 ||X_k^-1/2 dX X_k^-1/2||_F^2,

where the quadratic term becomes an epigraph variable bounded through one
extra LMI. A backtracking line search on the true objective keeps the
sequence monotone.
"""

import logging

import numpy as np

from ..errors import InvalidProblem, SolverError
from .ipm import SdpSolution, SdpStatus, lmi_min_eigs, solve_sdp
from .problem import CompiledSdp, SdpProblem

logger = logging.getLogger(__name__)

_REG = 1e-9


def _svec_maps(d):
    iu = np.triu_indices(d)
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return iu, w


def _svec(A, iu, w):
    return A[iu] * w


def _extend(cp, extra_vars, new_blocks, c_extra, c=None):
    """Compiled problem with ``extra_vars`` appended after the original ones."""
    m = cp.m + extra_vars
    c_new = np.concatenate([cp.c if c is None else c, c_extra])
    G = np.hstack([cp.G, np.zeros((cp.G.shape[0], extra_vars))])
    return CompiledSdp(
        c=c_new,
        blocks=list(cp.blocks) + new_blocks,
        lp_names=list(cp.lp_names),
        g0=cp.g0,
        G=G,
        sense="min",
        objective_const=0.0,
        variables=[],
    )


def _affine(F0, idx, Fa, x):
    X = F0.copy()
    if idx.size:
        X += (x[idx] @ Fa.reshape(idx.size, -1)).reshape(Fa.shape[1:])
    return X


def _logdet(X):
    sign, val = np.linalg.slogdet(X)
    return val if sign > 0 else -np.inf


def _phase_one(cp, F0, idx, Fa, tol):
    """Point with ``X(x) >= s I`` for the largest ``s`` (capped at 1)."""
    d = F0.shape[0]
    m = cp.m
    s_idx = m
    blk_idx = np.concatenate([idx, [s_idx]]).astype(np.int64)
    blk_Fa = np.concatenate([Fa, -np.eye(d)[None]], axis=0)
    cap = (f"phase1-cap", 1, np.array([[1.0]]), np.array([s_idx], dtype=np.int64), -np.ones((1, 1, 1)))
    prob = _extend(cp, 1, [("phase1", d, F0, blk_idx, blk_Fa), cap], np.array([-1.0]), c=np.zeros(m))
    sol = solve_sdp(prob, tol=tol)
    if sol.status is not SdpStatus.OPTIMAL and sol.status is not SdpStatus.NUMERICAL_TROUBLE:
        raise SolverError(f"phase one failed: {sol.status.value}", status=sol.status, solution=sol)
    x = sol.x[:m]
    if np.linalg.eigvalsh(_affine(F0, idx, Fa, x))[0] <= 0:
        raise SolverError("log-det argument has no positive definite point", status=sol.status, solution=sol)
    return x


def _final_status(cp, x, last, feas_tol=1e-7):
    """Optimal once converged at a feasible point with a clean last model step.

    A stalled model solve only shortens the step; the iterate itself is what
    gets reported, so its own feasibility decides.
    """
    if any(v > feas_tol for v in last.kkt.values()):
        return SdpStatus.NUMERICAL_TROUBLE
    worst = min(e / s for e, s in lmi_min_eigs(cp, x).values())
    return SdpStatus.OPTIMAL if worst >= -feas_tol else SdpStatus.NUMERICAL_TROUBLE


def maxdet_iterate(problem, logdet_block, tol=1e-8, weight=1.0, x0=None, max_outer=60, inner_tol=1e-9):
    """Maximize ``objective(x) + weight * log det X(x)``.

    ``logdet_block`` is an LMI block of ``problem`` (so ``X(x) >= 0`` is
    already constrained); the problem's linear objective must be a
    maximization (or empty). Iterates stop once an outer step improves the
    objective by no more than ``tol`` (relative to ``max(1, |f|)``).
    """
    if not isinstance(problem, SdpProblem):
        raise InvalidProblem("maxdet_iterate needs an SdpProblem")
    if logdet_block not in problem.blocks:
        raise InvalidProblem("log-det block does not belong to the problem")
    cp = problem.compile()
    if cp.sense != "max" and np.any(cp.c != 0):
        raise InvalidProblem("the linear objective must be a maximization")
    lin = -cp.c  # maximize lin'x
    F0, Fd = problem.affine_terms(logdet_block)
    d = logdet_block.dim
    idx = np.array(sorted(Fd), dtype=np.int64)
    Fa = np.stack([Fd[i] for i in idx]) if idx.size else np.zeros((0, d, d))
    m = cp.m

    def f(x):
        X = _affine(F0, idx, Fa, x)
        return float(lin @ x) + weight * _logdet(X)

    if x0 is None:
        x = _phase_one(cp, F0, idx, Fa, inner_tol)
    else:
        x = np.asarray(x0, dtype=float).copy()
    fx = f(x)
    if not np.isfinite(fx):
        raise SolverError("starting point is not in the log-det domain")

    iu, w = _svec_maps(d)
    q = iu[0].size
    t_idx = m
    history = [fx]
    regularized = False
    status = SdpStatus.NUMERICAL_TROUBLE
    last = None
    for outer in range(max_outer):
        Xk = _affine(F0, idx, Fa, x)
        ev, U = np.linalg.eigh(Xk)
        if ev[0] <= _REG * max(ev[-1], 1.0):
            regularized = True
            ev = ev + _REG
        L = (U / np.sqrt(ev)) @ U.T  # X_k^{-1/2}
        Xinv = L @ L
        # linear model coefficient and the svec rows of L F_i L
        grad = np.zeros(m)
        if idx.size:
            grad[idx] = Fa.reshape(Fa.shape[0], -1) @ Xinv.ravel()
        u0 = _svec(L @ F0 @ L, iu, w) - _svec(np.eye(d), iu, w)
        A = np.array([_svec(L @ Fi @ L, iu, w) for Fi in Fa]).reshape(idx.size, q)
        dim = q + 1
        E0 = np.zeros((dim, dim))
        E0[0, 1:] = u0
        E0[1:, 0] = u0
        E0[1:, 1:] = np.eye(q)
        Fb = np.zeros((idx.size + 1, dim, dim))
        Fb[:idx.size, 0, 1:] = A
        Fb[:idx.size, 1:, 0] = A
        Fb[idx.size, 0, 0] = 1.0
        blk = ("maxdet-model", dim, E0, np.concatenate([idx, [t_idx]]).astype(np.int64), Fb)
        c = -(lin + weight * grad)
        sub = _extend(cp, 1, [blk], np.array([0.5 * weight]), c=c)
        last = solve_sdp(sub, tol=inner_tol)
        if last.status not in (SdpStatus.OPTIMAL, SdpStatus.NUMERICAL_TROUBLE):
            raise SolverError(f"model step failed: {last.status.value}", status=last.status, solution=last)
        step = last.x[:m] - x
        # model gain; its size measures the distance to optimality
        gain = float((lin + weight * grad) @ step) - 0.5 * weight * float(last.x[t_idx])
        a, accepted = 1.0, False
        while a >= 1e-6:
            xn = x + a * step
            fn = f(xn)
            if fn >= fx:
                accepted = True
                break
            a *= 0.5
        if not accepted:
            status = _final_status(cp, x, last)
            break
        improvement = fn - fx
        x, fx = xn, fn
        history.append(fx)
        logger.debug("maxdet outer %d: f=%.12g step=%.3g gain=%.3e", outer, fx, a, gain)
        if improvement <= tol * max(1.0, abs(fx)) or gain <= tol * max(1.0, abs(fx)):
            status = _final_status(cp, x, last)
            break

    values = {v.name: v.unpack(x) for v in cp.variables}
    kkt = dict(last.kkt) if last is not None else {}
    obj = fx + cp.objective_const
    return SdpSolution(
        status=status,
        x=x,
        values=values,
        objective=obj,
        dual_objective=obj,
        kkt=kkt,
        iterations=len(history) - 1,
        info={"history": history, "regularized": regularized},
    )

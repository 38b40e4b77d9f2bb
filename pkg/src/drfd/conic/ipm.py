"""Infeasible-start primal-dual interior-point method for small dense SDPs.

Solves ``min c'x  s.t.  F_b(x) = F0_b + sum_i x_i F_i_b >= 0`` together with its
dual ``max -sum_b Tr(F0_b Z_b)  s.t.  sum_b Tr(F_i_b Z_b) = c_i, Z_b >= 0``.
Search directions are HKM (``dZ = mu S^-1 - Z - S^-1 dS Z``, symmetrized) with a
Mehrotra predictor-corrector; 1x1 blocks are handled as a diagonal LP block.
"""

import contextlib
import contextvars
import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .. import _kernels
from ..errors import InvalidProblem
from .problem import CompiledSdp, SdpProblem

logger = logging.getLogger(__name__)

# open text file receiving a dump of every problem solved in this context
_dump_file = contextvars.ContextVar("drfd_sdp_dump", default=None)


@contextlib.contextmanager
def dump_problems(path):
    """Write a block-matrix text dump of each problem solved inside the block to ``path``."""
    with open(path, "w") as fh:
        token = _dump_file.set(fh)
        try:
            yield
        finally:
            _dump_file.reset(token)


# list receiving (compiled problem, tol, max_iter, solution) for each solve in this context
_solve_log = contextvars.ContextVar("drfd_sdp_log", default=None)


@contextlib.contextmanager
def record_solves():
    """Collect ``(compiled, tol, max_iter, solution)`` for every solve inside the block."""
    log = []
    token = _solve_log.set(log)
    try:
        yield log
    finally:
        _solve_log.reset(token)


class SdpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_TROUBLE = "NumericalTrouble"


@dataclass
class SdpSolution:
    status: SdpStatus
    x: np.ndarray
    values: dict
    objective: float
    dual_objective: float
    kkt: dict
    iterations: int
    Z: list = field(default_factory=list, repr=False)
    z_lp: np.ndarray = field(default=None, repr=False)
    info: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status is SdpStatus.OPTIMAL

    def __getitem__(self, name):
        return self.values[name]

    def to_dict(self):
        def enc(v):
            return v.tolist() if isinstance(v, np.ndarray) else v

        return {
            "status": self.status.value,
            "objective": self.objective,
            "dual_objective": self.dual_objective,
            "kkt": dict(self.kkt),
            "iterations": self.iterations,
            "values": {k: enc(v) for k, v in self.values.items()},
        }


def _block_diag(mats, offsets):
    n = offsets[-1]
    out = np.zeros((n, n))
    for A, k, e in zip(mats, offsets[:-1], offsets[1:]):
        out[k:e, k:e] = A
    return out


def _inv_chol_factor(A):
    """``L^-1`` for the Cholesky factor ``L`` of ``A``; ``None`` if ``A`` is not PD."""
    if A.size == 0:
        return A
    try:
        return np.linalg.inv(np.linalg.cholesky(A))
    except np.linalg.LinAlgError:
        return None


def _max_step_factored(Li, dA):
    """:func:`_max_step` given ``L^-1`` of the current point (``None``: not PD)."""
    if Li is None:
        return 0.0
    if dA.size == 0:
        return np.inf
    lam = np.linalg.eigvalsh(Li @ dA @ Li.T)[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lp(s, ds):
    neg = ds < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-s[neg] / ds[neg]))


def _sym(A):
    return 0.5 * (A + A.T)


def _inv_spd(S):
    try:
        Li = np.linalg.inv(np.linalg.cholesky(S))
        return Li.T @ Li
    except np.linalg.LinAlgError:
        return np.linalg.pinv(S)


def _solve_schur(H, rhs):
    try:
        c = sla.cho_factor(H, lower=True, check_finite=False)
        return sla.cho_solve(c, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    ridge = 1e-14 * max(np.trace(H), 1.0)
    try:
        c = sla.cho_factor(H + ridge * np.eye(H.shape[0]), lower=True, check_finite=False)
        return sla.cho_solve(c, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(H, rhs, rcond=None)[0]


def solve_sdp(problem, tol=1e-8, max_iter=150):
    """Solve an :class:`SdpProblem` (or an already compiled one).

    Returns an :class:`SdpSolution`; the status is ``Optimal`` only when the
    relative primal residual, dual residual and duality gap are all below
    ``tol``. Identical inputs give bit-identical outputs.
    """
    fh = _dump_file.get()
    if fh is not None and isinstance(problem, SdpProblem):
        problem.dump(fh)
    cp = problem.compile() if isinstance(problem, SdpProblem) else problem
    if not isinstance(cp, CompiledSdp):
        raise InvalidProblem("expected an SdpProblem")
    if not tol > 0:
        raise InvalidProblem("tol must be positive")

    c = cp.c
    m = c.size
    blocks = cp.blocks
    g0, G = cp.g0, cp.G
    p = g0.size
    N = sum(b[1] for b in blocks) + p
    offsets = np.concatenate([[0], np.cumsum([b[1] for b in blocks])]).astype(int).tolist()
    flat = [Fa.reshape(Fa.shape[0], -1) for *_, Fa in blocks]
    grids = [np.ix_(idx, idx) for _, _, _, idx, _ in blocks]

    normc = np.linalg.norm(c)
    normF0 = np.sqrt(sum(np.sum(b[2] ** 2) for b in blocks) + np.sum(g0 ** 2))

    # starting point, after SDPT3's heuristics
    S, Z = [], []
    for _, d, F0, idx, Fa in blocks:
        fn = np.sqrt(np.sum(Fa ** 2, axis=(1, 2))) if idx.size else np.zeros(0)
        ratio = np.max((1.0 + np.abs(c[idx])) / (1.0 + fn)) if idx.size else 1.0
        zeta = max(10.0, np.sqrt(d), np.sqrt(d) * ratio)
        eta = max(10.0, np.sqrt(d), np.max(fn, initial=0.0), np.linalg.norm(F0))
        S.append(eta * np.eye(d))
        Z.append(zeta * np.eye(d))
    if p:
        gn = np.abs(G).max(axis=1)
        s_lp = np.full(p, max(10.0, np.max(gn, initial=0.0), np.abs(g0).max(initial=0.0)))
        z_lp = np.full(p, max(10.0, np.max((1.0 + np.abs(c).max()) / (1.0 + gn))))
    else:
        s_lp = np.zeros(0)
        z_lp = np.zeros(0)
    x = np.zeros(m)

    status = SdpStatus.NUMERICAL_TROUBLE
    best = None
    stall = 0
    it = 0
    kkt = {}
    for it in range(max_iter + 1):
        # residuals
        Fx, gx = cp.evaluate(x)
        Rp = [F - Sb for F, Sb in zip(Fx, S)]
        rp = gx - s_lp
        AZ = np.zeros(m)
        for (_, d, F0, idx, Fa), Fl, Zb in zip(blocks, flat, Z):
            if idx.size:
                AZ[idx] += Fl @ Zb.ravel()
        if p:
            AZ += G.T @ z_lp
        rd = c - AZ
        pobj = float(c @ x)
        dobj = -float(sum(np.sum(b[2] * Zb) for b, Zb in zip(blocks, Z)) + g0 @ z_lp)
        comp = float(sum(np.sum(Sb * Zb) for Sb, Zb in zip(S, Z)) + s_lp @ z_lp)
        mu = comp / N
        relp = np.sqrt(sum(np.sum(r ** 2) for r in Rp) + np.sum(rp ** 2)) / (1.0 + normF0)
        reld = np.linalg.norm(rd) / (1.0 + normc)
        denom = 1.0 + abs(pobj) + abs(dobj)
        relgap = max(abs(pobj - dobj), abs(comp)) / denom
        kkt = {"primal_residual": float(relp), "dual_residual": float(reld), "duality_gap": float(relgap)}
        score = max(relp, reld, relgap)
        if best is None or score < best[0]:
            best = (score, x.copy(), [z.copy() for z in Z], z_lp.copy(), dict(kkt), pobj, dobj, it)
        if score <= tol:
            status = SdpStatus.OPTIMAL
            break
        # infeasibility certificates
        if it > 5:
            if relp > tol and dobj > 0 and np.linalg.norm(AZ) < 1e-9 * dobj and dobj > 1e8 * (1.0 + normc):
                status = SdpStatus.INFEASIBLE
                break
            if reld > tol and pobj < 0:
                Ax = [F - b[2] for F, b in zip(Fx, blocks)]
                worst = max([-min(np.linalg.eigvalsh(A)[0], 0.0) for A in Ax] + [max(-np.min(gx - g0, initial=0.0), 0.0)])
                if -pobj > 1e8 * (1.0 + normF0) and worst < 1e-9 * -pobj:
                    status = SdpStatus.UNBOUNDED
                    break
        if it == max_iter:
            break

        # one factorization of the block-diagonal S (and Z) serves all blocks
        LiS = _inv_chol_factor(_block_diag(S, offsets))
        LiZ = _inv_chol_factor(_block_diag(Z, offsets))
        if LiS is None:
            Sinv = [_inv_spd(Sb) for Sb in S]
        else:
            Sfull = LiS.T @ LiS
            Sinv = [Sfull[k:e, k:e] for k, e in zip(offsets[:-1], offsets[1:])]
        H = np.zeros((m, m))
        for (_, d, F0, idx, Fa), grid, Si, Zb in zip(blocks, grids, Sinv, Z):
            if idx.size:
                H[grid] += _kernels.schur_block(Fa, Si, Zb)
        if p:
            H += G.T @ ((z_lp / s_lp)[:, None] * G)
        H = 0.5 * (H + H.T)
        base = [-Zb - Si @ R @ Zb for Si, Zb, R in zip(Sinv, Z, Rp)]

        def direction(sigma, corr, corr_lp):
            rhs = -rd.copy()
            Ks = []
            for (_, d, F0, idx, Fa), Fl, Si, B0, Cb in zip(blocks, flat, Sinv, base, corr):
                K = sigma * mu * Si + B0
                if Cb is not None:
                    K = K - Si @ Cb
                Ks.append(K)
                if idx.size:
                    rhs[idx] += Fl @ _sym(K).ravel()
            if p:
                k_lp = (sigma * mu - s_lp * z_lp - z_lp * rp - corr_lp) / s_lp
                rhs += G.T @ k_lp
            dx = _solve_schur(H, rhs)
            dS, dZ = [], []
            for (_, d, F0, idx, Fa), Fl, Si, Zb, R, K in zip(blocks, flat, Sinv, Z, Rp, Ks):
                Adx = (dx[idx] @ Fl).reshape(d, d) if idx.size else np.zeros((d, d))
                dS.append(R + Adx)
                # K already carries the -S^-1 Rp Z part of -S^-1 dS Z
                dZ.append(_sym(K - Si @ Adx @ Zb))
            if p:
                ds = rp + G @ dx
                dz = k_lp - (z_lp / s_lp) * (G @ dx)
            else:
                ds = dz = np.zeros(0)
            return dx, dS, dZ, ds, dz

        def steps(dS, dZ, ds, dz):
            ap = min(_max_step_factored(LiS, _block_diag(dS, offsets)), _max_step_lp(s_lp, ds))
            ad = min(_max_step_factored(LiZ, _block_diag(dZ, offsets)), _max_step_lp(z_lp, dz))
            return ap, ad

        # predictor
        none = [None] * len(blocks)
        dx, dS, dZ, ds, dz = direction(0.0, none, np.zeros(p))
        ap, ad = steps(dS, dZ, ds, dz)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = (sum(np.sum((Sb + ap * a) * (Zb + ad * b)) for Sb, a, Zb, b in zip(S, dS, Z, dZ))
                  + (s_lp + ap * ds) @ (z_lp + ad * dz)) / N
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        # corrector
        corr = [a @ b for a, b in zip(dS, dZ)]
        dx, dS, dZ, ds, dz = direction(sigma, corr, ds * dz)
        ap, ad = steps(dS, dZ, ds, dz)
        gamma = 0.9 if score > 1e-4 else 0.98
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)

        if max(ap, ad) < 1e-10:
            stall += 1
            if stall >= 3:
                break
        else:
            stall = 0
        x = x + ap * dx
        S = [Sb + ap * a for Sb, a in zip(S, dS)]
        s_lp = s_lp + ap * ds
        Z = [Zb + ad * b for Zb, b in zip(Z, dZ)]
        z_lp = z_lp + ad * dz

    if status is SdpStatus.NUMERICAL_TROUBLE and best is not None:
        _, x, Z, z_lp, kkt, pobj, dobj, _ = best
        logger.debug("sdp solve stopped without convergence after %d iterations: %s", it, kkt)

    sign = -1.0 if cp.sense == "max" else 1.0
    values = {v.name: v.unpack(x) for v in cp.variables}
    sol = SdpSolution(
        status=status,
        x=x,
        values=values,
        objective=sign * pobj + cp.objective_const,
        dual_objective=sign * dobj + cp.objective_const,
        kkt=kkt,
        iterations=it,
        Z=Z,
        z_lp=z_lp,
    )
    log = _solve_log.get()
    if log is not None:
        log.append((cp, tol, max_iter, sol))
    return sol


def solve_sdp_relaxing(problem, tol=1e-9, fallback_tol=1e-7, max_iter=150):
    """:func:`solve_sdp` at ``tol``, re-solved at ``fallback_tol`` if that stalls.

    Degenerate instances can stall just above a very tight ``tol``; the
    tolerance actually met is recorded in ``info["tol"]``.
    """
    fh = _dump_file.get()
    if fh is not None and isinstance(problem, SdpProblem):
        problem.dump(fh)
    cp = problem.compile() if isinstance(problem, SdpProblem) else problem
    sol = solve_sdp(cp, tol=tol, max_iter=max_iter)
    if sol.status is SdpStatus.NUMERICAL_TROUBLE and tol < fallback_tol:
        logger.info("SDP stalled at tol=%.1e; re-solving at %.1e", tol, fallback_tol)
        sol = solve_sdp(cp, tol=fallback_tol, max_iter=max_iter)
        sol.info["tol"] = fallback_tol
    else:
        sol.info["tol"] = tol
    return sol


def lmi_min_eigs(problem, x):
    """Minimum eigenvalue of every block (LP rows included) at ``x``.

    Returned as a dict ``name -> (min_eig, scale)`` where ``scale`` is the
    Frobenius norm of the block value, for relative feasibility checks.
    """
    cp = problem.compile() if isinstance(problem, SdpProblem) else problem
    mats, gx = cp.evaluate(np.asarray(x, dtype=float))
    out = {}
    for (name, *_), F in zip(cp.blocks, mats):
        out[name] = (float(np.linalg.eigvalsh(F)[0]), float(max(np.linalg.norm(F), 1.0)))
    for name, g in zip(cp.lp_names, gx):
        out[name] = (float(g), float(max(abs(g), 1.0)))
    return out

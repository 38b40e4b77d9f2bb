"""Residual-generator synthesis with a certified worst-case false-alarm rate.

A design is a matrix ``P`` applied to the residual ``v = W xi + V f``; an
alarm is raised when ``||P v||^2 > 1``. Every design here comes with a
certificate that ``sup P{xi' W'P'PW xi > 1} <= epsilon`` over the ambiguity
set, and maximizes one of two detectability metrics:

* ``rho1`` = ``||P V||_F^2``
* ``rho2`` = ``log pdet(V'P'PV)``

Unbounded supports have closed-form optima (a rank-one design for ``rho1``, a
scaled GLRT projector for ``rho2``). Bounded supports are handled by SDPs in
``Pbar = P'P`` solved over a grid of linearization radii ``tau0``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds as _bounds
from .ambiguity import INF, SupportSet
from .bounds import (
    BoundResult,
    Branch,
    Whitening,
    chebyshev_bound,
    corner_block,
    default_tau0,
    gauss_bound,
    improvement_factor,
    support_blocks,
)
from .conic import SdpProblem, SdpStatus, embed, maxdet_iterate, solve_sdp_relaxing
from .errors import (
    DegenerateFaultDirection,
    DesignFailed,
    DrfdError,
    InvalidInput,
    SingularResidualCovariance,
    SolverError,
)
from .linalg import compact_svd, gen_eig_largest, pinv_psd, psd_sqrt, psd_sqrt_inv

logger = logging.getLogger(__name__)


class Scheme(str, enum.Enum):
    DR_U = "DR-U"
    DR_U_A = "DR-U-a"
    DR_B = "DR-B"
    DR_B_A = "DR-B-a"


METRICS = ("rho1", "rho2")

# default number of log-spaced tau0 points (the anchor point is added on top)
DEFAULT_GRID = 14


@dataclass
class DesignResult:
    P: np.ndarray
    objective: float
    certified_far: BoundResult
    scheme: Scheme
    metric: str
    epsilon: float
    tau0: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "P": self.P.tolist(),
            "objective": self.objective,
            "certified_far": self.certified_far.to_dict(),
            "scheme": self.scheme.value,
            "metric": self.metric,
            "epsilon": self.epsilon,
            "tau0": self.tau0,
            "diagnostics": self.diagnostics,
        }


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _inputs(W, V, amb, epsilon):
    W = np.atleast_2d(np.asarray(W, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if W.shape[1] != amb.n:
        raise InvalidInput(f"W has {W.shape[1]} columns, ambiguity set has dimension {amb.n}")
    if V.shape[0] != W.shape[0]:
        raise InvalidInput("W and V must have the same number of rows")
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(V))):
        raise InvalidInput("W and V must be finite")
    epsilon = float(epsilon)
    if not 0.0 < epsilon <= 1.0:
        raise InvalidInput("epsilon must lie in (0, 1]")
    Sbar = W @ amb.S0 @ W.T
    Sbar = 0.5 * (Sbar + Sbar.T)
    w = np.linalg.eigvalsh(Sbar)
    if w[0] <= 1e-12 * max(w[-1], 1e-300):
        raise SingularResidualCovariance("W S0 W' is singular")
    if not np.any(V):
        raise DegenerateFaultDirection("V is zero")
    return W, V, epsilon, Sbar


def _scale_sq(alpha, gamma2, epsilon):
    """Value of ``Tr(M S0)`` at which the unbounded-support bound equals ``epsilon``."""
    if math.isinf(alpha):
        return epsilon / gamma2
    if epsilon <= alpha / (alpha + 2.0):
        return epsilon / (gamma2 * improvement_factor(alpha))
    if epsilon >= 1.0:
        raise InvalidInput("epsilon = 1 makes the large-deviation design unbounded")
    # the large branch is driven by Tr(M S0_alpha) = (alpha + 2) / alpha Tr(M S0)
    log_k = math.log(alpha / ((alpha + 2.0) * gamma2)) - (2.0 / alpha) * math.log1p(-epsilon)
    if log_k > 700.0:
        raise InvalidInput(f"design scale overflows for alpha={alpha:g}, epsilon={epsilon:g}")
    return math.exp(log_k)


def unbounded_bound(M, amb):
    if amb.unimodal:
        return gauss_bound(M, amb)
    return chebyshev_bound(M, amb)


def rho1(P, V):
    return float(np.sum((np.atleast_2d(P) @ V) ** 2))


def rho2(P, V):
    """``log pdet(V'P'PV)`` restricted to the row space of ``V``."""
    svd = compact_svd(V)
    X = np.atleast_2d(P) @ V @ svd.U2
    G = X.T @ X
    sign, val = np.linalg.slogdet(0.5 * (G + G.T))
    return float(val) if sign > 0 else -math.inf


def metric_value(metric, P, V):
    if metric == "rho1":
        return rho1(P, V)
    if metric == "rho2":
        return rho2(P, V)
    raise InvalidInput(f"unknown metric {metric!r}")


# ---------------------------------------------------------------------------
# closed forms (unbounded support)
# ---------------------------------------------------------------------------

def frobenius_design(W, V, amb, epsilon):
    """Rank-one optimum of ``rho1`` for unbounded support."""
    W, V, epsilon, Sbar = _inputs(W, V, amb, epsilon)
    omega, p = gen_eig_largest(V @ V.T, Sbar)
    v = V.T @ p
    nv = float(np.linalg.norm(v))
    if nv <= 1e-12 * max(np.abs(V).max(), 1.0):
        raise DegenerateFaultDirection("the leading fault direction is annihilated by V'")
    k = _scale_sq(amb.alpha, amb.gamma2, epsilon)
    P = math.sqrt(omega * k) * p[None, :] / nv
    M = W.T @ P.T @ P @ W
    scheme = Scheme.DR_U_A if amb.unimodal else Scheme.DR_U
    return DesignResult(
        P=P,
        objective=rho1(P, V),
        certified_far=unbounded_bound(M, amb),
        scheme=scheme,
        metric="rho1",
        epsilon=epsilon,
        diagnostics={"omega1": omega, "scale_sq": omega * k},
    )


def glrt_projector(W, V, S0):
    """``Sbar^-1/2 V (V' Sbar^-1 V)^+ V' Sbar^-1`` with ``Sbar = W S0 W'``."""
    Sbar = W @ S0 @ W.T
    half, ihalf = psd_sqrt_inv(0.5 * (Sbar + Sbar.T))
    Sinv = ihalf @ ihalf
    G = V.T @ Sinv @ V
    return ihalf @ V @ pinv_psd(0.5 * (G + G.T)) @ V.T @ Sinv


def glrt_design(W, V, amb, epsilon):
    """Scaled GLRT projector, the closed-form optimum of ``rho2``."""
    W, V, epsilon, Sbar = _inputs(W, V, amb, epsilon)
    m_f = compact_svd(V).rank
    PG = glrt_projector(W, V, amb.S0)
    k = _scale_sq(amb.alpha, amb.gamma2, epsilon)
    # Tr(PG Sbar PG') equals m_f in exact arithmetic; use the computed value
    spread = float(np.sum((PG @ psd_sqrt(Sbar)) ** 2))
    P = math.sqrt(k / spread) * PG
    M = W.T @ P.T @ P @ W
    scheme = Scheme.DR_U_A if amb.unimodal else Scheme.DR_U
    return DesignResult(
        P=P,
        objective=rho2(P, V),
        certified_far=unbounded_bound(M, amb),
        scheme=scheme,
        metric="rho2",
        epsilon=epsilon,
        diagnostics={"m_f": m_f, "scale_sq": k / spread},
    )


def closed_form_design(W, V, amb, epsilon, metric="rho1"):
    if metric == "rho1":
        return frobenius_design(W, V, amb, epsilon)
    if metric == "rho2":
        return glrt_design(W, V, amb, epsilon)
    raise InvalidInput(f"unknown metric {metric!r}")


# ---------------------------------------------------------------------------
# bounded support
# ---------------------------------------------------------------------------

def _design_problem(Wt, Vt, Phis, gamma2, alpha, tau0, epsilon, metric, U2):
    """Design SDP in doubly whitened coordinates.

    ``Wt = Sbar^-1/2 W S0^1/2`` and ``Vt = Sbar^-1/2 V``; the decision
    variable is ``Pt = Sbar^1/2 Pbar Sbar^1/2`` so the noise seen through
    ``W`` has identity covariance.
    """
    nr, n = Wt.shape
    prob = SdpProblem()
    Pt = prob.symmetric("Pt", nr, psd=True)
    Q = prob.symmetric("Q", n, psd=True)
    q = prob.vector("q", n)
    q0 = prob.scalar("q0")
    eta = prob.scalar("eta", nonneg=True)
    beta = prob.vector("beta", len(Phis), nonneg=True) if Phis else None
    beta_s = prob.vector("beta_s", len(Phis), nonneg=True) if Phis else None
    spread = 1.0 if math.isinf(alpha) else (alpha + 2.0) / alpha

    budget = prob.geq("far-budget")
    budget.add(eta, lambda v: [[epsilon * v]])
    budget.add(Q, lambda v: [[-gamma2 * spread * np.trace(v)]])
    budget.add(q0, lambda v: [[-v]])

    if math.isinf(alpha):
        # eta plays the role of 1 / (S-procedure multiplier of the region)
        d = n + 1
        lmi = prob.lmi(d, "tail")
        lmi.add(Q, lambda v: embed(d, {(0, 0): v}))
        lmi.add(Pt, lambda v: embed(d, {(0, 0): -Wt.T @ v @ Wt}))
        lmi.add(q, lambda v: embed(d, {(0, n): v[:, None]}))
        lmi.add(q0, lambda v: embed(d, {(n, n): v}))
        lmi.add(eta, lambda v: embed(d, {(n, n): -v}))
        lmi.add_const(embed(d, {(n, n): 1.0}))
    else:
        d = n + 2
        corner = corner_block(alpha, tau0)
        lmi = prob.lmi(d, "tail")
        lmi.add(Q, lambda v: embed(d, {(0, 0): v}))
        lmi.add(Pt, lambda v: embed(d, {(0, 0): -Wt.T @ v @ Wt}))
        lmi.add(q, lambda v: embed(d, {(0, n): v[:, None]}))
        lmi.add(q0, lambda v: embed(d, {(n, n): v}))
        lmi.add(eta, lambda v: embed(d, {(n, n): v * (corner - np.array([[1.0, 0.0], [0.0, 0.0]]))}))
        lmi.add_const(embed(d, {(n + 1, n + 1): 1.0}))
    if Phis:
        lmi.add(beta, lambda v: _bounds._support_sum(Phis, v, d))

    nonneg = prob.lmi(n + 1, "nonneg")
    nonneg.add(Q, lambda v: embed(n + 1, {(0, 0): v}))
    nonneg.add(q, lambda v: embed(n + 1, {(0, n): v[:, None]}))
    nonneg.add(q0, lambda v: embed(n + 1, {(n, n): v}))
    if Phis:
        nonneg.add(beta_s, lambda v: _bounds._support_sum(Phis, v, n + 1))

    logdet = None
    if metric == "rho1":
        VVt = Vt @ Vt.T
        prob.maximize(Pt, lambda v: float(np.sum(v * VVt)))
    else:
        # orthonormal columns: same maximizer, only a constant shift in log det
        B, _ = np.linalg.qr(Vt @ U2)
        logdet = prob.lmi(B.shape[1], "logdet")
        logdet.add(Pt, lambda v: B.T @ v @ B)
    return prob, logdet


def _warm_start(prob, Pt, Wt, Phis, gamma2, alpha, tau0, epsilon, tol, shrink=(1.0, 0.9, 0.5)):
    """Feasible point of the design SDP built from a closed-form design.

    The bound SDP for ``Wt' Pt Wt`` is solved and its certificate divided by
    the region multiplier, which is the change of variables behind the design
    program. ``Pt`` is shrunk until the certified bound is below ``epsilon``.
    Returns ``None`` when no usable certificate is found.
    """
    for f in shrink:
        Mw = f * (Wt.T @ Pt @ Wt)
        try:
            sol = solve_sdp_relaxing(_bounds.bound_sdp(0.5 * (Mw + Mw.T), gamma2, Phis, alpha, tau0), tol=tol)
        except DrfdError:
            return None
        if sol.status is not SdpStatus.OPTIMAL or sol["eta"] <= 1e-9:
            continue
        if sol.objective > epsilon * (1.0 - 1e-6):
            continue
        inv = 1.0 / sol["eta"]
        vals = {"Pt": f * Pt, "eta": inv}
        for name in ("Q", "q", "q0", "beta", "beta_s"):
            if name in sol.values:
                vals[name] = sol[name] * inv
        x = np.zeros(prob.compile().m)
        for var in prob.variables:
            x[var.slice] = var.pack(vals[var.name])
        return x
    return None


def _extract_factor(Pbar):
    """``P`` with ``P'P = Pbar``: Cholesky when well conditioned, else PSD root."""
    Pbar = 0.5 * (Pbar + Pbar.T)
    w = np.linalg.eigvalsh(Pbar)
    if w[0] > 1e-10 * max(w[-1], 1e-300):
        try:
            L = np.linalg.cholesky(Pbar)
            return L.T.copy(), "cholesky"
        except np.linalg.LinAlgError:
            pass
    return psd_sqrt(_clip_psd(Pbar)), "psd-sqrt"


def _clip_psd(A):
    w, U = np.linalg.eigh(0.5 * (A + A.T))
    return (U * np.clip(w, 0.0, None)) @ U.T


def tau0_grid(anchor, n_points=DEFAULT_GRID, spread=4.0):
    """Log-spaced radii over ``[max(1, anchor / spread), anchor * spread]`` plus ``anchor``."""
    lo = max(1.0, anchor / spread)
    hi = max(anchor * spread, lo * 1.0001)
    grid = set(np.geomspace(lo, hi, int(n_points)).tolist())
    grid.add(float(anchor))
    return sorted(grid)


def _certify(P, W, amb, tau0, epsilon, max_shrink=8):
    """Bound for ``P``; shrinks ``P`` slightly if solver tolerance overshoots ``epsilon``."""
    shrink = 1.0
    for _ in range(max_shrink):
        cert = worst_case_far(P, W, amb, tau0=tau0)
        if cert.value <= epsilon:
            return P, cert, shrink
        f = math.sqrt(max(min(epsilon / cert.value, 1.0 - 1e-9), 0.5))
        P = P * f
        shrink *= f
    raise DesignFailed("could not certify the design within epsilon", {"certified": cert.value})


def bounded_design(W, V, amb, epsilon, metric="rho1", tau0_grid_points=None, n_grid=DEFAULT_GRID, tol=1e-9):
    """SDP design for a bounded support.

    With ``amb.alpha`` finite the unimodal program is solved at each ``tau0``
    of the grid (default: log-spaced around the radius suggested by the
    closed-form design, which itself is always feasible there); the best
    objective wins, ties going to the lowest grid index. With ``alpha = inf``
    a single moment-only program is solved.
    """
    if not amb.bounded:
        raise InvalidInput("bounded_design needs a bounded support")
    if metric not in METRICS:
        raise InvalidInput(f"unknown metric {metric!r}")
    W, V, epsilon, Sbar = _inputs(W, V, amb, epsilon)
    if epsilon >= 1.0:
        raise InvalidInput("epsilon must be < 1 for bounded designs")
    alpha = amb.alpha
    wh = Whitening(amb)
    Sb_h, Sb_ih = psd_sqrt_inv(Sbar)
    Wt = Sb_ih @ W @ wh.R
    Vt = Sb_ih @ V
    U2 = compact_svd(V).U2
    Phis = support_blocks(wh.support)
    scheme = Scheme.DR_B if math.isinf(alpha) else Scheme.DR_B_A

    seed = closed_form_design(W, V, amb.replace(support=SupportSet()), epsilon, metric)
    Pt_seed = Sb_h @ seed.P.T @ seed.P @ Sb_h
    if math.isinf(alpha):
        grid = [None]
    elif tau0_grid_points is not None:
        grid = sorted(float(t) for t in tau0_grid_points)
    else:
        anchor = default_tau0(W.T @ seed.P.T @ seed.P @ W, amb)
        grid = tau0_grid(anchor, n_grid)

    points = []
    best = None
    for k, tau0 in enumerate(grid):
        prob, logdet = _design_problem(Wt, Vt, Phis, amb.gamma2, alpha, tau0, epsilon, metric, U2)
        try:
            if metric == "rho1":
                sol = solve_sdp_relaxing(prob, tol=tol)
            else:
                x0 = _warm_start(prob, Pt_seed, Wt, Phis, amb.gamma2, alpha, tau0, epsilon, tol)
                sol = maxdet_iterate(prob, logdet, tol=1e-10, x0=x0, inner_tol=tol)
        except DrfdError as exc:
            points.append({"tau0": tau0, "status": "error", "message": str(exc)})
            continue
        entry = {"tau0": tau0, "status": sol.status.value, "objective": sol.objective, "kkt": sol.kkt}
        points.append(entry)
        if sol.status is not SdpStatus.OPTIMAL:
            continue
        if best is None or sol.objective > best[1].objective + 1e-9 * max(1.0, abs(best[1].objective)):
            best = (tau0, sol)
    if best is None:
        raise DesignFailed("no tau0 grid point produced a solution", {"points": points})

    tau0, sol = best
    Pbar = Sb_ih @ sol["Pt"] @ Sb_ih
    P, how = _extract_factor(Pbar)
    P, cert, shrink = _certify(P, W, amb, tau0, epsilon)
    return DesignResult(
        P=P,
        objective=metric_value(metric, P, V),
        certified_far=cert,
        scheme=scheme,
        metric=metric,
        epsilon=epsilon,
        tau0=tau0,
        diagnostics={
            "grid": points,
            "factor": how,
            "shrink": shrink,
            "sdp_objective": sol.objective,
        },
    )


def design_for_scheme(W, V, amb, epsilon, scheme, metric="rho1", **kw):
    """Dispatch on a scheme tag; the ambiguity set is adapted to the scheme.

    ``DR-U`` drops support and unimodality, ``DR-U-a`` drops the support,
    ``DR-B`` drops unimodality and ``DR-B-a`` uses everything.
    """
    scheme = Scheme(scheme)
    if scheme in (Scheme.DR_U, Scheme.DR_U_A):
        amb_s = amb.replace(support=SupportSet(), alpha=INF if scheme is Scheme.DR_U else amb.alpha)
        if scheme is Scheme.DR_U_A and not amb.unimodal:
            raise InvalidInput("DR-U-a needs a finite alpha")
        return closed_form_design(W, V, amb_s, epsilon, metric)
    if scheme is Scheme.DR_B_A and not amb.unimodal:
        raise InvalidInput("DR-B-a needs a finite alpha")
    amb_s = amb if scheme is Scheme.DR_B_A else amb.replace(alpha=INF)
    return bounded_design(W, V, amb_s, epsilon, metric, **kw)


# ---------------------------------------------------------------------------
# thresholds and certification
# ---------------------------------------------------------------------------

def _closed_threshold(M, amb, epsilon):
    if amb.unimodal:
        a = amb.alpha
        if epsilon <= a / (a + 2.0):
            return improvement_factor(a) * amb.gamma2 * float(np.sum(M * amb.S0)) / epsilon
        T = amb.gamma2 * float(np.sum(M * amb.S0)) * (a + 2.0) / a
        return T * (1.0 - epsilon) ** (2.0 / a)
    return amb.gamma2 * float(np.sum(M * amb.S0)) / epsilon


def _threshold_problem(Mw, Phis, gamma2, alpha, tau0, epsilon):
    """Largest ``lam`` such that ``{xi' (lam M) xi <= 1}`` has tail <= epsilon."""
    n = Mw.shape[0]
    prob = SdpProblem()
    lam = prob.scalar("lam", nonneg=True)
    Q = prob.symmetric("Q", n, psd=True)
    q = prob.vector("q", n)
    q0 = prob.scalar("q0")
    eta = prob.scalar("eta", nonneg=True)
    beta = prob.vector("beta", len(Phis), nonneg=True) if Phis else None
    beta_s = prob.vector("beta_s", len(Phis), nonneg=True) if Phis else None
    spread = 1.0 if math.isinf(alpha) else (alpha + 2.0) / alpha
    budget = prob.geq("far-budget")
    budget.add(eta, lambda v: [[epsilon * v]])
    budget.add(Q, lambda v: [[-gamma2 * spread * np.trace(v)]])
    budget.add(q0, lambda v: [[-v]])
    if math.isinf(alpha):
        d = n + 1
        lmi = prob.lmi(d, "tail")
        lmi.add(eta, lambda v: embed(d, {(n, n): -v}))
        lmi.add_const(embed(d, {(n, n): 1.0}))
    else:
        d = n + 2
        corner = corner_block(alpha, tau0)
        lmi = prob.lmi(d, "tail")
        lmi.add(eta, lambda v: embed(d, {(n, n): v * (corner - np.array([[1.0, 0.0], [0.0, 0.0]]))}))
        lmi.add_const(embed(d, {(n + 1, n + 1): 1.0}))
    lmi.add(Q, lambda v: embed(d, {(0, 0): v}))
    lmi.add(lam, lambda v: embed(d, {(0, 0): -v * Mw}))
    lmi.add(q, lambda v: embed(d, {(0, n): v[:, None]}))
    lmi.add(q0, lambda v: embed(d, {(n, n): v}))
    if Phis:
        lmi.add(beta, lambda v: _bounds._support_sum(Phis, v, d))
    nonneg = prob.lmi(n + 1, "nonneg")
    nonneg.add(Q, lambda v: embed(n + 1, {(0, 0): v}))
    nonneg.add(q, lambda v: embed(n + 1, {(0, n): v[:, None]}))
    nonneg.add(q0, lambda v: embed(n + 1, {(n, n): v}))
    if Phis:
        nonneg.add(beta_s, lambda v: _bounds._support_sum(Phis, v, n + 1))
    prob.maximize(lam, lambda v: v)
    return prob


def safe_threshold(M, amb, epsilon, tau0=None, tol=1e-9):
    """Smallest certified alarm threshold ``J`` for the index ``xi' M xi``.

    Returns ``(J, certificate)`` where the certificate is the worst-case tail
    bound of ``{xi' M xi > J}``. Unbounded supports use the inverted closed
    form; bounded supports solve an SDP whose value scales linearly with ``M``.
    """
    M = _bounds._region(M, amb.n)
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise InvalidInput("epsilon must lie in (0, 1)")
    if not np.any(M):
        return 0.0, BoundResult(0.0, Branch.SMALL, method="threshold")
    J0 = _closed_threshold(M, amb, epsilon)
    if not amb.bounded:
        return J0, unbounded_bound(M / J0, amb)
    wh = Whitening(amb)
    Mn = wh.region(M) / J0
    alpha = amb.alpha
    if not math.isinf(alpha) and tau0 is None:
        tau0 = default_tau0(M / J0, amb)
    prob = _threshold_problem(Mn, support_blocks(wh.support), amb.gamma2, alpha, tau0, epsilon)
    sol = solve_sdp_relaxing(prob, tol=tol)
    if sol.status is not SdpStatus.OPTIMAL:
        raise SolverError(f"threshold SDP not solved: {sol.status.value}", status=sol.status, solution=sol)
    lam = sol.objective
    if not lam > 0:
        raise SolverError("threshold SDP returned a nonpositive scale", status=sol.status, solution=sol)
    J = J0 / lam
    cert = _bounded_bound(M / J, amb, tau0)
    if cert.value > epsilon:
        # solver tolerance: nudge J up until the certificate holds
        for _ in range(8):
            J *= 1.0 + max(cert.value - epsilon, 1e-12) / epsilon
            cert = _bounded_bound(M / J, amb, tau0)
            if cert.value <= epsilon:
                break
    return J, cert


def _bounded_bound(M, amb, tau0):
    if amb.unimodal:
        return _bounds.bounded_gauss_bound(M, amb, tau0=tau0)
    return _bounds.bounded_chebyshev_bound(M, amb)


def worst_case_far(P, W, amb, tau0=None):
    """Certified ``sup P{||P W xi||^2 > 1}`` using every bound that applies.

    Bounded supports take the smaller of the support SDP (at ``tau0``,
    default radius if omitted) and the closed form for unbounded support.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if P.shape[1] != W.shape[0]:
        raise InvalidInput("P and W dimensions do not match")
    M = W.T @ P.T @ P @ W
    M = 0.5 * (M + M.T)
    closed = unbounded_bound(M, amb)
    if not amb.bounded:
        return closed
    try:
        sdp = _bounded_bound(M, amb, tau0)
    except SolverError as exc:
        logger.info("support bound failed (%s); using the unbounded bound", exc)
        return closed
    return sdp if sdp.value <= closed.value else closed

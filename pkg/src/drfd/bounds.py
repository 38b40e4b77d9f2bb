"""Worst-case probability that ``xi`` leaves the ellipsoid ``{xi' M xi <= 1}``.

Closed forms cover unbounded support: the moment-only (Chebyshev type) bound
``min(gamma2 Tr(M S0), 1)`` and its alpha-unimodal refinement, which improves
the small-deviation branch by the factor ``c_alpha = (2 / (alpha + 2))^(2 / alpha)``.
With a bounded support the bound is the value of a small SDP; the
alpha-unimodal version linearizes ``-||M^1/2 xi||^-alpha`` at a radius
``tau0`` and is only as good as that choice.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .ambiguity import INF, AmbiguitySet, check_alpha
from .conic import SdpProblem, SdpStatus, embed, solve_sdp_relaxing
from .errors import InvalidAlpha, InvalidBranch, InvalidInput, NotPsd, SolverError
from .linalg import as_sym, psd_sqrt_inv


class Branch(str, enum.Enum):
    SMALL = "SmallDeviation"
    LARGE = "LargeDeviation"
    SATURATED = "Saturated"


@dataclass
class BoundResult:
    value: float
    branch: Branch
    tau0_used: float | None = None
    certificate: object = None
    method: str = ""

    def to_dict(self):
        d = {
            "value": self.value,
            "branch": self.branch.value,
            "tau0": self.tau0_used,
            "method": self.method,
        }
        if self.certificate is not None:
            d["certificate"] = {
                "status": self.certificate.status.value,
                "objective": self.certificate.objective,
                "dual_objective": self.certificate.dual_objective,
                "kkt": dict(self.certificate.kkt),
                "iterations": self.certificate.iterations,
            }
        return d


def improvement_factor(alpha):
    """``c_alpha = (2 / (alpha + 2))^(2 / alpha)``; 1 for ``alpha = inf``."""
    alpha = check_alpha(alpha)
    if math.isinf(alpha):
        return 1.0
    return math.exp((2.0 / alpha) * math.log(2.0 / (alpha + 2.0)))


def _region(M, n):
    M = as_sym(M, "M")
    if M.shape != (n, n):
        raise InvalidInput(f"M has shape {M.shape}, expected {(n, n)}")
    w = np.linalg.eigvalsh(M)
    if w[0] < -1e-10 * max(w[-1], 1.0):
        raise NotPsd("M must be positive semi-definite")
    return M


def _spread(M, amb):
    """``gamma2 * Tr(M S0)``."""
    M = _region(M, amb.n)
    return amb.gamma2 * float(np.sum(M * amb.S0))


def chebyshev_bound(M, amb):
    """``min(gamma2 Tr(M S0), 1)``; alpha and the support are ignored."""
    t = _spread(M, amb)
    if t >= 1.0:
        return BoundResult(1.0, Branch.SATURATED, method="chebyshev")
    return BoundResult(t, Branch.SMALL, method="chebyshev")


def _gauss_value(t, alpha):
    """Gauss bound as a function of ``t = gamma2 Tr(M S0)``; returns (value, branch)."""
    c = improvement_factor(alpha)
    if c * t <= alpha / (alpha + 2.0):
        return c * t, Branch.SMALL
    return 1.0 - (t * (alpha + 2.0) / alpha) ** (-alpha / 2.0), Branch.LARGE


def gauss_bound(M, amb, alpha=None):
    """alpha-unimodal bound for unbounded support (``alpha`` overrides ``amb.alpha``)."""
    alpha = check_alpha(amb.alpha if alpha is None else alpha)
    if math.isinf(alpha):
        raise InvalidAlpha("gauss_bound needs a finite alpha; use chebyshev_bound")
    value, branch = _gauss_value(_spread(M, amb), alpha)
    return BoundResult(min(max(value, 0.0), 1.0), branch, method="gauss")


def _alpha_spread(M, amb, alpha):
    """``gamma2 Tr(M S0_alpha)`` with ``S0_alpha = (alpha + 2) / alpha S0``."""
    return _spread(M, amb) * (alpha + 2.0) / alpha


def gauss_bound_tau(M, amb, tau0, alpha=None):
    """Value of the bound linearized at radius ``tau0 >= 1`` (unbounded support)."""
    alpha = _require_finite(amb, alpha)
    tau0 = float(tau0)
    if not tau0 >= 1.0:
        raise InvalidInput("tau0 must be >= 1")
    T = _alpha_spread(M, amb, alpha)
    return BoundResult(*_tau_value(T, alpha, tau0), tau0_used=tau0, method="gauss-tau")


def _tau_value(T, alpha, tau0):
    a = tau0 ** (-alpha)
    b = alpha * tau0 ** (-alpha - 1.0)
    rootT = math.sqrt(T)
    if (alpha + 1.0) * a <= 1.0 + 0.5 * b * rootT:
        value = b * rootT - (alpha + 1.0) * a + 1.0
        branch = Branch.LARGE
    else:
        den = (alpha + 1.0) * a - 1.0
        if den <= 0:
            raise InvalidBranch("inconsistent case selection in the tau0 relaxation")
        value = b * b * T / (4.0 * den)
        branch = Branch.SMALL
    if value >= 1.0:
        return 1.0, Branch.SATURATED
    return max(value, 0.0), branch


def _require_finite(amb, alpha):
    alpha = check_alpha(amb.alpha if alpha is None else alpha)
    if math.isinf(alpha):
        raise InvalidAlpha("a finite alpha is required")
    return alpha


def hypercube_gauss_bound(kappa, alpha, n=1):
    """Gauss bound for ``P{|xi| > kappa sigma}`` type events of a scalar; ``n`` is informational."""
    kappa = float(kappa)
    if not kappa > 0:
        raise InvalidInput("kappa must be positive")
    alpha = check_alpha(alpha)
    if math.isinf(alpha):
        return min(1.0 / kappa ** 2, 1.0)
    c = improvement_factor(alpha)
    if kappa > math.sqrt(c * (alpha + 2.0) / alpha):
        return c / kappa ** 2
    return 1.0 - (alpha / (alpha + 2.0)) ** (alpha / 2.0) * kappa ** alpha


def default_tau0(M, amb, alpha=None):
    """``max(1 / sqrt(c_alpha), sqrt(gamma2 Tr(M S0_alpha)))``."""
    alpha = check_alpha(amb.alpha if alpha is None else alpha)
    if math.isinf(alpha):
        return max(1.0, math.sqrt(_spread(M, amb)))
    return max(1.0 / math.sqrt(improvement_factor(alpha)), math.sqrt(_alpha_spread(M, amb, alpha)))


# ---------------------------------------------------------------------------
# Bounded support
# ---------------------------------------------------------------------------

def support_blocks(support):
    """Quadratic forms ``[xi; 1]' Phi_j [xi; 1] = (xi - a)' Theta (xi - a) - 1``."""
    out = []
    for a, Theta in support.ellipsoids:
        Ta = Theta @ a
        n = a.size
        Phi = np.empty((n + 1, n + 1))
        Phi[:n, :n] = Theta
        Phi[:n, n] = -Ta
        Phi[n, :n] = -Ta
        Phi[n, n] = a @ Ta - 1.0
        out.append(Phi)
    return out


class Whitening:
    """Coordinates ``zeta = S0^-1/2 xi`` in which the second moment is the identity."""

    def __init__(self, amb):
        self.R, self.Rinv = psd_sqrt_inv(amb.S0)
        self.support = amb.support.transformed(self.R)

    def region(self, M):
        return self.R @ M @ self.R


def corner_block(alpha, tau0):
    """Constant part contributed by the linearization at ``tau0`` (lower-right 2x2)."""
    s = tau0 ** (-alpha)
    return s * np.array([[alpha + 1.0, -alpha / (2.0 * tau0)], [-alpha / (2.0 * tau0), 0.0]])


def _add_nonneg_support(prob, Phis, name):
    if not Phis:
        return None
    return prob.vector(name, len(Phis), nonneg=True)


def _support_sum(Phis, b, dim):
    """``sum_j b_j Phi_j`` padded to ``dim``."""
    n1 = Phis[0].shape[0]
    out = np.zeros((dim, dim))
    out[:n1, :n1] = np.tensordot(b, np.stack(Phis), axes=1)
    return out


def bound_sdp(Mw, gamma2, Phis, alpha, tau0):
    """Bounded-support SDP in whitened coordinates (``S0 = I``).

    For finite ``alpha`` this is the linearized unimodal program; for
    ``alpha = inf`` the plain S-procedure program for the moment-only set.
    """
    n = Mw.shape[0]
    prob = SdpProblem()
    Q = prob.symmetric("Q", n, psd=True)
    q = prob.vector("q", n)
    q0 = prob.scalar("q0")
    eta = prob.scalar("eta", nonneg=True)
    beta = _add_nonneg_support(prob, Phis, "beta")
    beta_s = _add_nonneg_support(prob, Phis, "beta_s")
    scale = 1.0 if math.isinf(alpha) else (alpha + 2.0) / alpha

    if math.isinf(alpha):
        lmi = prob.lmi(n + 1, "tail")
        lmi.add(Q, lambda v: embed(n + 1, {(0, 0): v}))
        lmi.add(eta, lambda v: embed(n + 1, {(0, 0): -v * Mw, (n, n): v}))
        lmi.add(q, lambda v: embed(n + 1, {(0, n): v[:, None]}))
        lmi.add(q0, lambda v: embed(n + 1, {(n, n): v}))
        lmi.add_const(embed(n + 1, {(n, n): -1.0}))
        if Phis:
            lmi.add(beta, lambda v: _support_sum(Phis, v, n + 1))
    else:
        d = n + 2
        lmi = prob.lmi(d, "tail")
        lmi.add(Q, lambda v: embed(d, {(0, 0): v}))
        lmi.add(eta, lambda v: embed(d, {(0, 0): -v * Mw, (n + 1, n + 1): v}))
        lmi.add(q, lambda v: embed(d, {(0, n): v[:, None]}))
        lmi.add(q0, lambda v: embed(d, {(n, n): v}))
        lmi.add_const(embed(d, {(n, n): corner_block(alpha, tau0) - np.array([[1.0, 0.0], [0.0, 0.0]])}))
        if Phis:
            lmi.add(beta, lambda v: _support_sum(Phis, v, d))

    nonneg = prob.lmi(n + 1, "nonneg")
    nonneg.add(Q, lambda v: embed(n + 1, {(0, 0): v}))
    nonneg.add(q, lambda v: embed(n + 1, {(0, n): v[:, None]}))
    nonneg.add(q0, lambda v: embed(n + 1, {(n, n): v}))
    if Phis:
        nonneg.add(beta_s, lambda v: _support_sum(Phis, v, n + 1))
    prob.minimize(Q, lambda v: gamma2 * scale * np.trace(v), q0, lambda v: v)
    return prob


def support_max_quadratic(Mw, Phis, tol=1e-9):
    """Certified upper bound on ``max zeta' Mw zeta`` over the support.

    Solves the S-procedure program ``min t`` s.t. ``[[-Mw, 0], [0, t]] +
    sum beta_j Phi_j >= 0`` and then recomputes the smallest valid ``t`` for
    the returned multipliers exactly, so the value does not inherit solver
    slack. Returns ``inf`` when no certificate is found.
    """
    n = Mw.shape[0]
    prob = SdpProblem()
    t = prob.scalar("t")
    beta = prob.vector("beta", len(Phis), nonneg=True)
    lmi = prob.lmi(n + 1, "contain")
    lmi.add(t, lambda v: embed(n + 1, {(n, n): v}))
    lmi.add(beta, lambda v: _support_sum(Phis, v, n + 1))
    lmi.add_const(embed(n + 1, {(0, 0): -Mw}))
    prob.minimize(t, lambda v: v)
    sol = solve_sdp_relaxing(prob, tol=tol)
    if sol.status is not SdpStatus.OPTIMAL:
        return math.inf
    S = _support_sum(Phis, np.maximum(sol["beta"], 0.0), n + 1)
    A = S[:n, :n] - Mw
    w, U = np.linalg.eigh(0.5 * (A + A.T))
    if w[0] <= 1e-14 * max(abs(w[-1]), 1.0):
        return math.inf
    b = U.T @ S[:n, n]
    return float(np.sum(b * b / w) - S[n, n])


def _contained(Mw, Phis):
    """True when the whole support lies in ``{zeta' Mw zeta <= 1}``."""
    return bool(Phis) and support_max_quadratic(Mw, Phis) <= 1.0


def _solve_bound(prob, tol):
    sol = solve_sdp_relaxing(prob, tol=tol)
    if sol.status is not SdpStatus.OPTIMAL:
        raise SolverError(f"bound SDP not solved: {sol.status.value}", status=sol.status, solution=sol)
    return sol


def _clamped(value, sol, tau0, method):
    if value >= 1.0:
        return BoundResult(1.0, Branch.SATURATED, tau0, sol, method)
    return BoundResult(max(value, 0.0), Branch.SMALL, tau0, sol, method)


def bounded_gauss_bound(M, amb, tau0=None, tol=1e-9):
    """SDP bound for the alpha-unimodal set with bounded support.

    ``tau0`` defaults to :func:`default_tau0`, for which the value never
    exceeds :func:`gauss_bound`. The branch is ``Saturated`` when the SDP
    value reaches 1 and ``SmallDeviation`` otherwise.
    """
    if not amb.bounded:
        raise InvalidInput("bounded_gauss_bound needs a bounded support")
    alpha = _require_finite(amb, None)
    M = _region(M, amb.n)
    tau0 = default_tau0(M, amb) if tau0 is None else float(tau0)
    if not tau0 > 0:
        raise InvalidInput("tau0 must be positive")
    if not np.any(M):
        return BoundResult(0.0, Branch.SMALL, tau0, None, "bounded-gauss")
    wh = Whitening(amb)
    Mw, Phis = wh.region(M), support_blocks(wh.support)
    if _contained(Mw, Phis):
        return BoundResult(0.0, Branch.SMALL, tau0, None, "support-containment")
    prob = bound_sdp(Mw, amb.gamma2, Phis, alpha, tau0)
    sol = _solve_bound(prob, tol)
    return _clamped(sol.objective, sol, tau0, "bounded-gauss")


def bounded_chebyshev_bound(M, amb, tol=1e-9):
    """SDP bound for the moment-only set with bounded support (alpha ignored)."""
    if not amb.bounded:
        raise InvalidInput("bounded_chebyshev_bound needs a bounded support")
    M = _region(M, amb.n)
    if not np.any(M):
        return BoundResult(0.0, Branch.SMALL, None, None, "bounded-chebyshev")
    wh = Whitening(amb)
    Mw, Phis = wh.region(M), support_blocks(wh.support)
    if _contained(Mw, Phis):
        return BoundResult(0.0, Branch.SMALL, None, None, "support-containment")
    prob = bound_sdp(Mw, amb.gamma2, Phis, INF, None)
    sol = _solve_bound(prob, tol)
    return _clamped(sol.objective, sol, None, "bounded-chebyshev")

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import drfd.design as dsg
from drfd.ambiguity import INF, AmbiguitySet, SupportSet
from drfd.bounds import gauss_bound, improvement_factor
from drfd.conic import SdpStatus
from drfd.errors import DegenerateFaultDirection, DesignFailed, InvalidInput, SingularResidualCovariance
from drfd.linalg import psd_sqrt_inv

from conftest import random_spd

ONE = np.array([[1.0]])


def scalar_amb(alpha=1.0, gamma2=1.0, support=None):
    return AmbiguitySet(S0=ONE, gamma2=gamma2, alpha=alpha, support=support or SupportSet())


def instance(seed, n=4, nr=3, nf=2):
    rng = np.random.default_rng(seed)
    S0 = random_spd(rng, n, 10.0)
    W = rng.standard_normal((nr, n))
    V = rng.standard_normal((nr, nf))
    return S0, W, V


def trace_spread(P, W, S0):
    return float(np.trace(W.T @ P.T @ P @ W @ S0))


def test_frobenius_scalar_examples():
    r = dsg.frobenius_design(ONE, ONE, scalar_amb(1.0), 0.1)
    assert r.diagnostics["omega1"] == pytest.approx(1.0)
    assert abs(r.P[0, 0]) == pytest.approx(math.sqrt(0.225), abs=1e-14)
    assert r.scheme is dsg.Scheme.DR_U_A
    r = dsg.frobenius_design(ONE, ONE, scalar_amb(INF), 0.1)
    assert abs(r.P[0, 0]) == pytest.approx(math.sqrt(0.1), abs=1e-14)
    assert r.scheme is dsg.Scheme.DR_U


@pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0, 9.0])
def test_frobenius_branch_continuity(alpha):
    e = alpha / (alpha + 2)
    lo = dsg.frobenius_design(ONE, ONE, scalar_amb(alpha), e * (1 - 1e-10)).objective
    hi = dsg.frobenius_design(ONE, ONE, scalar_amb(alpha), e * (1 + 1e-10)).objective
    assert hi / lo == pytest.approx(1.0, abs=1e-8)


def test_large_branch_is_feasible():
    amb = scalar_amb(2.0)
    for eps in (0.6, 0.8, 0.95):
        r = dsg.frobenius_design(ONE, ONE, amb, eps)
        assert r.certified_far.value == pytest.approx(eps, abs=1e-12)


def test_glrt_scalar_and_identity():
    r = dsg.glrt_design(ONE, ONE, scalar_amb(INF), 0.1)
    assert abs(r.P[0, 0]) == pytest.approx(math.sqrt(0.1), abs=1e-14)
    rng = np.random.default_rng(0)
    V = rng.standard_normal((3, 3))
    assert np.allclose(dsg.glrt_projector(np.eye(3), V, np.eye(3)), np.eye(3), atol=1e-12)


def test_glrt_regression_scale():
    S0, W, V = instance(2, n=5, nr=4, nf=2)
    amb = AmbiguitySet(S0=S0, gamma2=1.2, alpha=9.0)
    r = dsg.glrt_design(W, V, amb, 0.05)
    c9 = (2 / 11) ** (2 / 9)
    scale = math.sqrt(0.05 / (2 * 1.2 * c9))
    PG = dsg.glrt_projector(W, V, S0)
    assert r.diagnostics["m_f"] == 2
    assert np.allclose(r.P, scale * PG, rtol=1e-9, atol=1e-12)
    assert scale == pytest.approx(0.17443832281051194, rel=1e-12)


def test_glrt_statistic():
    # ||P_G r||^2 is the GLRT statistic r' Sbar^-1 V (V' Sbar^-1 V)^-1 V' Sbar^-1 r
    S0, W, V = instance(5)
    PG = dsg.glrt_projector(W, V, S0)
    Sbar = W @ S0 @ W.T
    Si = np.linalg.inv(Sbar)
    r = np.random.default_rng(1).standard_normal(W.shape[0])
    ref = r @ Si @ V @ np.linalg.inv(V.T @ Si @ V) @ V.T @ Si @ r
    assert float(np.sum((PG @ r) ** 2)) == pytest.approx(ref, rel=1e-10)


def test_input_errors():
    S0, W, V = instance(1)
    amb = AmbiguitySet(S0=S0)
    with pytest.raises(SingularResidualCovariance):
        dsg.frobenius_design(np.zeros_like(W), V, amb, 0.1)
    with pytest.raises(DegenerateFaultDirection):
        dsg.glrt_design(W, np.zeros_like(V), amb, 0.1)
    with pytest.raises(InvalidInput):
        dsg.frobenius_design(W, V, amb, 0.0)
    with pytest.raises(InvalidInput):
        dsg.frobenius_design(W[:, :2], V, amb, 0.1)
    with pytest.raises(InvalidInput):
        dsg.closed_form_design(W, V, amb, 0.1, metric="rho3")
    with pytest.raises(InvalidInput):
        dsg.design_for_scheme(W, V, amb, 0.1, "DR-U-a")


def test_worst_case_far_examples():
    S0, W, V = instance(3)
    amb = AmbiguitySet(S0=S0, gamma2=1.3, alpha=2.0)
    assert dsg.worst_case_far(np.zeros((1, W.shape[0])), W, amb).value == 0.0
    r = dsg.frobenius_design(W, V, amb, 0.05)
    base = dsg.worst_case_far(r.P, W, amb).value
    assert base == pytest.approx(0.05, abs=1e-9)
    assert dsg.worst_case_far(0.5 * r.P, W, amb).value == pytest.approx(base / 4, rel=1e-12)
    with pytest.raises(InvalidInput):
        dsg.worst_case_far(r.P[:, :1], W, amb)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 60.0), st.floats(1.0, 2.0))
def test_closed_forms_saturate_small_branch(seed, alpha, gamma2):
    S0, W, V = instance(seed)
    amb = AmbiguitySet(S0=S0, gamma2=gamma2, alpha=alpha)
    eps = min(0.05, 0.9 * alpha / (alpha + 2))
    c = improvement_factor(alpha)
    for fn in (dsg.frobenius_design, dsg.glrt_design):
        r = fn(W, V, amb, eps)
        assert c * gamma2 * trace_spread(r.P, W, S0) == pytest.approx(eps, abs=1e-9)
        assert r.certified_far.value <= eps + 1e-7


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 60.0))
def test_unimodal_gain_ratio(seed, alpha):
    S0, W, V = instance(seed)
    amb = AmbiguitySet(S0=S0, alpha=alpha)
    eps = min(0.05, 0.9 * alpha / (alpha + 2))
    a = dsg.design_for_scheme(W, V, amb, eps, "DR-U-a").objective
    b = dsg.design_for_scheme(W, V, amb, eps, "DR-U").objective
    assert a / b == pytest.approx(1 / improvement_factor(alpha), rel=1e-9)


def test_alpha_limits():
    S0, W, V = instance(6)
    eps = 0.05
    ref = dsg.frobenius_design(W, V, AmbiguitySet(S0=S0), eps).P
    big = dsg.frobenius_design(W, V, AmbiguitySet(S0=S0, alpha=1e8), eps).P
    assert np.abs(big - ref).max() <= 1e-6
    refg = dsg.glrt_design(W, V, AmbiguitySet(S0=S0), eps).P
    bigg = dsg.glrt_design(W, V, AmbiguitySet(S0=S0, alpha=1e8), eps).P
    assert np.abs(bigg - refg).max() <= 1e-6
    tiny = dsg.frobenius_design(ONE, ONE, scalar_amb(1e-6), 1e-4)
    assert abs(tiny.P[0, 0]) > 1e6
    assert np.isfinite(tiny.P).all()
    with pytest.raises(InvalidInput):
        dsg.frobenius_design(ONE, ONE, scalar_amb(1e-6), 0.1)


def test_direction_invariant_to_fault_scale():
    S0, W, V = instance(7)
    amb = AmbiguitySet(S0=S0, alpha=3.0)
    a = dsg.frobenius_design(W, V, amb, 0.05).P
    b = dsg.frobenius_design(W, 17.0 * V, amb, 0.05).P
    assert np.allclose(a / np.linalg.norm(a), b / np.linalg.norm(b), atol=1e-9)
    da, db = a @ V, b @ V
    assert np.allclose(da / np.linalg.norm(da), db / np.linalg.norm(db), atol=1e-9)


# -- bounded support -------------------------------------------------------

def huge_box_amb(S0, alpha, factor=1e4):
    return AmbiguitySet(S0=S0, alpha=alpha, support=SupportSet.box(factor * np.sqrt(np.diag(S0))))


def test_bounded_huge_box_rho1():
    S0, W, V = instance(4, n=3, nr=2, nf=1)
    amb = huge_box_amb(S0, 3.0)
    r = dsg.bounded_design(W, V, amb, 0.05)
    closed = dsg.frobenius_design(W, V, amb.replace(support=SupportSet()), 0.05)
    assert r.objective >= closed.objective - 1e-4
    assert r.certified_far.value <= 0.05 + 1e-7
    assert r.scheme is dsg.Scheme.DR_B_A
    assert len(r.diagnostics["grid"]) == dsg.DEFAULT_GRID + 1


def test_bounded_huge_box_rho2_matches_glrt():
    S0, W, V = instance(4, n=3, nr=2, nf=1)
    amb = huge_box_amb(S0, 3.0)
    r = dsg.bounded_design(W, V, amb, 0.05, metric="rho2")
    closed = dsg.glrt_design(W, V, amb.replace(support=SupportSet()), 0.05)
    assert abs(r.objective - closed.objective) <= 1e-4


def test_bounded_tight_support_regression():
    S0, W, V = instance(1, n=3, nr=2, nf=1)
    rng = np.random.default_rng(1)
    S0 = rng.standard_normal((3, 3))
    S0 = S0 @ S0.T / 3 + 0.5 * np.eye(3)
    W = rng.standard_normal((2, 3))
    V = rng.standard_normal((2, 1))
    amb = AmbiguitySet(S0=S0, alpha=3.0, support=SupportSet.box(1.5 * np.sqrt(np.diag(S0))))
    small = dsg.bounded_design(W, V, amb, 1e-3)
    assert small.objective == pytest.approx(1.369718774533427, rel=1e-5)
    assert small.certified_far.value <= 1e-3
    # the support keeps the design away from the vanishing unbounded one
    unb = dsg.frobenius_design(W, V, amb.replace(support=SupportSet()), 1e-3)
    assert small.objective > 50 * unb.objective


def test_bounded_moment_only_and_ordering():
    S0, W, V = instance(9, n=3, nr=2, nf=1)
    amb = AmbiguitySet(S0=S0, alpha=2.0, support=SupportSet.box(2.0 * np.sqrt(np.diag(S0))))
    eps = 0.05
    obj = {s: dsg.design_for_scheme(W, V, amb, eps, s).objective for s in dsg.Scheme}
    assert obj["DR-B-a"] >= max(obj["DR-U-a"], obj["DR-B"]) - 1e-6
    assert obj["DR-U-a"] >= obj["DR-U"]
    assert obj["DR-B"] >= obj["DR-U"] - 1e-6


def test_bounded_grid_failure(monkeypatch):
    S0, W, V = instance(9, n=3, nr=2, nf=1)
    amb = AmbiguitySet(S0=S0, alpha=2.0, support=SupportSet.box(2.0 * np.sqrt(np.diag(S0))))
    real = dsg.solve_sdp_relaxing

    def capped(prob, tol=1e-9, fallback_tol=1e-7, max_iter=150):
        return real(prob, tol=tol, fallback_tol=fallback_tol, max_iter=2)

    monkeypatch.setattr(dsg, "solve_sdp_relaxing", capped)
    with pytest.raises(DesignFailed) as info:
        dsg.bounded_design(W, V, amb, 0.05, tau0_grid_points=[1.5, 2.0, 3.0])
    pts = info.value.diagnostics["points"]
    assert len(pts) == 3
    assert all(p["status"] != SdpStatus.OPTIMAL.value for p in pts)


def test_bounded_design_errors():
    S0, W, V = instance(9, n=3, nr=2, nf=1)
    with pytest.raises(InvalidInput):
        dsg.bounded_design(W, V, AmbiguitySet(S0=S0), 0.05)
    amb = huge_box_amb(S0, 2.0, 3.0)
    with pytest.raises(InvalidInput):
        dsg.bounded_design(W, V, amb, 0.05, metric="rho9")
    with pytest.raises(InvalidInput):
        dsg.bounded_design(W, V, amb, 1.0)


def test_design_json():
    S0, W, V = instance(9, n=3, nr=2, nf=1)
    d = dsg.design_for_scheme(W, V, AmbiguitySet(S0=S0, alpha=2.0), 0.05, "DR-U-a", metric="rho2").to_dict()
    assert d["scheme"] == "DR-U-a" and d["metric"] == "rho2"
    assert np.asarray(d["P"]).shape == (2, 2)


# -- thresholds ------------------------------------------------------------

def test_threshold_unbounded_closed_form():
    S0, W, V = instance(2, n=5, nr=4, nf=2)
    amb = AmbiguitySet(S0=S0, gamma2=1.2, alpha=9.0)
    PG = dsg.glrt_projector(W, V, S0)
    M = W.T @ PG.T @ PG @ W
    J, cert = dsg.safe_threshold(M, amb, 0.05)
    assert J == pytest.approx(2 * 1.2 * improvement_factor(9.0) / 0.05, rel=1e-9)
    assert cert.value == pytest.approx(0.05, rel=1e-9)
    J_inf, _ = dsg.safe_threshold(M, amb.replace(alpha=INF), 0.05)
    assert J_inf == pytest.approx(2 * 1.2 / 0.05, rel=1e-9)


def n9_instance():
    rng = np.random.default_rng(0)
    n = 9
    A = rng.standard_normal((n, n))
    S0 = A @ A.T / n + 0.5 * np.eye(n)
    W = rng.standard_normal((4, n))
    amb = AmbiguitySet(S0=S0, gamma2=1.1, alpha=9.0, support=SupportSet.box(2.5 * np.sqrt(np.diag(S0))))
    return W.T @ W / 30, amb


def test_threshold_bounded_regression_and_homogeneity():
    M, amb = n9_instance()
    J, cert = dsg.safe_threshold(M, amb, 0.05)
    assert J == pytest.approx(15.248550987989029, rel=1e-6)
    assert cert.value <= 0.05
    J3, _ = dsg.safe_threshold(3.0 * M, amb, 0.05)
    assert J3 / J == pytest.approx(3.0, rel=1e-6)
    assert J <= dsg.safe_threshold(M, amb.replace(support=SupportSet()), 0.05)[0] + 1e-9


def test_threshold_monotone_in_epsilon():
    S0, W, V = instance(8)
    M = W.T @ W
    for amb in (AmbiguitySet(S0=S0, alpha=3.0), AmbiguitySet(S0=S0),
                AmbiguitySet(S0=S0, alpha=3.0, support=SupportSet.box(3 * np.sqrt(np.diag(S0))))):
        Js = [dsg.safe_threshold(M, amb, e)[0] for e in (0.01, 0.05, 0.2, 0.6, 0.95)]
        assert all(a >= b for a, b in zip(Js, Js[1:]))
        assert Js[-1] < Js[0]


def test_threshold_errors():
    _, amb = n9_instance()
    with pytest.raises(InvalidInput):
        dsg.safe_threshold(np.eye(9), amb, 1.0)
    assert dsg.safe_threshold(np.zeros((9, 9)), amb, 0.1)[0] == 0.0

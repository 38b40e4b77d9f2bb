import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drfd.errors import InvalidConfig, InvalidInput, NotObservable
from drfd.sysmodel import (
    DEFAULT_CONFIG,
    LtiSystem,
    disturbance,
    parity_residual_model,
    simulate_lti,
    three_tank_benchmark,
    three_tank_system,
)

SMALL = dict(N_train=400, N_test=600, fault_onset=100)


def test_zero_system_output():
    sys = LtiSystem(A=np.zeros((2, 2)), C=np.eye(2), B=np.ones((2, 1)))
    y = simulate_lti(sys, u=np.zeros((5, 1)))
    assert y.shape == (5, 2) and not y.any()


def test_scalar_recursion():
    sys = LtiSystem(A=[[0.5]], C=[[1.0]], Bd=[[1.0]])
    y = simulate_lti(sys, d=np.ones((4, 1)))
    assert y[:, 0].tolist() == [0.0, 1.0, 1.5, 1.75]


def test_fault_feedthrough():
    sys = LtiSystem(A=[[0.9]], C=[[1.0]], Bf=[[0.0]], Df=[[1.0]])
    f = np.zeros((10, 1))
    f[4:] = 2.5
    y = simulate_lti(sys, f=f)
    assert np.all(y[:4] == 0) and np.all(y[4:] == 2.5)


def test_dimension_errors():
    with pytest.raises(InvalidInput):
        LtiSystem(A=np.zeros((2, 3)), C=np.eye(2))
    with pytest.raises(InvalidInput):
        LtiSystem(A=np.eye(2), C=np.eye(3))
    sys = LtiSystem(A=np.eye(2), C=np.eye(2), B=np.ones((2, 1)))
    with pytest.raises(InvalidInput):
        simulate_lti(sys, u=np.zeros((5, 2)))
    with pytest.raises(InvalidInput):
        simulate_lti(sys, u=np.zeros((3, 1)), horizon=5)


def test_system_is_immutable():
    sys = three_tank_system()
    with pytest.raises(ValueError):
        sys.A[0, 0] = 1.0
    assert (sys.nx, sys.nu, sys.ny) == (3, 2, 2) and sys.dt == 5.0
    assert sys.is_observable()


def test_parity_errors(caplog):
    unobs = LtiSystem(A=np.eye(2), C=[[1.0, 0.0]], Bd=np.eye(2))
    with pytest.raises(NotObservable):
        parity_residual_model(unobs, 3)
    full = LtiSystem(A=np.zeros((2, 2)), C=np.eye(2))
    with pytest.raises(InvalidInput):
        parity_residual_model(full, 1)
    square = LtiSystem(A=[[0.0, 1.0], [0.0, 0.0]], C=np.eye(2), Bd=np.eye(2))
    with caplog.at_level("WARNING"):
        m = parity_residual_model(square, 2)
    assert "s > n_x is recommended" in caplog.text
    assert m.n_r == 4
    with pytest.raises(InvalidInput):
        parity_residual_model(square, 3, n_r=0)


def test_three_tank_parity_dimensions():
    sys = three_tank_system()
    m = parity_residual_model(sys, 6)
    assert m.n_r == 11 and m.n == 7 * sys.nd
    G = sys.observability(6)
    assert np.linalg.norm(m.N @ G) <= 1e-9 * np.linalg.norm(G)
    r = parity_residual_model(sys, 6, n_r=9)
    assert r.n_r == 9
    assert np.allclose(r.N @ r.N.T, np.eye(9), atol=1e-12)
    with pytest.raises(InvalidInput):
        parity_residual_model(sys, 6, order="alphabetical")


def test_residual_zero_without_disturbance():
    sys = three_tank_system()
    m = parity_residual_model(sys, 6)
    rng = np.random.default_rng(0)
    for _ in range(50):
        T = 80
        u = rng.uniform(-10, 10, size=(T, sys.nu))
        y = simulate_lti(sys, u=u, x0=rng.uniform(-5, 5, sys.nx))
        v = m.residuals(y, u)
        assert np.abs(v).max() <= 1e-9 * max(1.0, np.abs(y).max())


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 40))
def test_residual_matches_design_form(seed, onset):
    sys = three_tank_system()
    m = parity_residual_model(sys, 6)
    rng = np.random.default_rng(seed)
    T = 60
    u = rng.uniform(-10, 10, size=(T, sys.nu))
    d = rng.standard_normal((T, sys.nd))
    f = np.zeros((T, sys.nf))
    f[onset:, 0] = rng.uniform(1, 50)
    y = simulate_lti(sys, u=u, d=d, f=f, x0=rng.uniform(-5, 5, sys.nx))
    assert np.abs(m.residuals(y, u) - m.predicted(d, f)).max() <= 1e-9


def test_disturbance_families():
    rng = np.random.default_rng(0)
    for fam in ("scale_mixture", "gaussian", "laplace"):
        d = disturbance(fam, 200_000, 2, np.random.default_rng(1))
        assert d.shape == (200_000, 2)
        assert np.abs(d.mean(0)).max() < 0.02
        assert np.allclose(d.std(0), d.std(0)[0], rtol=0.05)
    with pytest.raises(InvalidConfig):
        disturbance("cauchy", 10, 1, rng)


def test_benchmark_shapes_and_labels():
    b = three_tank_benchmark(SMALL)
    assert b["train"].shape == (400, 11) and b["test"].shape == (600, 11)
    assert b["labels"].sum() == 500 and b["labels"][99] == 0 and b["labels"][100] == 1


def test_benchmark_config_errors():
    with pytest.raises(InvalidConfig):
        three_tank_benchmark({"fault_onset": 10_000})
    with pytest.raises(InvalidConfig):
        three_tank_benchmark({"seeds": 1})


def test_benchmark_deterministic():
    a = three_tank_benchmark({**SMALL, "seed": 4})
    b = three_tank_benchmark({**SMALL, "seed": 4})
    c = three_tank_benchmark({**SMALL, "seed": 5})
    assert np.array_equal(a["train"], b["train"]) and np.array_equal(a["test"], b["test"])
    assert not np.array_equal(a["train"], c["train"])


def test_zero_fault_keeps_test_fault_free():
    cfg = {**SMALL, "fault_magnitude": 0.0}
    b = three_tank_benchmark(cfg)
    m = b["model"]
    # with no fault the test residual is pure disturbance response like training
    assert abs(np.trace(np.cov(b["test"].T)) / np.trace(np.cov(b["train"].T)) - 1) < 0.3
    big = three_tank_benchmark({**SMALL, "fault_magnitude": 50.0})
    assert np.array_equal(big["test"][:100], b["test"][:100])
    assert not np.array_equal(big["test"][150:], b["test"][150:])
    assert m.n_r == 11


def test_default_dataset_regression():
    b = three_tank_benchmark()
    t = b["train"]
    assert b["config"] == DEFAULT_CONFIG
    assert t.shape == (5000, 11)
    assert np.abs(t.mean(0)).max() < 0.01
    assert float(np.trace(t.T @ t / (len(t) - 1))) == pytest.approx(0.14962762022095089, rel=1e-9)
    assert float(t[0, 0]) == pytest.approx(0.04539933355469039, rel=1e-9)
    assert float(b["test"][-1, 0]) == pytest.approx(0.14845725598152554, rel=1e-9)

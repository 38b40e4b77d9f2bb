import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drfd.ambiguity import (
    INF,
    AmbiguitySet,
    SupportSet,
    bootstrap_gamma,
    box_support_from_samples,
    check_alpha,
    estimate_moments,
    from_samples,
)
from drfd.errors import DegenerateCovariance, InsufficientData, InvalidAlpha, InvalidInput, NotPsd, ZeroWidthAxis

CROSS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def test_moments_cross():
    mu, S = estimate_moments(CROSS)
    assert np.allclose(mu, 0)
    assert np.allclose(S, 2 / 3 * np.eye(2), atol=1e-15)


def test_moments_repeated_sample():
    with pytest.raises(DegenerateCovariance):
        estimate_moments(np.tile([1.0, 2.0], (10, 1)))


def test_moments_too_few():
    with pytest.raises(InsufficientData):
        estimate_moments(np.ones((2, 3)))


def test_moments_gaussian():
    X = np.random.default_rng(7).standard_normal((10_000, 3))
    _, S = estimate_moments(X)
    assert np.all(np.abs(S - np.eye(3)) < 0.1)


def test_bootstrap_clamp_on_repeated_pattern():
    X = np.tile(CROSS, (50, 1))
    g1, g2 = bootstrap_gamma(X, confidence=0.0, B=100, seed=0)
    assert g2 == 1.0
    assert g1 >= 0


def test_bootstrap_regression():
    X = np.random.default_rng(0).standard_normal((500, 3))
    g1, g2 = bootstrap_gamma(X, 0.95, 1000, seed=0)
    assert 1.0 < g2 < 2.0
    assert g1 == pytest.approx(0.01521478585172624, rel=1e-9)
    assert g2 == pytest.approx(1.1849704552514848, rel=1e-9)


def test_bootstrap_deterministic_and_confidence_limit():
    X = np.random.default_rng(3).standard_normal((200, 2))
    assert bootstrap_gamma(X, 0.9, 200, seed=4) == bootstrap_gamma(X, 0.9, 200, seed=4)
    g1_0, g2_0 = bootstrap_gamma(X, 0.0, 200, seed=4)
    g1_9, g2_9 = bootstrap_gamma(X, 0.9, 200, seed=4)
    assert g1_0 <= g1_9 and g2_0 <= g2_9
    assert g2_0 >= 1.0


def test_bootstrap_argument_checks():
    X = np.random.default_rng(3).standard_normal((50, 2))
    with pytest.raises(InvalidInput):
        bootstrap_gamma(X, 1.0, 200)
    with pytest.raises(InvalidInput):
        bootstrap_gamma(X, 0.5, 10)


def test_box_support_example():
    X = np.array([[1.0, -2.0], [-0.5, 1.0]])
    sup = box_support_from_samples(X, 1.2)
    assert len(sup) == 2
    for i, (a, Theta) in enumerate(sup.ellipsoids):
        assert np.all(a == 0)
        assert Theta[i, i] == pytest.approx(1 / [1.2, 2.4][i] ** 2)
        assert np.count_nonzero(Theta) == 1


def test_box_support_tight_and_degenerate():
    X = np.array([[1.0, -2.0], [-0.5, 1.0]])
    sup = box_support_from_samples(X, 1.0)
    assert sup.contains(X).all()
    assert sup.values(X).max() == pytest.approx(1.0)
    with pytest.raises(ZeroWidthAxis):
        box_support_from_samples(np.zeros((5, 2)))
    with pytest.raises(InvalidInput):
        box_support_from_samples(X, 0.9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.floats(1.0, 3.0))
def test_box_support_contains_samples(seed, n, inflate):
    X = np.random.default_rng(seed).standard_t(3, size=(40, n))
    assert box_support_from_samples(X, inflate).contains(X).all()


def test_ambiguity_validation():
    with pytest.raises(InvalidInput):
        AmbiguitySet(S0=np.eye(2), gamma2=0.9)
    with pytest.raises(InvalidInput):
        AmbiguitySet(S0=np.eye(2), gamma2=1.5, gamma1=2.0)
    with pytest.raises(DegenerateCovariance):
        AmbiguitySet(S0=np.diag([1.0, 0.0]))
    with pytest.raises(InvalidInput):
        AmbiguitySet(S0=np.eye(2), mu0=[1.0, 0.0])
    with pytest.raises(InvalidInput):
        AmbiguitySet(S0=np.eye(2), support=SupportSet.ball(1.0, 3))
    with pytest.raises(NotPsd):
        SupportSet(((np.zeros(2), -np.eye(2)),))


@pytest.mark.parametrize("bad", [0, -1, "abc", float("nan")])
def test_alpha_rejected(bad):
    with pytest.raises(InvalidAlpha):
        check_alpha(bad)


def test_alpha_sentinel():
    assert check_alpha("inf") == INF
    assert check_alpha(math.inf) == INF
    assert check_alpha("2.5") == 2.5


def test_json_roundtrip_infinite_alpha():
    amb = AmbiguitySet(S0=np.diag([1.0, 2.0]), gamma2=1.3, gamma1=0.2, support=SupportSet.box([1.0, 2.0]))
    text = amb.to_json()
    json.loads(text)  # strict JSON, no bare Infinity
    back = AmbiguitySet.from_json(text)
    assert back.alpha == INF and not back.unimodal
    assert np.array_equal(back.S0, amb.S0)
    assert back.gamma2 == 1.3 and back.gamma1 == 0.2
    assert len(back.support) == 2
    assert AmbiguitySet.from_json(amb.replace(alpha=3.0).to_json()).alpha == 3.0


def test_unknown_json_keys():
    with pytest.raises(InvalidInput):
        AmbiguitySet.from_dict({"S0": [[1.0]], "gamma3": 2})


def test_s0_alpha():
    amb = AmbiguitySet(S0=np.eye(2), alpha=2.0)
    assert np.allclose(amb.S0_alpha, 2 * np.eye(2))


def test_from_samples_centers():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((300, 2)) + [5.0, -1.0]
    amb, mu = from_samples(X, alpha=2.0, B=200, inflate=1.2)
    assert np.allclose(mu, X.mean(0))
    assert amb.bounded and amb.support.contains(X - mu).all()
    assert amb.gamma2 >= 1.0

import sys
import functools

import numpy as np
import pytest


def random_spd(rng, n, cond=50.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.exp(rng.uniform(0.0, np.log(cond), n))
    return (Q * w) @ Q.T


def random_psd(rng, n, rank):
    G = rng.standard_normal((n, rank))
    return G @ G.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running (SDP sweeps, large Monte Carlo)")


@functools.lru_cache(maxsize=None)
def benchmark_case(family="scale_mixture", seed=0):
    """Default benchmark with the ambiguity set fitted to its training residuals.

    The residual is the design variable itself (W = I), the unimodality index
    is the residual dimension and the support is the 1.2-inflated box.
    """
    from drfd.ambiguity import from_samples
    from drfd.sysmodel import three_tank_benchmark

    bench = three_tank_benchmark({"disturbance_family": family, "seed": seed})
    X = bench["train"]
    amb, mu = from_samples(X, alpha=float(X.shape[1]), confidence=0.95, B=1000, seed=seed, inflate=1.2)
    W = np.eye(X.shape[1])
    return bench, amb, mu, W, bench["model"].V


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])

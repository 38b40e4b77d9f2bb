"""Discrete-time LTI plants, parity-space residuals and a three-tank benchmark.

The plant is

    x(k+1) = A x(k) + B u(k) + Bd d(k) + Bf f(k)
    y(k)   = C x(k) + D u(k) + Dd d(k) + Df f(k)

Windows are stacked oldest first, ``y_s(k) = [y(k-s); ...; y(k)]``. A parity
basis ``N`` spans the left null space of the extended observability matrix, so
``v(k) = N (y_s(k) - H_u u_s(k)) = W d_s(k) + V f_s(k)`` regardless of the
state and the inputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import _kernels
from .errors import InvalidConfig, InvalidInput, NoParityVectors, NotObservable

logger = logging.getLogger(__name__)


def _mat(a, rows=None, cols=None, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1) if rows is not None and a.size == rows else a.reshape(1, -1)
    if rows is not None and a.shape[0] != rows:
        raise InvalidInput(f"{name} has {a.shape[0]} rows, expected {rows}")
    if cols is not None and a.shape[1] != cols:
        raise InvalidInput(f"{name} has {a.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class LtiSystem:
    A: np.ndarray
    C: np.ndarray
    B: np.ndarray = None
    Bd: np.ndarray = None
    Bf: np.ndarray = None
    D: np.ndarray = None
    Dd: np.ndarray = None
    Df: np.ndarray = None
    dt: float = 1.0

    def __post_init__(self):
        A = _mat(self.A, name="A")
        nx = A.shape[0]
        if A.shape != (nx, nx):
            raise InvalidInput("A must be square")
        C = _mat(self.C, cols=nx, name="C")
        ny = C.shape[0]

        def pair(Bm, Dm, label):
            widths = [m.shape[1] for m in (np.atleast_2d(Bm) if Bm is not None else None,
                                            np.atleast_2d(Dm) if Dm is not None else None) if m is not None]
            k = widths[0] if widths else 0
            Bm = np.zeros((nx, k)) if Bm is None else _mat(Bm, rows=nx, name="B" + label)
            k = Bm.shape[1]
            Dm = np.zeros((ny, k)) if Dm is None else _mat(Dm, rows=ny, cols=k, name="D" + label)
            return Bm, Dm

        B, D = pair(self.B, self.D, "")
        Bd, Dd = pair(self.Bd, self.Dd, "d")
        Bf, Df = pair(self.Bf, self.Df, "f")
        for name, val in dict(A=A, C=C, B=B, D=D, Bd=Bd, Dd=Dd, Bf=Bf, Df=Df).items():
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def nx(self):
        return self.A.shape[0]

    @property
    def ny(self):
        return self.C.shape[0]

    @property
    def nu(self):
        return self.B.shape[1]

    @property
    def nd(self):
        return self.Bd.shape[1]

    @property
    def nf(self):
        return self.Bf.shape[1]

    def observability(self, s=None):
        s = self.nx - 1 if s is None else s
        blocks = [self.C]
        for _ in range(s):
            blocks.append(blocks[-1] @ self.A)
        return np.vstack(blocks)

    def is_observable(self):
        O = self.observability()
        return np.linalg.matrix_rank(O) == self.nx


def _seq(x, width, horizon, name):
    if width == 0:
        return np.zeros((horizon, 0))
    if x is None:
        return np.zeros((horizon, width))
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if width == 1 else x.reshape(1, -1)
    if x.shape[1] != width:
        raise InvalidInput(f"{name} has {x.shape[1]} channels, expected {width}")
    if x.shape[0] < horizon:
        raise InvalidInput(f"{name} is shorter than the horizon ({x.shape[0]} < {horizon})")
    return x[:horizon]


def simulate_lti(sys, u=None, d=None, f=None, horizon=None, x0=None, return_states=False):
    """Outputs ``y(0..horizon-1)`` of the recursion (one row per step)."""
    if horizon is None:
        lengths = [np.asarray(z).shape[0] for z in (u, d, f) if z is not None]
        if not lengths:
            raise InvalidInput("horizon is required when no sequence is given")
        horizon = min(lengths)
    horizon = int(horizon)
    U = _seq(u, sys.nu, horizon, "u")
    Dq = _seq(d, sys.nd, horizon, "d")
    F = _seq(f, sys.nf, horizon, "f")
    x0 = np.zeros(sys.nx) if x0 is None else np.asarray(x0, dtype=float).reshape(sys.nx)
    X = _kernels.lti_states(sys.A, sys.B, sys.Bd, sys.Bf, U, Dq, F, x0)
    Y = X @ sys.C.T + U @ sys.D.T + Dq @ sys.Dd.T + F @ sys.Df.T
    return (Y, X) if return_states else Y


def _toeplitz(sys, Bm, Dm, s):
    """Block lower-triangular map from ``[z(k-s); ...; z(k)]`` to ``y_s(k)``."""
    ny, k = sys.ny, Bm.shape[1]
    H = np.zeros(((s + 1) * ny, (s + 1) * k))
    markov = [Dm]
    P = Bm
    for _ in range(s):
        markov.append(sys.C @ P)
        P = sys.A @ P
    for i in range(s + 1):
        for j in range(i + 1):
            H[i * ny:(i + 1) * ny, j * k:(j + 1) * k] = markov[i - j]
    return H


@dataclass(frozen=True)
class ResidualModel:
    W: np.ndarray
    V: np.ndarray
    N: np.ndarray  # parity basis (n_r x (s+1) n_y)
    Hu: np.ndarray
    s: int
    nd: int
    nf: int
    info: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.W.shape[1]

    @property
    def n_r(self):
        return self.W.shape[0]

    def residuals(self, y, u=None):
        """``v(k)`` for ``k = s .. len(y)-1`` (rows), from outputs and inputs."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        ny = y.shape[1]
        horizon = y.shape[0]
        if horizon <= self.s:
            raise InvalidInput("need more than s output samples")
        Ys = _windows(y, self.s)
        out = Ys @ self.N.T
        if self.Hu.shape[1]:
            nu = self.Hu.shape[1] // (self.s + 1)
            U = _seq(u, nu, horizon, "u")
            out -= _windows(U, self.s) @ (self.N @ self.Hu).T
        return out

    def predicted(self, d, f=None):
        """``W d_s(k) + V f_s(k)`` for ``k = s .. len(d)-1``."""
        d = np.atleast_2d(np.asarray(d, dtype=float))
        out = _windows(d, self.s) @ self.W.T
        if f is not None and self.nf:
            f = _seq(f, self.nf, d.shape[0], "f")
            out += _windows(f, self.s) @ self.V.T
        return out


def _windows(z, s):
    """Rows ``[z(k-s), ..., z(k)]`` flattened, for ``k = s .. len(z)-1``."""
    z = np.ascontiguousarray(z)
    T, w = z.shape
    if w == 0:
        return np.zeros((T - s, 0))
    view = np.lib.stride_tricks.sliding_window_view(z, (s + 1, w))[:, 0]
    return view.reshape(T - s, (s + 1) * w)


ORDERINGS = ("disturbance", "ratio")


def parity_residual_model(sys, s, n_r=None, order="disturbance"):
    """Parity-space residual generator of order ``s``.

    With ``n_r`` smaller than the parity dimension, the basis is rotated and
    truncated: ``order="disturbance"`` keeps the directions with the largest
    disturbance gain (eigenvectors of ``W W'``), ``order="ratio"`` the largest
    fault-to-disturbance ratio (generalized eigenvectors of ``(V V', W W')``).
    """
    s = int(s)
    if order not in ORDERINGS:
        raise InvalidInput(f"unknown ordering {order!r}; choose from {ORDERINGS}")
    if s < sys.nx:
        raise InvalidInput(f"order s={s} must be at least n_x={sys.nx}")
    if s == sys.nx:
        logger.warning("parity order s equals n_x; s > n_x is recommended")
    Gamma = sys.observability(s)
    U, sv, _ = np.linalg.svd(Gamma)
    tol = max(Gamma.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0) * 1e3
    rank = int(np.sum(sv > tol))
    if rank < sys.nx:
        raise NotObservable(f"(C, A) is not observable: rank {rank} < n_x = {sys.nx}")
    N = U[:, rank:].T
    if N.shape[0] == 0:
        raise NoParityVectors("the parity space is empty")
    Hd = _toeplitz(sys, sys.Bd, sys.Dd, s)
    Hf = _toeplitz(sys, sys.Bf, sys.Df, s)
    Hu = _toeplitz(sys, sys.B, sys.D, s)
    full = N.shape[0]
    if n_r is not None and int(n_r) < full:
        n_r = int(n_r)
        if n_r < 1:
            raise InvalidInput("n_r must be positive")
        W0, V0 = N @ Hd, N @ Hf
        if order == "disturbance":
            w, E = np.linalg.eigh(W0 @ W0.T)
            E = E[:, np.argsort(-w, kind="stable")]
        else:
            w, E = sla.eigh(V0 @ V0.T, W0 @ W0.T)
            E = E[:, np.argsort(-w, kind="stable")]
            E, _ = np.linalg.qr(E)
        E = E[:, :n_r]
        # deterministic sign: largest entry positive
        E = E * np.where(E[np.argmax(np.abs(E), axis=0), np.arange(n_r)] < 0, -1.0, 1.0)
        N = E.T @ N
    return ResidualModel(
        W=N @ Hd,
        V=N @ Hf,
        N=N,
        Hu=Hu,
        s=s,
        nd=sys.nd,
        nf=sys.nf,
        info={"parity_dim": full, "n_r": N.shape[0], "order": order if N.shape[0] < full else "full"},
    )


# ---------------------------------------------------------------------------
# Synthetic three-tank benchmark
# ---------------------------------------------------------------------------

# Linearized outflow coefficients (1/s) and tank cross-section (cm^2). These
# are synthetic values of a plausible magnitude, not identified from a rig.
TANK_COEFFS = {"a13": 0.004, "a32": 0.0035, "a20": 0.005, "area": 154.0}
PROCESS_STD = 0.05  # cm per step
SENSOR_STD = 0.1  # cm
FAMILIES = ("scale_mixture", "gaussian", "laplace")

DEFAULT_CONFIG = {
    "seed": 0,
    "N_train": 5000,
    "N_test": 10000,
    "fault_onset": 200,
    "fault_magnitude": 50.0,
    "disturbance_family": "scale_mixture",
    "s": 6,
    "n_r": None,
    "order": "disturbance",
    "dt": 5.0,
}


def three_tank_system(dt=5.0):
    """Zero-order-hold discretization of the linearized three-tank network.

    States are tank levels (cm); inputs are pump flows into tanks 1 and 2
    (cm^3/s); outputs are levels 1 and 3. The five disturbance channels are
    process noise on the three levels and noise on the two sensors; the fault
    is a leak flow (cm^3/s) out of tank 3.
    """
    c = TANK_COEFFS
    a13, a32, a20, area = c["a13"], c["a32"], c["a20"], c["area"]
    Ac = np.array([
        [-a13, 0.0, a13],
        [0.0, -a32 - a20, a32],
        [a13, a32, -a13 - a32],
    ])
    Bc = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]) / area
    Fc = np.array([[0.0], [0.0], [-1.0]]) / area
    nx = 3
    aug = np.zeros((nx + 3, nx + 3))
    aug[:nx, :nx] = Ac
    aug[:nx, nx:nx + 2] = Bc
    aug[:nx, nx + 2:] = Fc
    E = sla.expm(aug * dt)
    A = E[:nx, :nx]
    B = E[:nx, nx:nx + 2]
    Bf = E[:nx, nx + 2:]
    C = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    Bd = np.hstack([PROCESS_STD * np.eye(3), np.zeros((3, 2))])
    Dd = np.hstack([np.zeros((2, 3)), SENSOR_STD * np.eye(2)])
    return LtiSystem(A=A, B=B, Bd=Bd, Bf=Bf, C=C, Dd=Dd, dt=dt)


def disturbance(family, T, nd, rng):
    """Unit-variance, zero-mean disturbance sequence; every family is a Gaussian scale mixture."""
    if family == "gaussian":
        return rng.standard_normal((T, nd))
    if family == "laplace":
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), size=(T, nd))
    if family == "scale_mixture":
        # two-regime Markov chain: calm (p = 0.8) and turbulent (3x std, p = 0.2)
        leave = np.array([0.01, 0.04])
        scales = np.array([1.0, 3.0]) / np.sqrt(0.8 + 0.2 * 9.0)
        state = np.empty(T, dtype=np.int64)
        st = int(rng.random() < 0.2)
        flips = rng.random(T)
        for k in range(T):
            state[k] = st
            if flips[k] < leave[st]:
                st = 1 - st
        return scales[state][:, None] * rng.standard_normal((T, nd))
    raise InvalidConfig(f"unknown disturbance family {family!r}; choose from {FAMILIES}")


def _check_config(config):
    cfg = dict(DEFAULT_CONFIG)
    unknown = set(config or {}) - set(cfg)
    if unknown:
        raise InvalidConfig(f"unknown benchmark keys: {sorted(unknown)}")
    cfg.update(config or {})
    for key in ("N_train", "N_test", "s"):
        if int(cfg[key]) < 1:
            raise InvalidConfig(f"{key} must be positive")
    if not 0 <= int(cfg["fault_onset"]) < int(cfg["N_test"]):
        raise InvalidConfig("fault_onset must lie in [0, N_test)")
    if cfg["disturbance_family"] not in FAMILIES:
        raise InvalidConfig(f"unknown disturbance family {cfg['disturbance_family']!r}")
    return cfg


def _run(sys, model, T, fault, rng_d, rng_u, family):
    s = model.s
    d = disturbance(family, T + s, sys.nd, rng_d)
    # operating point plus slow piecewise-constant excitation; the residual ignores it
    u = 30.0 + np.repeat(rng_u.uniform(-5.0, 5.0, size=((T + s) // 50 + 1, sys.nu)), 50, axis=0)[:T + s]
    x0 = rng_u.uniform(-2.0, 2.0, size=sys.nx)
    f = np.zeros((T + s, sys.nf)) if fault is None else fault
    y = simulate_lti(sys, u=u, d=d, f=f, horizon=T + s, x0=x0)
    return model.residuals(y, u), d, f


def three_tank_benchmark(config=None):
    """Simulate a fault-free training set and a labelled test sequence.

    Returns a dict with ``system``, ``model``, ``train`` (N_train x n_r
    fault-free residuals), ``test`` (N_test x n_r), ``labels`` (1 once the
    leak is active) and the resolved ``config``.
    """
    cfg = _check_config(config)
    sys = three_tank_system(cfg["dt"])
    model = parity_residual_model(sys, int(cfg["s"]), n_r=cfg["n_r"], order=cfg["order"])
    ss = np.random.SeedSequence(int(cfg["seed"]))
    r_train_d, r_train_u, r_test_d, r_test_u = (np.random.default_rng(c) for c in ss.spawn(4))
    family = cfg["disturbance_family"]
    N_train, N_test, onset = int(cfg["N_train"]), int(cfg["N_test"]), int(cfg["fault_onset"])
    s = model.s
    train, _, _ = _run(sys, model, N_train, None, r_train_d, r_train_u, family)
    fault = np.zeros((N_test + s, sys.nf))
    fault[s + onset:, 0] = float(cfg["fault_magnitude"])
    test, d_test, _ = _run(sys, model, N_test, fault, r_test_d, r_test_u, family)
    labels = (np.arange(N_test) >= onset).astype(int)
    return {
        "system": sys,
        "model": model,
        "train": train,
        "test": test,
        "labels": labels,
        "config": cfg,
    }

"""Moment/unimodality/support ambiguity sets and their estimation from data.

An :class:`AmbiguitySet` collects every distribution of the noise vector
``xi`` with zero mean, second moment bounded by ``gamma2 * S0``, support inside
an intersection of (possibly degenerate) ellipsoids and, when ``alpha`` is
finite, alpha-unimodal about the origin. The mean is fixed to zero across the
package: data are centered when they are ingested. ``gamma1`` is validated and
stored but no bound consumes it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateCovariance,
    InsufficientData,
    InvalidAlpha,
    InvalidInput,
    NotPsd,
    ZeroWidthAxis,
)
from .linalg import as_sym, psd_sqrt_inv

INF = math.inf


def check_alpha(alpha):
    """Return ``alpha`` as a float, accepting ``inf`` / ``"inf"`` as the sentinel."""
    if isinstance(alpha, str):
        if alpha.strip().lower() in ("inf", "infinity", "+inf"):
            return INF
        try:
            alpha = float(alpha)
        except ValueError:
            raise InvalidAlpha(f"alpha must be positive or 'inf', got {alpha!r}") from None
    alpha = float(alpha)
    if math.isnan(alpha) or alpha <= 0:
        raise InvalidAlpha(f"alpha must be positive or 'inf', got {alpha!r}")
    return alpha


@dataclass(frozen=True)
class SupportSet:
    """Intersection of ellipsoids ``(xi - a)' Theta (xi - a) <= 1``.

    A rank-deficient ``Theta`` is allowed and encodes a slab. An empty list
    means the support is all of R^n.
    """

    ellipsoids: tuple = ()

    def __post_init__(self):
        checked = []
        dim = None
        for a, Theta in self.ellipsoids:
            a = np.atleast_1d(np.asarray(a, dtype=float)).copy()
            Theta = as_sym(Theta, "Theta")
            if Theta.shape[0] != a.size:
                raise InvalidInput("support ellipsoid center and shape disagree in dimension")
            if dim is not None and a.size != dim:
                raise InvalidInput("support ellipsoids have different dimensions")
            dim = a.size
            w = np.linalg.eigvalsh(Theta)
            if w[0] < -1e-12 * max(w[-1], 1.0):
                raise NotPsd("support shape matrix Theta is not PSD")
            a.setflags(write=False)
            Theta.setflags(write=False)
            checked.append((a, Theta))
        object.__setattr__(self, "ellipsoids", tuple(checked))

    @property
    def unbounded(self):
        return len(self.ellipsoids) == 0

    @property
    def dim(self):
        return self.ellipsoids[0][0].size if self.ellipsoids else None

    def __len__(self):
        return len(self.ellipsoids)

    def values(self, xi):
        """``(xi - a_j)' Theta_j (xi - a_j)`` for each ellipsoid (rows of ``xi``)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        out = np.empty((xi.shape[0], len(self.ellipsoids)))
        for j, (a, Theta) in enumerate(self.ellipsoids):
            d = xi - a
            out[:, j] = np.einsum("ij,jk,ik->i", d, Theta, d)
        return out

    def contains(self, xi, tol=1e-12):
        if self.unbounded:
            return np.ones(np.atleast_2d(xi).shape[0], dtype=bool)
        return np.all(self.values(xi) <= 1.0 + tol, axis=1)

    def transformed(self, T):
        """Support of ``T^-1 xi`` for invertible ``T``: ``a -> T^-1 a``, ``Theta -> T' Theta T``."""
        Tinv = np.linalg.inv(T)
        return SupportSet(tuple((Tinv @ a, T.T @ Theta @ T) for a, Theta in self.ellipsoids))

    @classmethod
    def ball(cls, radius, n, center=None):
        a = np.zeros(n) if center is None else center
        return cls(((a, np.eye(n) / float(radius) ** 2),))

    @classmethod
    def box(cls, half_widths):
        h = np.asarray(half_widths, dtype=float)
        if np.any(h <= 0):
            raise ZeroWidthAxis("box half-widths must be positive")
        n = h.size
        ells = []
        for i in range(n):
            Theta = np.zeros((n, n))
            Theta[i, i] = 1.0 / h[i] ** 2
            ells.append((np.zeros(n), Theta))
        return cls(tuple(ells))

    def to_list(self):
        return [{"a": a.tolist(), "Theta": Theta.tolist()} for a, Theta in self.ellipsoids]

    @classmethod
    def from_list(cls, items):
        try:
            return cls(tuple((np.asarray(e["a"], float), np.asarray(e["Theta"], float)) for e in items))
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"bad support entry: {exc}") from None


@dataclass(frozen=True)
class AmbiguitySet:
    S0: np.ndarray
    gamma2: float = 1.0
    gamma1: float = 0.0
    alpha: float = INF
    support: SupportSet = field(default_factory=SupportSet)
    mu0: np.ndarray = None

    def __post_init__(self):
        S0 = as_sym(self.S0, "S0")
        w = np.linalg.eigvalsh(S0)
        if w[0] <= 1e-12 * max(w[-1], 1e-300):
            raise DegenerateCovariance("S0 must be positive definite")
        n = S0.shape[0]
        mu0 = np.zeros(n) if self.mu0 is None else np.atleast_1d(np.asarray(self.mu0, dtype=float))
        if mu0.shape != (n,) or np.any(mu0 != 0):
            raise InvalidInput("mu0 must be the zero vector; center the data first")
        g1, g2 = float(self.gamma1), float(self.gamma2)
        if not (g1 >= 0 and math.isfinite(g1)):
            raise InvalidInput("gamma1 must be finite and nonnegative")
        if not (math.isfinite(g2) and g2 >= max(g1, 1.0)):
            raise InvalidInput(f"gamma2 must satisfy gamma2 >= max(gamma1, 1); got gamma2={g2}, gamma1={g1}")
        support = self.support if isinstance(self.support, SupportSet) else SupportSet(tuple(self.support))
        if not support.unbounded and support.dim != n:
            raise InvalidInput("support dimension does not match S0")
        S0.setflags(write=False)
        mu0.setflags(write=False)
        object.__setattr__(self, "S0", S0)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "gamma1", g1)
        object.__setattr__(self, "gamma2", g2)
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        object.__setattr__(self, "support", support)

    @property
    def n(self):
        return self.S0.shape[0]

    @property
    def bounded(self):
        return not self.support.unbounded

    @property
    def unimodal(self):
        return math.isfinite(self.alpha)

    @property
    def S0_alpha(self):
        """Second moment of the mixing measure: ``(alpha + 2) / alpha * S0``."""
        if not self.unimodal:
            return self.S0.copy()
        return (self.alpha + 2.0) / self.alpha * self.S0

    def replace(self, **changes):
        kw = dict(S0=self.S0, gamma2=self.gamma2, gamma1=self.gamma1, alpha=self.alpha, support=self.support)
        kw.update(changes)
        return AmbiguitySet(**kw)

    def to_dict(self):
        return {
            "mu0": self.mu0.tolist(),
            "S0": self.S0.tolist(),
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "alpha": "inf" if not self.unimodal else self.alpha,
            "support": self.support.to_list(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"mu0", "S0", "gamma1", "gamma2", "alpha", "support"}
        if unknown:
            raise InvalidInput(f"unknown ambiguity-set keys: {sorted(unknown)}")
        if "S0" not in d:
            raise InvalidInput("ambiguity set needs S0")
        return cls(
            S0=np.asarray(d["S0"], dtype=float),
            gamma2=d.get("gamma2", 1.0),
            gamma1=d.get("gamma1", 0.0),
            alpha=d.get("alpha", "inf"),
            support=SupportSet.from_list(d.get("support", [])),
            mu0=d.get("mu0"),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _as_samples(samples):
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise InsufficientData("need a nonempty 2-D array of samples")
    if not np.all(np.isfinite(X)):
        raise InvalidInput("samples contain non-finite entries")
    return X


def estimate_moments(samples):
    """Sample mean and ``(N - 1)``-normalized scatter about it."""
    X = _as_samples(samples)
    N, n = X.shape
    if N < n + 1:
        raise InsufficientData(f"need at least n+1 = {n + 1} samples, got {N}")
    mu = X.mean(axis=0)
    D = X - mu
    S = D.T @ D / (N - 1)
    S = 0.5 * (S + S.T)
    w = np.linalg.eigvalsh(S)
    if w[-1] <= 0 or w[0] <= 1e-10 * w[-1]:
        raise DegenerateCovariance("sample scatter is not positive definite")
    return mu, S


def bootstrap_gamma(samples, confidence=0.95, B=1000, seed=0):
    """Percentile-bootstrap radii ``(gamma1, gamma2)``.

    For each resample the mean offset statistic ``d' S0^-1 d`` and the largest
    generalized eigenvalue of ``S_b + d d'`` against ``S0`` are recorded;
    the radii are their ``confidence`` quantiles, with ``gamma2`` clamped to
    at least ``max(gamma1, 1)``.
    """
    if not 0.0 <= confidence < 1.0:
        raise InvalidInput("confidence must lie in [0, 1)")
    if int(B) < 100:
        raise InvalidInput("use at least 100 bootstrap resamples")
    X = _as_samples(samples)
    mu0, S0 = estimate_moments(X)
    N, n = X.shape
    _, Sih = psd_sqrt_inv(S0)
    Y = (X - mu0) @ Sih  # whitened: S0 becomes I
    rng = np.random.default_rng(seed)
    g1 = np.empty(int(B))
    g2 = np.empty(int(B))
    chunk = max(1, (1 << 22) // max(N * n, 1))
    for start in range(0, int(B), chunk):
        stop = min(start + chunk, int(B))
        idx = rng.integers(0, N, size=(stop - start, N))
        Yb = Y[idx]
        d = Yb.mean(axis=1)
        Dc = Yb - d[:, None, :]
        Sb = np.einsum("bki,bkj->bij", Dc, Dc) / (N - 1)
        g1[start:stop] = np.einsum("bi,bi->b", d, d)
        g2[start:stop] = np.linalg.eigvalsh(Sb + d[:, :, None] * d[:, None, :])[:, -1]
    gamma1 = float(np.quantile(g1, confidence))
    gamma2 = float(max(np.quantile(g2, confidence), gamma1, 1.0))
    return gamma1, gamma2


def box_support_from_samples(samples, inflate=1.2):
    """Box ``|xi_i| <= inflate * max_k |xi_i^(k)|`` as ``n`` rank-1 slabs."""
    if not inflate >= 1.0:
        raise InvalidInput("inflate must be >= 1")
    X = _as_samples(samples)
    top = np.abs(X).max(axis=0)
    if np.any(top == 0):
        raise ZeroWidthAxis(f"coordinates {np.flatnonzero(top == 0).tolist()} have zero width")
    return SupportSet.box(inflate * top)


def from_samples(samples, alpha=INF, confidence=0.95, B=1000, seed=0, inflate=None):
    """Center ``samples`` and build an ambiguity set from them.

    Returns ``(ambiguity_set, mean)``. With ``inflate`` set a box support is
    attached (computed on the centered data).
    """
    X = _as_samples(samples)
    mu, S0 = estimate_moments(X)
    g1, g2 = bootstrap_gamma(X, confidence=confidence, B=B, seed=seed)
    support = box_support_from_samples(X - mu, inflate) if inflate is not None else SupportSet()
    return AmbiguitySet(S0=S0, gamma2=g2, gamma1=g1, alpha=alpha, support=support), mu

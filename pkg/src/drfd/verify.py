"""Monte-Carlo checks of the bounds and designs.

Every alpha-unimodal distribution with mode 0 is a mixture of radial
distributions on segments ``[0, w]``; along a segment the position is
``lambda * w`` with ``P{lambda <= t} = t^alpha``. Finite mixtures of such
segments are therefore a convenient, exactly samplable family of members of
the ambiguity set.
"""

from __future__ import annotations

import concurrent.futures as cf
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels
from .ambiguity import check_alpha
from .errors import CalibrationFailed, InvalidDataset, InvalidInput
from .io import write_json
from .linalg import as_sym, psd_sqrt

_BLOCK = 1 << 16


@dataclass(frozen=True)
class RadialMixture:
    atoms: np.ndarray  # (k, n) segment end points
    weights: np.ndarray  # (k,)
    alpha: float

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if atoms.shape[0] != w.size:
            raise InvalidInput("one weight per atom is required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidInput("weights must be nonnegative and sum to 1")
        alpha = check_alpha(self.alpha)
        atoms.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "alpha", alpha)

    @property
    def dim(self):
        return self.atoms.shape[1]

    def segment_moment(self):
        """``sum_j p_j w_j w_j'``."""
        return (self.atoms * self.weights[:, None]).T @ self.atoms

    def covariance(self):
        """Second moment of ``xi`` (also its covariance: the atoms come in +- pairs)."""
        factor = 1.0 if math.isinf(self.alpha) else self.alpha / (self.alpha + 2.0)
        return factor * self.segment_moment()

    def sample(self, size, seed=0):
        rng = np.random.default_rng(seed)
        idx = rng.choice(self.weights.size, size=size, p=self.weights)
        return _radius(rng.random(size), self.alpha)[:, None] * self.atoms[idx]

    def tail(self, M, J):
        """Exact ``P{xi' M xi > J}``."""
        M = as_sym(M, "M")
        quad = np.einsum("ij,jk,ik->i", self.atoms, M, self.atoms)
        if J <= 0:
            return float(self.weights[quad > 0].sum()) if J == 0 else 1.0
        if math.isinf(self.alpha):
            return float(self.weights[quad > J].sum())
        hit = quad > J
        frac = 1.0 - (J / quad[hit]) ** (self.alpha / 2.0)
        return float(np.sum(self.weights[hit] * frac))


def _radius(u, alpha):
    if math.isinf(alpha):
        return np.ones_like(u)
    return u ** (1.0 / alpha)


@dataclass(frozen=True)
class McEstimate:
    value: float
    n_samples: int
    std_error: float

    @classmethod
    def from_count(cls, count, n):
        p = count / n
        return cls(float(p), int(n), math.sqrt(p * (1.0 - p) / n))

    def to_dict(self):
        return {"value": self.value, "n_samples": self.n_samples, "std_error": self.std_error}


def sample_radial(w, alpha, rng_seed=0, size=None):
    """``lambda * w`` with ``lambda = U^(1/alpha)``; ``size`` draws give rows."""
    alpha = check_alpha(alpha)
    w = np.asarray(w, dtype=float)
    rng = np.random.default_rng(rng_seed)
    if size is None:
        return _radius(rng.random(), alpha) * w
    return _radius(rng.random(size), alpha)[:, None] * w.ravel()[None, :]


def _random_directions(n, k, rng):
    U = rng.standard_normal((k, n))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def calibrated_mixture(S0, gamma2, alpha, n_atoms=None, rng_seed=0, target=None):
    """Symmetric radial mixture whose covariance equals ``target``.

    ``target`` defaults to ``gamma2 * S0`` and must satisfy ``0 <= target <=
    gamma2 * S0``. A random share of the second moment is spread over random
    directions; the remainder is filled exactly along its eigenvectors, so
    the moment match is exact up to rounding. Atoms come in +- pairs, which
    gives mean 0.
    """
    S0 = as_sym(S0, "S0")
    n = S0.shape[0]
    alpha = check_alpha(alpha)
    n_atoms = 2 * n if n_atoms is None else int(n_atoms)
    if n_atoms < 2 * n or n_atoms % 2:
        raise InvalidInput("n_atoms must be even and at least 2n")
    cap = float(gamma2) * S0
    target = cap if target is None else as_sym(target, "target")
    if target.shape != S0.shape:
        raise CalibrationFailed("target has the wrong shape")
    scale = max(np.abs(cap).max(), 1e-300)
    if np.linalg.eigvalsh(target)[0] < -1e-10 * scale:
        raise CalibrationFailed("target covariance is not PSD")
    if np.linalg.eigvalsh(cap - target)[0] < -1e-10 * scale:
        raise CalibrationFailed("target exceeds gamma2 * S0")

    spread = 1.0 if math.isinf(alpha) else (alpha + 2.0) / alpha
    G = spread * target
    pairs = n_atoms // 2
    if not np.any(G):
        return RadialMixture(np.zeros((n_atoms, n)), np.full(n_atoms, 1.0 / n_atoms), alpha)

    rng = np.random.default_rng(rng_seed)
    root = psd_sqrt(G)
    extra = pairs - n
    dirs = []
    coef = []
    if extra > 0:
        U = _random_directions(n, extra, rng)
        c = rng.dirichlet(np.ones(extra))
        part = (U * c[:, None]).T @ U
        share = rng.uniform(0.2, 0.9) / np.linalg.eigvalsh(part)[-1]
        dirs.append(U @ root)
        coef.append(share * c)
        rest = np.eye(n) - share * part
    else:
        rest = np.eye(n)
    w, E = np.linalg.eigh(0.5 * (rest + rest.T))
    w = np.clip(w, 0.0, None)
    dirs.append(E.T @ root)
    coef.append(w)
    D = np.vstack(dirs)
    c = np.concatenate(coef)
    total = c.sum()
    # sum_j c_j d_j d_j' = G; atoms sqrt(total) d_j with weights c_j / total
    atoms = math.sqrt(total) * D
    weights = c / total
    atoms = np.vstack([atoms, -atoms])
    weights = np.concatenate([weights, weights]) / 2.0
    mix = RadialMixture(atoms, weights / weights.sum(), alpha)
    err = np.abs(mix.covariance() - target).max()
    if err > 1e-6 * max(scale, 1.0):
        raise CalibrationFailed(f"moment match failed (error {err:.2e})")
    return mix


def restrict_to_support(mixture, support):
    """Pull every atom back inside a support that contains the origin.

    Shrinking an atom keeps the segment inside the (convex) support and can
    only lower the second moment, so membership in the ambiguity set is kept.
    """
    if support.unbounded:
        return mixture
    atoms = mixture.atoms.copy()
    for a, Theta in support.ellipsoids:
        if (a @ Theta @ a) > 1.0:
            raise InvalidInput("support must contain the origin")
        # largest t in [0, 1] with (t w - a)' Theta (t w - a) <= 1
        A = np.einsum("ij,jk,ik->i", atoms, Theta, atoms)
        B = atoms @ (Theta @ a)
        C = a @ Theta @ a - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(A > 0, (B + np.sqrt(np.maximum(B * B - A * C, 0.0))) / A, np.inf)
        atoms *= np.minimum(1.0, t)[:, None] * (1.0 - 1e-12)
    return RadialMixture(atoms, mixture.weights, mixture.alpha)


def _tail_block(args):
    atoms, cumw, alpha, M, J, seed_seq, size = args
    rng = np.random.default_rng(seed_seq)
    u_atom = rng.random(size)
    u_rad = rng.random(size)
    a = 1e300 if math.isinf(alpha) else alpha
    return _kernels.radial_tail_count(atoms, cumw, a, M, J, u_atom, u_rad)


def monte_carlo_tail(mixture, M, J_th=1.0, n_samples=10**6, seed=0, workers=1):
    """Empirical ``P{xi' M xi > J_th}`` with its binomial standard error.

    Samples are generated in fixed blocks with one seed stream per block, so
    the estimate does not depend on ``workers``.
    """
    n_samples = int(n_samples)
    if n_samples < 10**4:
        raise InvalidInput("n_samples must be at least 1e4")
    M = as_sym(M, "M")
    if M.shape[0] != mixture.dim:
        raise InvalidInput("M and the mixture disagree in dimension")
    cumw = np.cumsum(mixture.weights)
    cumw[-1] = 1.0
    n_blocks = -(-n_samples // _BLOCK)
    seqs = np.random.SeedSequence(seed).spawn(n_blocks)
    sizes = [min(_BLOCK, n_samples - b * _BLOCK) for b in range(n_blocks)]
    jobs = [(mixture.atoms, cumw, mixture.alpha, M, float(J_th), seqs[b], sizes[b]) for b in range(n_blocks)]
    if workers > 1:
        with cf.ThreadPoolExecutor(max_workers=workers) as ex:
            counts = list(ex.map(_tail_block, jobs))
    else:
        counts = [_tail_block(j) for j in jobs]
    return McEstimate.from_count(int(sum(counts)), n_samples)


def chebyshev_witness(s0, gamma2, m, delta=1e-12):
    """Discrete 1-D member of the moment set that attains ``min(gamma2 s0 m, 1)``.

    Returns ``(points, probs)``. Mass sits at ``+-(1 + delta) / sqrt(m)``, just
    outside the acceptance interval ``m xi^2 <= 1``, with the variance budget
    ``gamma2 s0`` used up exactly; the tail is within ``2 delta`` of the bound.
    """
    if not (s0 > 0 and gamma2 > 0 and m > 0):
        raise InvalidInput("s0, gamma2 and m must be positive")
    var = gamma2 * s0
    r = var * m
    if r >= (1.0 + delta) ** 2:
        a = math.sqrt(var)
        return np.array([-a, a]), np.array([0.5, 0.5])
    a = (1.0 + delta) / math.sqrt(m)
    p = var / (a * a)
    return np.array([-a, 0.0, a]), np.array([p / 2.0, 1.0 - p, p / 2.0])


def discrete_tail(points, probs, m, J=1.0):
    points = np.asarray(points, dtype=float)
    return float(np.sum(np.asarray(probs)[m * points**2 > J]))


def alarms(P, v, J_th=1.0):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    r = v @ P.T
    return np.einsum("ij,ij->i", r, r) > J_th


def evaluate_far_fdr(P, v, labels, J_th=1.0):
    """Alarm frequency on the fault-free (label 0) and faulty (label 1) samples."""
    labels = np.asarray(labels).ravel()
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if v.shape[0] != labels.size:
        raise InvalidDataset("one label per sample is required")
    a = alarms(P, v, J_th)
    healthy, faulty = labels == 0, labels == 1
    if not healthy.any() or not faulty.any():
        raise InvalidDataset("both fault-free and faulty samples are required")
    far = McEstimate.from_count(int(a[healthy].sum()), int(healthy.sum()))
    fdr = McEstimate.from_count(int(a[faulty].sum()), int(faulty.sum()))
    return {"FAR": far.value, "FDR": fdr.value, "far_std_error": far.std_error,
            "fdr_std_error": fdr.std_error, "n_healthy": far.n_samples, "n_faulty": fdr.n_samples}


def empirical_far(P, v, J_th=1.0):
    """Alarm frequency on fault-free data."""
    a = alarms(P, v, J_th)
    return McEstimate.from_count(int(a.sum()), a.size)


def chi2_glrt_detector(W, V, S0, epsilon):
    """GLRT projector with a chi-square threshold, i.e. assuming Gaussian noise.

    Returns ``(P, J_th)``; no distributional robustness is claimed.
    """
    from .design import glrt_projector

    P = glrt_projector(W, V, S0)
    dof = int(np.linalg.matrix_rank(np.atleast_2d(V)))
    return P, float(stats.chi2.ppf(1.0 - epsilon, dof))


def check_entry(bound, estimate, sigmas=3.0):
    """One report record: passes when ``empirical <= bound + sigmas * std_error``."""
    return {
        "bound": float(bound),
        "empirical": estimate.value,
        "std_error": estimate.std_error,
        "pass": bool(estimate.value <= bound + sigmas * estimate.std_error),
    }


def write_report(path, entries):
    write_json(path, {"checks": list(entries), "all_pass": all(e["pass"] for e in entries)})

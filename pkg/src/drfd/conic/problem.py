"""Assembly of small semidefinite programs from affine LMI blocks.

A problem is written in terms of named variables (scalars, vectors and
symmetric matrices). Each LMI block is an affine symmetric expression built by
adding constant matrices and linear maps of variables; the maps are sampled on
the variable's basis so callers can write them as ordinary numpy code::

    prob = SdpProblem()
    X = prob.symmetric("X", 2)
    prob.lmi(2).add(X, lambda v: v).add_const(-np.eye(2))   # X - I >= 0
    prob.minimize(X, np.trace)

After :meth:`SdpProblem.compile` the program has the inequality form
``min c'x  s.t.  F0_b + sum_i x_i F_i_b >= 0`` for every block ``b``; 1x1
blocks are gathered into a diagonal (LP) block.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidProblem


class Variable:
    def __init__(self, name, kind, dim, offset):
        self.name = name
        self.kind = kind
        self.dim = dim
        self.offset = offset
        if kind == "scalar":
            self.size = 1
        elif kind == "vector":
            self.size = dim
        else:
            self.size = dim * (dim + 1) // 2
        if kind == "sym":
            self._iu = np.triu_indices(dim)

    @property
    def slice(self):
        return slice(self.offset, self.offset + self.size)

    def basis(self):
        """Yield ``(k, value)`` for each basis element of the variable."""
        if self.kind == "scalar":
            yield 0, 1.0
        elif self.kind == "vector":
            for k in range(self.dim):
                e = np.zeros(self.dim)
                e[k] = 1.0
                yield k, e
        else:
            for k, (i, j) in enumerate(zip(*self._iu)):
                E = np.zeros((self.dim, self.dim))
                E[i, j] = 1.0
                E[j, i] = 1.0
                yield k, E

    def unpack(self, x):
        v = np.asarray(x[self.slice], dtype=float)
        if self.kind == "scalar":
            return float(v[0])
        if self.kind == "vector":
            return v.copy()
        S = np.zeros((self.dim, self.dim))
        S[self._iu] = v
        S.T[self._iu] = v
        return S

    def pack(self, value):
        if self.kind == "scalar":
            return np.array([float(value)])
        if self.kind == "vector":
            return np.asarray(value, dtype=float).reshape(self.dim)
        return np.asarray(value, dtype=float)[self._iu]

    def __repr__(self):
        return f"Variable({self.name!r}, {self.kind}, dim={self.dim})"


class LmiBlock:
    """Affine symmetric matrix expression required to be PSD."""

    def __init__(self, dim, name):
        self.dim = dim
        self.name = name
        self.const = np.zeros((dim, dim))
        self.terms = []  # (variable, linear map)

    def add_const(self, mat):
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        if mat.shape != (self.dim, self.dim):
            raise InvalidProblem(f"block {self.name!r}: constant has shape {mat.shape}, want {(self.dim, self.dim)}")
        self.const = self.const + mat
        return self

    def add(self, var, fn):
        self.terms.append((var, fn))
        return self


def embed(dim, blocks):
    """Place sub-matrices into a ``dim x dim`` symmetric matrix.

    ``blocks`` maps ``(row_start, col_start)`` to a 2-D array. Placements with
    ``row_start != col_start`` are mirrored; diagonal ones must be symmetric.
    """
    out = np.zeros((dim, dim))
    for (r, c), sub in blocks.items():
        sub = np.atleast_2d(np.asarray(sub, dtype=float))
        h, w = sub.shape
        out[r:r + h, c:c + w] += sub
        if r != c:
            out[c:c + w, r:r + h] += sub.T
    return out


@dataclass
class CompiledSdp:
    c: np.ndarray
    blocks: list  # (name, dim, F0, idx, Fa)
    lp_names: list
    g0: np.ndarray
    G: np.ndarray  # (p, m)
    sense: str
    objective_const: float
    variables: list = field(default_factory=list)

    @property
    def m(self):
        return self.c.size

    def evaluate(self, x):
        """Return the list of block values ``F_b(x)`` and the LP slack."""
        mats = []
        for _, dim, F0, idx, Fa in self.blocks:
            F = F0.copy()
            if idx.size:
                F += (x[idx] @ Fa.reshape(idx.size, -1)).reshape(Fa.shape[1:])
            mats.append(F)
        return mats, self.g0 + self.G @ x


class SdpProblem:
    def __init__(self):
        self.variables = []
        self.blocks = []
        self._objective = []
        self._objective_const = 0.0
        self.sense = "min"
        self._m = 0

    # -- variables ---------------------------------------------------------
    def _new(self, name, kind, dim):
        if any(v.name == name for v in self.variables):
            raise InvalidProblem(f"duplicate variable name {name!r}")
        v = Variable(name, kind, dim, self._m)
        self._m += v.size
        self.variables.append(v)
        return v

    def scalar(self, name, nonneg=False):
        v = self._new(name, "scalar", 1)
        if nonneg:
            self.lmi(1, f"{name}>=0").add(v, lambda t: np.array([[t]]))
        return v

    def vector(self, name, dim, nonneg=False):
        v = self._new(name, "vector", int(dim))
        if nonneg:
            for k in range(v.dim):
                self.lmi(1, f"{name}[{k}]>=0").add(v, lambda t, k=k: np.array([[t[k]]]))
        return v

    def symmetric(self, name, dim, psd=False):
        v = self._new(name, "sym", int(dim))
        if psd:
            self.lmi(v.dim, f"{name}>=0").add(v, lambda X: X)
        return v

    # -- constraints -------------------------------------------------------
    def lmi(self, dim, name=None):
        blk = LmiBlock(int(dim), name or f"lmi{len(self.blocks)}")
        self.blocks.append(blk)
        return blk

    def geq(self, name=None):
        """Scalar affine inequality ``expr >= 0`` (a 1x1 block)."""
        return self.lmi(1, name)

    # -- objective ---------------------------------------------------------
    def _set_objective(self, sense, terms, const):
        self.sense = sense
        self._objective = list(terms)
        self._objective_const = float(const)

    def minimize(self, *terms, const=0.0):
        """Objective given as ``var, fn, var, fn, ...`` pairs of linear maps."""
        self._set_objective("min", _pairs(terms), const)
        return self

    def maximize(self, *terms, const=0.0):
        self._set_objective("max", _pairs(terms), const)
        return self

    def var(self, name):
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    # -- compilation -------------------------------------------------------
    def affine_terms(self, blk):
        """Return ``(F0, {index: F_i})`` for one block, zero terms dropped."""
        F = {}
        for var, fn in blk.terms:
            for k, val in var.basis():
                mat = np.atleast_2d(np.asarray(fn(val), dtype=float))
                if mat.shape != (blk.dim, blk.dim):
                    raise InvalidProblem(
                        f"block {blk.name!r}: term in {var.name!r} has shape {mat.shape}, want {(blk.dim, blk.dim)}")
                if np.abs(mat - mat.T).max() > 1e-12 * max(1.0, np.abs(mat).max()):
                    raise InvalidProblem(f"block {blk.name!r}: term in {var.name!r} is not symmetric")
                i = var.offset + k
                F[i] = F.get(i, 0.0) + 0.5 * (mat + mat.T)
        F = {i: f for i, f in F.items() if np.any(f != 0.0)}
        return 0.5 * (blk.const + blk.const.T), F

    def compile(self):
        m = self._m
        if m == 0:
            raise InvalidProblem("problem has no variables")
        c = np.zeros(m)
        for var, fn in self._objective:
            for k, val in var.basis():
                c[var.offset + k] += float(fn(val))
        if self.sense == "max":
            c = -c
        blocks, lp_names, g0, G = [], [], [], []
        used = np.zeros(m, dtype=bool)
        for blk in self.blocks:
            const, F = self.affine_terms(blk)
            if blk.dim == 1:
                row = np.zeros(m)
                for i, f in F.items():
                    row[i] = f[0, 0]
                    used[i] = True
                lp_names.append(blk.name)
                g0.append(const[0, 0])
                G.append(row)
            else:
                idx = np.array(sorted(F), dtype=np.int64)
                used[idx] = True
                Fa = np.stack([F[i] for i in idx]) if idx.size else np.zeros((0, blk.dim, blk.dim))
                blocks.append((blk.name, blk.dim, const, idx, np.ascontiguousarray(Fa)))
        if not used.all():
            missing = [v.name for v in self.variables if not used[v.slice].all()]
            raise InvalidProblem(f"variables not constrained by any block: {missing}")
        return CompiledSdp(
            c=c,
            blocks=blocks,
            lp_names=lp_names,
            g0=np.array(g0, dtype=float),
            G=np.array(G, dtype=float).reshape(len(g0), m),
            sense=self.sense,
            objective_const=self._objective_const,
            variables=list(self.variables),
        )

    # -- debugging ---------------------------------------------------------
    def dump(self, path_or_file):
        """Write a human-readable block-matrix description of the problem."""
        cp = self.compile()
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w") if own else path_or_file
        try:
            fmt = lambda a: np.array2string(np.asarray(a), precision=10, max_line_width=200, threshold=10**6)
            fh.write(f"# sdp sense={self.sense} nvars={cp.m} blocks={len(cp.blocks)} scalar_rows={len(cp.lp_names)}\n")
            for v in self.variables:
                fh.write(f"var {v.name} kind={v.kind} dim={v.dim} offset={v.offset} size={v.size}\n")
            sign = -1.0 if self.sense == "max" else 1.0
            fh.write(f"objective const={self._objective_const!r}\n{fmt(sign * cp.c)}\n")
            for name, dim, F0, idx, Fa in cp.blocks:
                fh.write(f"block {name} dim={dim}\nF0 =\n{fmt(F0)}\n")
                for i, Fi in zip(idx, Fa):
                    fh.write(f"F[{i}] =\n{fmt(Fi)}\n")
            for name, g, row in zip(cp.lp_names, cp.g0, cp.G):
                nz = {int(i): float(row[i]) for i in np.flatnonzero(row)}
                fh.write(f"scalar {name}: {g!r} + {nz} >= 0\n")
        finally:
            if own:
                fh.close()


def _pairs(terms):
    if len(terms) % 2:
        raise InvalidProblem("objective terms must come in (variable, fn) pairs")
    return [(terms[i], terms[i + 1]) for i in range(0, len(terms), 2)]

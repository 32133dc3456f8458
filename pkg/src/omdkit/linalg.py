"""Sparse vectors and incrementally maintained inverses of rank-one updated matrices."""

import math

import numpy as np


class SparseVec:
    """Sparse vector: sorted (index, value) pairs, no explicit zeros."""

    __slots__ = ("indices", "values", "dim")

    def __init__(self, entries, dim):
        dim = int(dim)
        if dim < 0:
            raise ValueError("dim must be nonnegative")
        idx, vals = [], []
        last = -1
        for i, v in entries:
            i = int(i)
            v = float(v)
            if i <= last:
                raise ValueError(f"indices must be strictly increasing (got {i} after {last})")
            if i < 0 or i >= dim:
                raise ValueError(f"index {i} out of range for dim {dim}")
            last = i
            if v != 0.0:
                idx.append(i)
                vals.append(v)
        self.indices = np.asarray(idx, dtype=np.int64)
        self.values = np.asarray(vals, dtype=np.float64)
        self.dim = dim

    @classmethod
    def from_dense(cls, x):
        x = np.asarray(x, dtype=np.float64)
        vec = cls.__new__(cls)
        nz = np.nonzero(x)[0]
        vec.indices = nz.astype(np.int64)
        vec.values = x[nz].copy()
        vec.dim = int(x.shape[0])
        return vec

    def to_dense(self):
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    @property
    def nnz(self):
        return int(self.indices.shape[0])

    def dot(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: {w.shape[-1]} != {self.dim}")
        if self.indices.size == 0:
            return 0.0
        return float(w[self.indices] @ self.values)

    def scaled(self, factors):
        """New vector with per-coordinate factors applied (factors must be nonzero)."""
        factors = np.asarray(factors, dtype=np.float64)
        if factors.shape[0] != self.dim:
            raise ValueError("factor length must equal dim")
        if np.any(factors == 0.0):
            raise ValueError("factors must be nonzero")
        vec = SparseVec.__new__(SparseVec)
        vec.indices = self.indices.copy()
        vec.values = self.values * factors[self.indices]
        vec.dim = self.dim
        return vec

    def __repr__(self):
        pairs = ", ".join(f"{i}:{v}" for i, v in zip(self.indices, self.values))
        return f"SparseVec({{{pairs}}}, dim={self.dim})"


def as_dense(x, dim=None):
    """Accept SparseVec or array-like; return a float64 dense vector."""
    if isinstance(x, SparseVec):
        if dim is not None and x.dim != dim:
            raise ValueError(f"dimension mismatch: {x.dim} != {dim}")
        return x.to_dense()
    arr = np.asarray(x, dtype=np.float64)
    if dim is not None and arr.shape[-1] != dim:
        raise ValueError(f"dimension mismatch: {arr.shape[-1]} != {dim}")
    return arr


class RankOneInverse:
    """A^{-1} and ln|A| maintained under A <- A + (1/r) x x^T, with A_0 = scale * I.

    The inverse is never recomputed from scratch; each update applies the
    Sherman-Morrison formula at O(d^2) cost and bumps the log-determinant
    by ln(1 + chi/r) where chi = x^T A^{-1} x.
    """

    def __init__(self, dim, r=1.0, scale=1.0):
        if r <= 0:
            raise ValueError("r must be positive")
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.dim = int(dim)
        self.r = float(r)
        self.inv = np.eye(self.dim) / scale
        self.logdet = self.dim * math.log(scale)

    def _dense(self, x):
        return as_dense(x, self.dim)

    def apply(self, v):
        """A^{-1} v."""
        return self.inv @ self._dense(v)

    def quad_form(self, x):
        """x^T A^{-1} x; nonnegative while A stays positive definite."""
        xd = self._dense(x)
        return float(xd @ self.inv @ xd)

    def update(self, x):
        """Advance A by (1/r) x x^T; returns the pre-update quad form chi."""
        xd = self._dense(x)
        u = self.inv @ xd
        chi = float(xd @ u)
        self.inv -= np.outer(u, u) / (self.r + chi)
        self.inv = 0.5 * (self.inv + self.inv.T)
        self.logdet += math.log1p(chi / self.r)
        return chi

    def copy(self):
        other = RankOneInverse.__new__(RankOneInverse)
        other.dim = self.dim
        other.r = self.r
        other.inv = self.inv.copy()
        other.logdet = self.logdet
        return other


class DiagInverse:
    """Diagonal counterpart: tracks diag(A_t) under d_i <- d_i + x_i^2 / r."""

    def __init__(self, dim, r=1.0, scale=1.0):
        if r <= 0:
            raise ValueError("r must be positive")
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.dim = int(dim)
        self.r = float(r)
        self.diag = np.full(self.dim, float(scale))

    def apply(self, v):
        return as_dense(v, self.dim) / self.diag

    def quad_form(self, x):
        xd = as_dense(x, self.dim)
        return float(np.sum(xd * xd / self.diag))

    def update(self, x):
        xd = as_dense(x, self.dim)
        self.diag += xd * xd / self.r

    @property
    def logdet(self):
        return float(np.sum(np.log(self.diag)))

    def copy(self):
        other = DiagInverse.__new__(DiagInverse)
        other.dim = self.dim
        other.r = self.r
        other.diag = self.diag.copy()
        return other

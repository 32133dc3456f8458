"""Brute-force numeric oracles: conjugates, argmax points, gradients, dual norms, scans.

Deliberately plain (grids plus local pattern search plus random search) so
they cannot share bugs with the analytic formulas they check. Functions
passed in must accept batched (N, d) inputs and return (N,) values.
"""

from dataclasses import dataclass

import numpy as np

from .prng import Xorshift64Star

_OFFSETS = np.array([-1.0, -2.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    points_per_axis: int = 41
    dim: int = 2

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("lo must be below hi")
        if self.points_per_axis < 11:
            raise ValueError("points_per_axis must be at least 11")
        if not 1 <= self.dim <= 3:
            raise ValueError("dim must be 1, 2, or 3")

    def axis(self):
        return np.linspace(self.lo, self.hi, self.points_per_axis)

    def points(self):
        axes = np.meshgrid(*([self.axis()] * self.dim), indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=1)

    @property
    def spacing(self):
        return (self.hi - self.lo) / (self.points_per_axis - 1)


def _refine_max_batch(objective, starts, width, iters):
    """Coordinate pattern search maximizing objective (batched) around starts."""
    best = starts.copy()
    best_val = objective(best)
    w = width
    n, dim = best.shape
    for _ in range(iters):
        for j in range(dim):
            for off in _OFFSETS:
                cand = best.copy()
                cand[:, j] += off * w
                vals = objective(cand)
                better = vals > best_val
                if np.any(better):
                    best[better] = cand[better]
                    best_val[better] = vals[better]
        w *= 0.7
    return best, best_val


def numeric_argmax_batch(f, thetas, grid, refine_iters=60):
    """argmax_v <v,theta> - f(v) for each row of thetas; returns (points, values)."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    pts = grid.points()
    fvals = np.asarray(f(pts))
    if not np.isfinite(fvals).any():
        raise ValueError("function not finite anywhere on the grid")
    scores = thetas @ pts.T - fvals[None, :]
    seed = pts[np.argmax(scores, axis=1)]

    def objective(v):
        return np.einsum("ij,ij->i", thetas, v) - np.asarray(f(v))

    return _refine_max_batch(objective, seed, grid.spacing, refine_iters)


def numeric_argmax(f, theta, grid, refine_iters=60):
    pts, vals = numeric_argmax_batch(f, np.asarray(theta)[None, :], grid, refine_iters)
    return pts[0], float(vals[0])


def numeric_conjugate(f, theta, grid, refine_iters=60):
    """sup_v <v,theta> - f(v), grid-seeded then locally refined."""
    _, val = numeric_argmax(f, theta, grid, refine_iters)
    return val


def numeric_conjugate_batch(f, thetas, grid, refine_iters=40):
    _, vals = numeric_argmax_batch(f, thetas, grid, refine_iters)
    return vals


def numeric_biconjugate(f, w, grid, refine_iters=25):
    """f**(w) via a nested numeric conjugate; accurate to ~1e-4 on smooth convex f."""

    def conj(thetas):
        return numeric_conjugate_batch(f, thetas, grid, refine_iters)

    return numeric_conjugate(conj, np.asarray(w, dtype=np.float64), grid, refine_iters)


def fd_gradient(f, v, h=1e-5):
    """Central finite differences per coordinate."""
    v = np.asarray(v, dtype=np.float64)
    dim = v.shape[0]
    plus = np.tile(v, (dim, 1))
    minus = plus.copy()
    plus[np.arange(dim), np.arange(dim)] += h
    minus[np.arange(dim), np.arange(dim)] -= h
    fp = np.asarray(f(plus), dtype=np.float64)
    fm = np.asarray(f(minus), dtype=np.float64)
    if not (np.isfinite(fp).all() and np.isfinite(fm).all()):
        raise ValueError("function not finite near v")
    return (fp - fm) / (2.0 * h)


def numeric_dual_norm(primal_norm, z, samples=100_000, seed=7, refine_rounds=40):
    """sup {<u,z> : primal_norm(u) <= 1} by random search over unit-norm directions.

    primal_norm must be positively homogeneous; this is spot-checked on
    random points before the search.
    """
    z = np.asarray(z, dtype=np.float64)
    dim = z.shape[0]
    rng = Xorshift64Star(seed)
    for _ in range(10):
        v = np.array(rng.normals(dim))
        c = 0.5 + 2.0 * rng.uniform()
        nv = float(np.asarray(primal_norm(v[None, :]))[0])
        ncv = float(np.asarray(primal_norm((c * v)[None, :]))[0])
        if abs(ncv - c * nv) > 1e-9 * max(1.0, abs(ncv)):
            raise ValueError("primal norm is not positively homogeneous")
    if not z.any():
        return 0.0

    def best_of(dirs):
        norms = np.asarray(primal_norm(dirs))
        ok = norms > 0
        u = dirs[ok] / norms[ok, None]
        vals = u @ z
        i = int(np.argmax(vals))
        return u[i], float(vals[i])

    flat = np.array(rng.normals(samples * dim)).reshape(samples, dim)
    # include z itself and the coordinate directions as candidates
    extra = np.vstack([z[None, :], np.eye(dim), -np.eye(dim)])
    best_u, best_val = best_of(np.vstack([flat, extra]))
    sigma = 0.5
    for _ in range(refine_rounds):
        cand = best_u[None, :] + sigma * np.array(rng.normals(200 * dim)).reshape(200, dim)
        u, val = best_of(np.vstack([cand, best_u[None, :]]))
        if val > best_val:
            best_u, best_val = u, val
        sigma *= 0.8
    return best_val


def implicit_scan(predicate, hi, step):
    """Largest x in (0, hi] with predicate(x) true, scanned at the given resolution.

    Raises if the predicate still holds at hi (the range is too small to
    bracket the solution set). Returns 0.0 when no scanned point holds.
    """
    if hi <= 0 or step <= 0:
        raise ValueError("hi and step must be positive")
    if predicate(hi):
        raise ValueError("predicate true at hi; enlarge the scan range")
    best = 0.0
    x = step
    while x <= hi:
        if predicate(x):
            best = x
        x += step
    return best

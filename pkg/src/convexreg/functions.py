"""Executable convex functions: the squared norm, its piecewise-affine
tangent-plane approximants, and packings built from localized cosine bumps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import GridDesign, cube_cover, cube_vertices, grid_points, GeometryError

# Scale applied to each bump so that the perturbed squared norm stays convex:
# the bump's Hessian is bounded by (4*sqrt(2)*pi^2/3) * I, and the squared
# norm contributes a constant Hessian of 2 * I.
BUMP_COEFF = 3.0 / (4.0 * math.sqrt(2.0) * math.pi**2)


class FunctionError(ValueError):
    pass


class PiecewiseAffineConvex:
    """Max of affine pieces x -> max_j (w_j . x + b_j); convex by construction."""

    def __init__(self, weights, intercepts):
        W = np.atleast_2d(np.asarray(weights, dtype=float))
        b = np.asarray(intercepts, dtype=float).ravel()
        if W.shape[0] != b.size or W.shape[0] == 0:
            raise FunctionError("need a nonempty list of matching (w, b) pieces")
        self.weights = W
        self.intercepts = b
        self.dim = W.shape[1]
        self.n_pieces = W.shape[0]

    def __call__(self, x):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if pts.shape[1] != self.dim:
            raise FunctionError(f"point dimension {pts.shape[1]} != {self.dim}")
        vals = np.max(pts @ self.weights.T + self.intercepts, axis=1)
        if np.ndim(x) == 1:
            return float(vals[0])
        return vals

    def to_json(self):
        return {
            "dim": self.dim,
            "pieces": [
                {"w": list(map(float, w)), "b": float(b)}
                for w, b in zip(self.weights, self.intercepts)
            ],
        }

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        pieces = obj["pieces"]
        return cls([p["w"] for p in pieces], [p["b"] for p in pieces])

    def __repr__(self):
        return f"PiecewiseAffineConvex(dim={self.dim}, pieces={self.n_pieces})"


class SquaredNorm:
    """x -> ||x||^2."""

    def __init__(self, dim):
        self.dim = dim

    def __call__(self, x):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        vals = np.sum(pts**2, axis=1)
        if np.ndim(x) == 1:
            return float(vals[0])
        return vals


class AffineFunction:
    """x -> w . x + b."""

    def __init__(self, w, b=0.0):
        self.w = np.asarray(w, dtype=float).ravel()
        self.b = float(b)
        self.dim = self.w.size

    def __call__(self, x):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        vals = pts @ self.w + self.b
        if np.ndim(x) == 1:
            return float(vals[0])
        return vals


def tangent_pieces_at(anchors):
    """Upper envelope of tangent planes of ||x||^2 at the given anchor points.

    Each anchor v contributes the plane x -> 2 v . x - ||v||^2, which touches
    the squared norm at v and minorizes it everywhere; the pointwise gap is
    exactly min_v ||x - v||^2.
    """
    V = np.atleast_2d(np.asarray(anchors, dtype=float))
    if V.shape[0] == 0:
        raise FunctionError("need at least one anchor")
    return PiecewiseAffineConvex(2.0 * V, -np.sum(V**2, axis=1))


def tangent_approximant(poly, k, anchors="grid"):
    """Piecewise-affine convex approximant of ||x||^2 with O(k) pieces.

    Anchors are lattice points of resolution eta = extent * k^(-1/d) inside
    the domain ("grid"); if that lattice misses the domain, the vertices of an
    intersecting cube cover are used instead. anchors="interior" restricts to
    vertices of cubes fully inside the domain, which shrinks the covered
    region by an O(eta) margin near the boundary.

    Returns (function, anchor_points). The sup error over the domain decays
    like k^(-2/d) because every point is within O(eta) of an anchor.
    """
    if k < 1:
        raise FunctionError("k must be >= 1")
    lo, hi = poly.bounding_box()
    extent = float(np.max(hi - lo))
    eta = extent * k ** (-1.0 / poly.dim)
    if anchors == "grid":
        try:
            pts = grid_points(poly, eta).points
        except GeometryError:
            pts = _cover_vertices(poly, eta, mode="intersecting")
    elif anchors == "interior":
        pts = _cover_vertices(poly, eta, mode="interior")
    else:
        raise FunctionError(f"unknown anchor mode: {anchors!r}")
    if pts.shape[0] == 0:
        raise FunctionError(f"k={k} produces no anchors on this domain")
    return tangent_pieces_at(pts), pts


def _cover_vertices(poly, eta, mode):
    corners = cube_cover(poly, eta, mode=mode)
    if corners.shape[0] == 0:
        return np.empty((0, poly.dim))
    offsets = cube_vertices(np.zeros(poly.dim), eta)
    verts = (corners[:, None, :] + offsets[None, :, :]).reshape(-1, poly.dim)
    keys = np.round(verts / eta).astype(np.int64)
    _, idx = np.unique(keys, axis=0, return_index=True)
    return verts[np.sort(idx)]


def interior_cover_fraction(poly, eta, n_samples=20_000, seed=0):
    """Fraction of the domain covered by cubes fully inside it (Monte Carlo).

    Measures how much of the domain the "interior" anchor mode reaches; the
    uncovered part is an O(eta) boundary layer.
    """
    from .geometry import sample_uniform

    corners = cube_cover(poly, eta, mode="interior")
    pts = sample_uniform(poly, n_samples, seed=seed).points
    if corners.shape[0] == 0:
        return 0.0
    covered = np.zeros(pts.shape[0], dtype=bool)
    for corner in corners:
        covered |= np.all((pts >= corner - 1e-12) & (pts <= corner + eta + 1e-12), axis=1)
    return float(covered.mean())


def bump_value(center, delta, x):
    """Localized smooth bump delta^2 * g((x - center)/delta) where
    g(u) = sum_i cos^3(pi u_i) on [-1/2, 1/2]^d and 0 outside.

    The support is the cube center +- delta/2 per coordinate; the bump and
    its first two derivatives vanish on the support boundary.
    """
    if delta <= 0:
        raise FunctionError("delta must be positive")
    center = np.asarray(center, dtype=float).ravel()
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    u = (pts - center) / delta
    inside = np.all(np.abs(u) <= 0.5, axis=1)
    vals = np.zeros(pts.shape[0])
    if inside.any():
        vals[inside] = delta**2 * np.sum(np.cos(np.pi * u[inside]) ** 3, axis=1)
    if np.ndim(x) == 1:
        return float(vals[0])
    return vals


def varshamov_gilbert(n, min_hamming, target_count, seed, attempt_budget=None):
    """Greedy random packing of binary vectors with pairwise Hamming distance
    >= min_hamming.

    Samples uniform binary vectors and keeps those far from everything kept
    so far. Deterministic given the seed; raises if the attempt budget runs
    out, which signals target_count too ambitious for the length n.
    """
    if min_hamming > n:
        raise FunctionError("min_hamming cannot exceed the vector length")
    if target_count < 1:
        raise FunctionError("target_count must be >= 1")
    if attempt_budget is None:
        attempt_budget = 1000 * target_count
    rng = np.random.default_rng(seed)
    kept = np.empty((target_count, n), dtype=np.int8)
    count = 0
    for _ in range(attempt_budget):
        cand = rng.integers(0, 2, size=n, dtype=np.int8)
        if count == 0 or np.min(np.sum(kept[:count] != cand, axis=1)) >= min_hamming:
            kept[count] = cand
            count += 1
            if count == target_count:
                return kept.copy()
    raise FunctionError(
        f"packing budget {attempt_budget} exhausted at {count}/{target_count} codewords"
    )


@dataclass(frozen=True)
class BumpPacking:
    """Perturbations of ||x||^2 by codeword-selected bumps on a design grid.

    Member xi evaluates to ||x||^2 + BUMP_COEFF * sum over grid points s with
    xi_s = 1 of bump_value(s, delta, x). The bumps have disjoint supports, so
    two members differ at grid point s by exactly
    BUMP_COEFF * d * delta^2 * (xi_s - xi'_s).

    Convexity caveat: in d = 1 each member is convex on the line. In d >= 2
    the summed-cosine bump does not vanish on the whole boundary of its
    support cube, so the member jumps across support faces and is convex only
    after restriction to the grid: the grid values always admit a convex
    extension (take subgradients 2s at each grid point; the cone constraints
    then hold with margin delta^2 * (1 - BUMP_COEFF * d)).
    """

    grid: GridDesign
    codewords: np.ndarray  # (count, n) in {0, 1}

    def __post_init__(self):
        cw = np.asarray(self.codewords)
        if cw.ndim != 2 or cw.shape[1] != self.grid.n:
            raise FunctionError("codewords must be (count, grid.n)")
        if not np.isin(cw, (0, 1)).all():
            raise FunctionError("codewords must be binary")
        object.__setattr__(self, "codewords", cw.astype(np.int8))
        # lattice index -> design position, for O(1) support lookup
        keys = np.round(self.grid.points / self.grid.delta).astype(np.int64)
        lookup = {tuple(k): i for i, k in enumerate(keys)}
        object.__setattr__(self, "_lookup", lookup)

    @classmethod
    def build(cls, grid, count, seed, min_hamming=None):
        """Packing whose codewords are pairwise >= n/4 apart in Hamming distance."""
        if min_hamming is None:
            min_hamming = math.ceil(grid.n / 4)
        words = varshamov_gilbert(grid.n, min_hamming, count, seed)
        return cls(grid=grid, codewords=words)

    @property
    def dim(self):
        return self.grid.points.shape[1]

    @property
    def count(self):
        return self.codewords.shape[0]

    def member(self, index):
        """Callable for one packing member."""
        if not 0 <= index < self.count:
            raise FunctionError(f"codeword index {index} out of range")

        def f(x):
            return self.evaluate(index, x)

        f.dim = self.dim
        return f

    def evaluate(self, index, x):
        """Evaluate member `index` at one point or a batch of points."""
        if not 0 <= index < self.count:
            raise FunctionError(f"codeword index {index} out of range")
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        vals = np.sum(pts**2, axis=1)
        delta = self.grid.delta
        xi = self.codewords[index]
        # bump supports are disjoint cubes of side delta centered at grid
        # points, so only the nearest lattice point can contribute
        nearest = np.round(pts / delta).astype(np.int64)
        for row, key in enumerate(map(tuple, nearest)):
            pos = self._lookup.get(key)
            if pos is not None and xi[pos] == 1:
                vals[row] += BUMP_COEFF * bump_value(self.grid.points[pos], delta, pts[row])
        if np.ndim(x) == 1:
            return float(vals[0])
        return vals

    def hamming(self, i, j):
        return int(np.sum(self.codewords[i] != self.codewords[j]))

    def distance(self, i, j):
        """Root-mean-square gap between members i and j over the design grid.

        Closed form: BUMP_COEFF * d * delta^2 * sqrt(hamming(i, j) / n),
        because the members differ only at grid points in the codeword
        symmetric difference, by the peak bump height each time.
        """
        if not (0 <= i < self.count and 0 <= j < self.count):
            raise FunctionError("codeword index out of range")
        peak = BUMP_COEFF * self.dim * self.grid.delta**2
        return peak * math.sqrt(self.hamming(i, j) / self.grid.n)

    def separation_lower_bound(self):
        """Distance guaranteed between members whose codewords are >= n/4 apart."""
        return 0.5 * BUMP_COEFF * self.dim * self.grid.delta**2

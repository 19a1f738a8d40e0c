"""Slab-polytope domains, design-point generation, and cube covers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MEMBERSHIP_TOL = 1e-12

# Hard cap on lattice candidates enumerated at once; guards against a
# degenerate delta blowing up memory before the n >= 2 check can fire.
_MAX_CANDIDATES = 80_000_000


class GeometryError(ValueError):
    """Raised for invalid domains, degenerate grids, or sampler exhaustion."""


class SlabPolytope:
    """Bounded domain written as an intersection of slabs a_i <= v_i.x <= b_i.

    Each v_i must be a unit vector. Boundedness is certified at construction:
    the slab normals must span R^d, and the implied norm bound
    sigma_min(V)^-1 * ||(max(|a|,|b|))|| must not exceed the supplied radius.
    The certificate is sufficient, not tight, so pass a generous radius.
    """

    def __init__(self, normals, lower, upper, radius):
        V = np.atleast_2d(np.asarray(normals, dtype=float))
        a = np.asarray(lower, dtype=float).ravel()
        b = np.asarray(upper, dtype=float).ravel()
        if V.shape[0] != a.size or V.shape[0] != b.size:
            raise GeometryError("normals, lower and upper must have matching length")
        norms = np.linalg.norm(V, axis=1)
        if np.any(np.abs(norms - 1.0) > MEMBERSHIP_TOL):
            raise GeometryError("slab normals must be unit vectors (|norm - 1| <= 1e-12)")
        if np.any(a >= b):
            raise GeometryError("each slab needs a < b")
        d = V.shape[1]
        sigma = np.linalg.svd(V, compute_uv=False)
        if sigma.size < d or sigma[d - 1] <= 1e-12:
            raise GeometryError("slab normals do not span R^d; polytope is unbounded")
        bound = np.linalg.norm(np.maximum(np.abs(a), np.abs(b))) / sigma[d - 1]
        if radius <= 0:
            raise GeometryError("bounding radius must be positive")
        if bound > radius + MEMBERSHIP_TOL:
            raise GeometryError(
                f"cannot certify containment in ball of radius {radius}; "
                f"certified bound is {bound:.6g}"
            )
        self.normals = V
        self.lower = a
        self.upper = b
        self.radius = float(radius)
        self.dim = d
        self.n_slabs = V.shape[0]

    def contains(self, x):
        """Membership test, inclusive within 1e-12. Accepts one point or a batch."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if pts.shape[1] != self.dim:
            raise GeometryError(f"point dimension {pts.shape[1]} != domain dimension {self.dim}")
        proj = pts @ self.normals.T
        ok = np.all(
            (proj >= self.lower - MEMBERSHIP_TOL) & (proj <= self.upper + MEMBERSHIP_TOL),
            axis=1,
        )
        if np.ndim(x) == 1:
            return bool(ok[0])
        return ok

    def bounding_box(self):
        """Tightest per-axis box derivable from axis-aligned slabs; [-r, r] otherwise."""
        lo = np.full(self.dim, -self.radius)
        hi = np.full(self.dim, self.radius)
        for v, a, b in zip(self.normals, self.lower, self.upper):
            axis = np.argmax(np.abs(v))
            rest = np.sqrt(max(0.0, 1.0 - v[axis] ** 2))
            if rest > MEMBERSHIP_TOL:
                continue  # not axis-aligned
            if v[axis] > 0:
                lo[axis] = max(lo[axis], a)
                hi[axis] = min(hi[axis], b)
            else:
                lo[axis] = max(lo[axis], -b)
                hi[axis] = min(hi[axis], -a)
        return lo, hi

    def to_json(self):
        return {
            "dim": self.dim,
            "slabs": [
                {"v": list(map(float, v)), "a": float(a), "b": float(b)}
                for v, a, b in zip(self.normals, self.lower, self.upper)
            ],
            "radius": self.radius,
        }

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        slabs = obj["slabs"]
        V = [s["v"] for s in slabs]
        a = [s["a"] for s in slabs]
        b = [s["b"] for s in slabs]
        return cls(V, a, b, obj["radius"])

    def __repr__(self):
        return f"SlabPolytope(dim={self.dim}, slabs={self.n_slabs}, radius={self.radius})"


def unit_cube(d):
    """The cube [0, 1]^d as a slab polytope."""
    return SlabPolytope(np.eye(d), np.zeros(d), np.ones(d), radius=np.sqrt(d) + 1e-9)


def box(lower, upper):
    """Axis-aligned box as a slab polytope."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = lower.size
    radius = np.linalg.norm(np.maximum(np.abs(lower), np.abs(upper))) + 1e-9
    return SlabPolytope(np.eye(d), lower, upper, radius=radius)


@dataclass(frozen=True)
class GridDesign:
    """Regular lattice points {(k_1 delta, ..., k_d delta)} inside a domain."""

    delta: float
    points: np.ndarray  # (n, d), lexicographic in the integer indices
    n: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n", self.points.shape[0])
        self.points.setflags(write=False)


@dataclass(frozen=True)
class RandomDesign:
    """Uniform i.i.d. points on a domain, with the seed that produced them."""

    points: np.ndarray  # (n, d)
    seed: int

    @property
    def n(self):
        return self.points.shape[0]


def _lattice_candidates(poly, step, pad=0):
    """Integer index ranges per axis covering the domain's bounding box."""
    lo, hi = poly.bounding_box()
    kmin = np.ceil(lo / step - 1e-9).astype(int) - pad
    kmax = np.floor(hi / step + 1e-9).astype(int) + pad
    sizes = np.maximum(kmax - kmin + 1, 0)
    total = int(np.prod(sizes, dtype=np.int64))
    if total > _MAX_CANDIDATES:
        raise GeometryError(
            f"lattice enumeration would visit {total} candidates; step too small"
        )
    return kmin, kmax, total


def _lattice_indices(kmin, kmax):
    """All integer tuples in the box [kmin, kmax], lexicographic order."""
    axes = [np.arange(lo, hi + 1) for lo, hi in zip(kmin, kmax)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def grid_points(poly, delta):
    """Regular delta-grid intersected with the domain.

    Points are ordered lexicographically by their integer indices. Fails if
    fewer than two grid points fall inside the domain (delta too coarse).
    """
    if delta <= 0:
        raise GeometryError("delta must be positive")
    kmin, kmax, total = _lattice_candidates(poly, delta)
    if total == 0:
        raise GeometryError("grid has no candidate points inside the bounding box")
    idx = _lattice_indices(kmin, kmax)
    pts = idx * delta
    mask = poly.contains(pts)
    pts = pts[mask]
    if pts.shape[0] < 2:
        raise GeometryError(
            f"delta={delta} yields only {pts.shape[0]} grid point(s); need at least 2"
        )
    return GridDesign(delta=float(delta), points=pts)


def sample_uniform(poly, n, seed, max_draws=None):
    """n i.i.d. uniform points on the polytope via bounding-box rejection.

    Deterministic given the seed. Raises GeometryError if the draw budget is
    exhausted, which signals a very thin polytope relative to its box.
    """
    if n < 1:
        raise GeometryError("need n >= 1 samples")
    if max_draws is None:
        max_draws = 10_000 + 2_000 * n
    lo, hi = poly.bounding_box()
    rng = np.random.default_rng(seed)
    out = np.empty((n, poly.dim))
    filled = 0
    drawn = 0
    while filled < n:
        batch = min(max(1024, n), max_draws - drawn)
        if batch <= 0:
            raise GeometryError(
                f"rejection budget {max_draws} exhausted after accepting {filled}/{n}"
            )
        cand = rng.uniform(lo, hi, size=(batch, poly.dim))
        drawn += batch
        acc = cand[poly.contains(cand)]
        take = min(acc.shape[0], n - filled)
        out[filled : filled + take] = acc[:take]
        filled += take
    return RandomDesign(points=out, seed=seed)


def cube_cover(poly, eta, mode="intersecting"):
    """Axis-aligned lattice cubes of side eta covering or filling the domain.

    mode="intersecting": cubes whose interior overlaps the domain (for
    axis-aligned slab systems the test is exact; for tilted slabs it is a
    conservative per-slab interval check, so the cover may include spares).
    mode="interior": cubes entirely inside the domain, decided by vertex
    containment, which is exact for a convex domain.

    Returns the (m, d) array of lower corners; each cube is corner + [0, eta]^d.
    """
    if eta <= 0:
        raise GeometryError("eta must be positive")
    if mode not in ("intersecting", "interior"):
        raise GeometryError(f"unknown cube_cover mode: {mode!r}")
    kmin, kmax, total = _lattice_candidates(poly, eta, pad=1)
    if total == 0:
        return np.empty((0, poly.dim))
    idx = _lattice_indices(kmin, kmax)
    corners = idx * eta
    if mode == "interior":
        verts = cube_vertices(np.zeros(poly.dim), eta)
        keep = np.ones(corners.shape[0], dtype=bool)
        for v in verts:
            keep &= poly.contains(corners + v)
        return corners[keep]
    # Interval overlap per slab: range of v.x over the cube must strictly
    # overlap (a, b).
    V = poly.normals
    lo_proj = corners @ V.T + np.minimum(V, 0.0).sum(axis=1) * eta
    hi_proj = corners @ V.T + np.maximum(V, 0.0).sum(axis=1) * eta
    keep = np.all(
        (hi_proj > poly.lower + MEMBERSHIP_TOL) & (lo_proj < poly.upper - MEMBERSHIP_TOL),
        axis=1,
    )
    return corners[keep]


def cube_vertices(corner, eta):
    """The 2^d vertices of the cube corner + [0, eta]^d."""
    corner = np.asarray(corner, dtype=float)
    d = corner.size
    bits = _lattice_indices(np.zeros(d, dtype=int), np.ones(d, dtype=int))
    return corner + bits * eta

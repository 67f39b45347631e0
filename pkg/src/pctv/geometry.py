"""Domains, bounded densities and point cloud sampling.

Domains are open subsets of R^d given as axis aligned boxes, connected
unions of boxes, or convex polygons (d = 2 only).  Membership tests use
the closure; the boundary has measure zero so sampling is unaffected.

Densities are bounded evaluators 0 < lower <= rho <= upper on a domain.
Sampling draws i.i.d. points by rejection from the bounding box with the
declared upper bound as envelope.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EnvelopeError

GENERATOR_NAME = "numpy.random.PCG64"


class Domain:
    """Common interface: dimension, volume, membership, bounding box."""

    dimension: int

    def volume(self) -> float:
        raise NotImplementedError

    def contains(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def moment(self, axis: int) -> float:
        """Integral of the coordinate x_axis over the domain."""
        raise NotImplementedError


@dataclass(frozen=True)
class Box(Domain):
    lo: np.ndarray
    hi: np.ndarray

    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("lo and hi must be 1-d arrays of equal length")
        if np.any(hi <= lo):
            raise ValueError("box must have positive extent in every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "dimension", lo.size)

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((points >= self.lo) & (points <= self.hi), axis=1)

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    def moment(self, axis: int) -> float:
        return self.volume() * 0.5 * (self.lo[axis] + self.hi[axis])


def unit_box(d: int) -> Box:
    return Box(np.zeros(d), np.ones(d))


class BoxUnion(Domain):
    """Union of axis aligned boxes forming a connected open set.

    Two boxes count as adjacent when their closures meet in a face of
    positive area (at most one axis may be degenerate in the contact).
    The union must be connected under this adjacency.  Volume is exact,
    computed on the coordinate-compressed cell grid, so overlapping
    boxes are handled correctly.
    """

    def __init__(self, boxes: Sequence[Box]):
        if not boxes:
            raise ValueError("box union needs at least one box")
        d = boxes[0].dimension
        if any(b.dimension != d for b in boxes):
            raise ValueError("all boxes must share one dimension")
        self.boxes = list(boxes)
        self.dimension = d
        self._check_connected()
        self._cells = self._covered_cells()

    def _check_connected(self):
        m = len(self.boxes)
        parent = list(range(m))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i in range(m):
            for j in range(i + 1, m):
                lo = np.maximum(self.boxes[i].lo, self.boxes[j].lo)
                hi = np.minimum(self.boxes[i].hi, self.boxes[j].hi)
                gap = hi - lo
                if np.any(gap < 0):
                    continue
                if np.sum(gap == 0) <= 1:
                    parent[find(i)] = find(j)
        if len({find(i) for i in range(m)}) > 1:
            raise ValueError("box union is not connected through shared faces")

    def _covered_cells(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        axes = []
        for ax in range(self.dimension):
            coords = sorted({float(b.lo[ax]) for b in self.boxes}
                            | {float(b.hi[ax]) for b in self.boxes})
            axes.append(np.asarray(coords))
        cells = []
        grids = np.meshgrid(*[np.arange(len(a) - 1) for a in axes], indexing="ij")
        idx = np.stack([g.ravel() for g in grids], axis=1)
        for cell in idx:
            lo = np.array([axes[ax][cell[ax]] for ax in range(self.dimension)])
            hi = np.array([axes[ax][cell[ax] + 1] for ax in range(self.dimension)])
            mid = 0.5 * (lo + hi)
            if any(b.contains(mid[None, :])[0] for b in self.boxes):
                cells.append((lo, hi))
        return cells

    def volume(self) -> float:
        return float(sum(np.prod(hi - lo) for lo, hi in self._cells))

    def contains(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.zeros(points.shape[0], dtype=bool)
        for b in self.boxes:
            inside |= b.contains(points)
        return inside

    def bounding_box(self):
        lo = np.min([b.lo for b in self.boxes], axis=0)
        hi = np.max([b.hi for b in self.boxes], axis=0)
        return lo, hi

    def moment(self, axis: int) -> float:
        total = 0.0
        for lo, hi in self._cells:
            total += float(np.prod(hi - lo)) * 0.5 * (lo[axis] + hi[axis])
        return total


class ConvexPolygon(Domain):
    """Convex polygon domain in the plane, vertices stored counterclockwise."""

    def __init__(self, vertices):
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
            raise ValueError("need at least 3 planar vertices")
        area2 = _shoelace(verts)
        if area2 < 0:
            verts = verts[::-1]
            area2 = -area2
        if area2 <= 0:
            raise ValueError("polygon has no area")
        edges = np.roll(verts, -1, axis=0) - verts
        cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] \
            - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        if np.any(cross < -1e-12):
            raise ValueError("polygon is not convex")
        self.vertices = verts
        self.dimension = 2

    def volume(self) -> float:
        return 0.5 * _shoelace(self.vertices)

    def contains(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.vertices
        b = np.roll(a, -1, axis=0)
        inside = np.ones(points.shape[0], dtype=bool)
        for k in range(a.shape[0]):
            ex, ey = b[k] - a[k]
            cross = ex * (points[:, 1] - a[k, 1]) - ey * (points[:, 0] - a[k, 0])
            inside &= cross >= -1e-12
        return inside

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def moment(self, axis: int) -> float:
        a = self.vertices
        b = np.roll(a, -1, axis=0)
        w = a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]
        return float(np.sum((a[:, axis] + b[:, axis]) * w)) / 6.0


def _shoelace(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def dumbbell(width: float = 0.25, length: float = 0.5) -> BoxUnion:
    """Two unit squares joined by a neck of the given width and length.

    The neck is centered vertically; the left square occupies [0,1]^2 and
    the right square starts where the neck ends.
    """
    if not 0 < width <= 1:
        raise ValueError("neck width must lie in (0, 1]")
    if length <= 0:
        raise ValueError("neck length must be positive")
    half = 0.5 * width
    return BoxUnion([
        Box([0.0, 0.0], [1.0, 1.0]),
        Box([1.0, 0.5 - half], [1.0 + length, 0.5 + half]),
        Box([1.0 + length, 0.0], [2.0 + length, 1.0]),
    ])


@dataclass
class Density:
    """Bounded density evaluator on a domain.

    fn maps an (m, d) array of points to (m,) values.  lower and upper
    are declared bounds 0 < lower <= rho <= upper that sampling and the
    Lipschitz sandwich rely on.  normalized marks whether the evaluator
    is meant to integrate to 1 over its domain.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    lower: float
    upper: float
    normalized: bool = False
    name: str = "custom"

    def __post_init__(self):
        if not (0 < self.lower <= self.upper):
            raise ValueError("need 0 < lower <= upper")

    def __call__(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(self.fn(points), dtype=float)


def uniform_density(domain: Domain) -> Density:
    value = 1.0 / domain.volume()

    def fn(points):
        return np.full(points.shape[0], value)

    return Density(fn=fn, lower=value, upper=value, normalized=True,
                   name="uniform")


def affine_density(domain: Domain, axis: int = 0, slope: float = 1.0) -> Density:
    """Normalized density proportional to 1 + slope * x_axis.

    The normalizing constant is exact: the integral of an affine function
    over the domain is volume + slope * moment.
    """
    z = domain.volume() + slope * domain.moment(axis)
    lo, hi = domain.bounding_box()
    ends = np.array([1.0 + slope * lo[axis], 1.0 + slope * hi[axis]]) / z
    if np.min(ends) <= 0:
        raise ValueError("density is not positive on the domain")

    def fn(points):
        return (1.0 + slope * points[:, axis]) / z

    return Density(fn=fn, lower=float(np.min(ends)), upper=float(np.max(ends)),
                   normalized=True, name=f"affine(axis={axis},slope={slope:g})")


def integrate_density(density: Density, domain: Domain, resolution: int = 512) -> float:
    """Midpoint quadrature of the density over the domain."""
    lo, hi = domain.bounding_box()
    d = domain.dimension
    axes = [lo[ax] + (hi[ax] - lo[ax]) * (np.arange(resolution) + 0.5) / resolution
            for ax in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    cell = float(np.prod((hi - lo) / resolution))
    inside = domain.contains(pts)
    total = 0.0
    chunk = 1 << 18
    idx = np.nonzero(inside)[0]
    for start in range(0, idx.size, chunk):
        sel = pts[idx[start:start + chunk]]
        total += float(np.sum(density(sel)))
    return total * cell


@dataclass(frozen=True)
class PointCloud:
    """n sample points in R^d with mass 1/n each."""

    points: np.ndarray
    seed: Optional[int] = None

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def to_csv(self, path):
        d = self.dimension
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{ax}" for ax in range(d)])
            for row in self.points:
                writer.writerow([repr(float(v)) for v in row])

    @staticmethod
    def from_csv(path) -> "PointCloud":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not all(h == f"x{ax}" for ax, h in enumerate(header)):
                raise ValueError(f"unexpected point cloud header: {header}")
            rows = [[float(v) for v in row] for row in reader if row]
        return PointCloud(points=np.asarray(rows, dtype=float))


def sample_iid(domain: Domain, density: Density, n: int,
               seed: Optional[int] = None) -> PointCloud:
    """Draw n i.i.d. points from the density by rejection sampling.

    Proposals are uniform on the bounding box and accepted with
    probability rho(x) / upper.  Aborts with EnvelopeError when the
    envelope is violated or the estimated acceptance rate falls below
    1e-4 after a warmup of proposals.
    """
    rng = np.random.default_rng(seed)
    lo, hi = domain.bounding_box()
    d = domain.dimension
    chunk = max(4096, 2 * n)
    accepted: List[np.ndarray] = []
    got = 0
    proposed = 0
    while got < n:
        pts = lo + (hi - lo) * rng.random((chunk, d))
        u = rng.random(chunk)
        inside = domain.contains(pts)
        values = np.zeros(chunk)
        values[inside] = density(pts[inside])
        if np.any(values > density.upper * (1.0 + 1e-9)):
            raise EnvelopeError("density exceeds its declared upper bound")
        keep = inside & (u * density.upper < values)
        accepted.append(pts[keep])
        got += int(np.count_nonzero(keep))
        proposed += chunk
        if proposed >= 50000 and got < 1e-4 * proposed:
            raise EnvelopeError(
                f"acceptance rate {got / proposed:.2e} below 1e-4; "
                "tighten the envelope or the bounding box")
    points = np.concatenate(accepted, axis=0)[:n]
    return PointCloud(points=points, seed=seed)


def grid_points(k: int, d: int) -> np.ndarray:
    """Regular k^d grid on the unit cube with points at cell centers.

    Coordinates are odd multiples of 1/(2k); order is lexicographic in
    the index vector.
    """
    if k < 1:
        raise ValueError("k must be positive")
    axis = (2.0 * np.arange(k) + 1.0) / (2.0 * k)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _domain_grid(domain: Domain, resolution: int) -> np.ndarray:
    lo, hi = domain.bounding_box()
    d = domain.dimension
    axes = [lo[ax] + (hi[ax] - lo[ax]) * (np.arange(resolution) + 0.5) / resolution
            for ax in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    return pts[domain.contains(pts)]


def lipschitz_approx(density: Density, domain: Domain, k: float,
                     side: str = "below", resolution: Optional[int] = None) -> Density:
    """k-Lipschitz approximant of the density from below or above.

    below: rho_k(x) = inf over y of rho(y) + k |x - y|, the largest
    k-Lipschitz function under rho.  above: sup of rho(y) - k |x - y|,
    the smallest one over rho.  The inf/sup runs over a fixed evaluation
    grid on the domain, brute force.  Both approximants share the
    original bounds.
    """
    if side not in ("below", "above"):
        raise ValueError("side must be 'below' or 'above'")
    if resolution is None:
        resolution = 256 if domain.dimension <= 2 else 64
    anchors = _domain_grid(domain, resolution)
    anchor_vals = density(anchors)
    sign = 1.0 if side == "below" else -1.0

    def fn(points):
        out = np.empty(points.shape[0])
        chunk = max(1, (1 << 22) // max(1, anchors.shape[0]))
        for start in range(0, points.shape[0], chunk):
            block = points[start:start + chunk]
            dist = np.linalg.norm(block[:, None, :] - anchors[None, :, :], axis=2)
            vals = sign * anchor_vals[None, :] + k * dist
            best = np.min(vals, axis=1)
            # y = x is always admissible in the inf/sup, so the original
            # value caps the envelope; this keeps below <= rho <= above
            # exact instead of only up to the anchor spacing
            np.minimum(best, sign * density(block), out=best)
            out[start:start + chunk] = sign * best
        return out

    return Density(fn=fn, lower=density.lower, upper=density.upper,
                   normalized=False,
                   name=f"{density.name}|lip(k={k:g},{side})")


def domain_from_config(spec: dict) -> Domain:
    """Build a domain from a config mapping."""
    shape = spec["shape"]
    if shape == "box":
        return Box(spec["lo"], spec["hi"])
    if shape == "unit-box":
        return unit_box(int(spec.get("dimension", 2)))
    if shape == "dumbbell":
        return dumbbell(spec.get("width", 0.25), spec.get("length", 0.5))
    if shape == "box-union":
        return BoxUnion([Box(b["lo"], b["hi"]) for b in spec["boxes"]])
    if shape == "polygon":
        return ConvexPolygon(spec["vertices"])
    raise ValueError(f"unknown domain shape: {shape!r}")


def density_from_config(spec: dict, domain: Domain) -> Density:
    name = spec["name"]
    if name == "uniform":
        return uniform_density(domain)
    if name == "affine":
        return affine_density(domain, int(spec.get("axis", 0)),
                              float(spec.get("slope", 1.0)))
    raise ValueError(f"unknown density name: {name!r}")

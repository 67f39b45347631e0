"""Exact transportation distances between discrete measures.

Measures are finite atom lists with masses summing to 1.  Distances:

    d_p(mu, nu)      p-cost optimal transport, exact
    d_inf(mu, nu)    bottleneck (min over matchings of the max move),
                     uniform measures with equal atom counts only
    TL^p             transport distance between functions over their
                     measures, with ground cost |x - y|^p + |f(x) - g(y)|^p,
                     the p-product metric on the graphs of f and g

Uniform equal-count instances reduce to the assignment problem; an
optimal vertex of the transportation polytope is a permutation, so the
assignment solution is exact.  General masses go through the
transportation linear program.  No entropic or other approximate
solvers are used anywhere.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import maximum_flow
from scipy.spatial.distance import cdist
from scipy.stats import kendalltau

from .errors import MarginalError, UnsupportedConfigurationError
from .geometry import Domain, Density, grid_points, sample_iid

MASS_TOL = 1e-12
MARGINAL_TOL = 1e-10
DISTANCE_FLOOR = 1e-14
MAX_DENSE_COSTS = 20_000_000


@dataclass(frozen=True)
class DiscreteMeasure:
    """Atoms in R^d with positive masses summing to 1."""

    support: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        support = np.atleast_2d(np.asarray(self.support, dtype=float))
        masses = np.asarray(self.masses, dtype=float)
        if masses.ndim != 1 or masses.size != support.shape[0]:
            raise ValueError("need one mass per atom")
        if np.any(masses <= 0):
            raise ValueError("masses must be positive")
        if abs(float(masses.sum()) - 1.0) > MASS_TOL:
            raise ValueError(
                f"masses sum to {masses.sum()!r}, expected 1 within {MASS_TOL}")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "masses", masses)

    @property
    def n(self) -> int:
        return self.support.shape[0]

    @property
    def dimension(self) -> int:
        return self.support.shape[1]

    @property
    def uniform(self) -> bool:
        return bool(np.all(np.abs(self.masses - 1.0 / self.n) <= MASS_TOL))

    @staticmethod
    def uniform_on(points) -> "DiscreteMeasure":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = points.shape[0]
        return DiscreteMeasure(support=points, masses=np.full(n, 1.0 / n))


@dataclass(frozen=True)
class LiftedFunction:
    """A function given by its values on the atoms of a measure."""

    measure: DiscreteMeasure
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.measure.n,):
            raise ValueError("need one value per atom")
        object.__setattr__(self, "values", values)

    def lifted_support(self) -> np.ndarray:
        """Atoms of the push-forward onto the graph of the function."""
        return np.hstack([self.measure.support, self.values[:, None]])


@dataclass(frozen=True)
class TransportPlan:
    """Sparse coupling between two measures; entries (i, j, mass)."""

    source: DiscreteMeasure
    target: DiscreteMeasure
    ii: np.ndarray
    jj: np.ndarray
    mm: np.ndarray

    def __post_init__(self):
        ii = np.asarray(self.ii, dtype=np.int64)
        jj = np.asarray(self.jj, dtype=np.int64)
        mm = np.asarray(self.mm, dtype=float)
        if not (ii.shape == jj.shape == mm.shape) or ii.ndim != 1:
            raise ValueError("entries must be parallel 1-d arrays")
        object.__setattr__(self, "ii", ii)
        object.__setattr__(self, "jj", jj)
        object.__setattr__(self, "mm", mm)
        row = np.bincount(ii, weights=mm, minlength=self.source.n)
        col = np.bincount(jj, weights=mm, minlength=self.target.n)
        row_gap = float(np.max(np.abs(row - self.source.masses)))
        col_gap = float(np.max(np.abs(col - self.target.masses)))
        if max(row_gap, col_gap) > MARGINAL_TOL:
            raise MarginalError(
                f"plan marginals off by {max(row_gap, col_gap):.3e} "
                f"(tolerance {MARGINAL_TOL})")

    def cost(self, p: float = 2.0) -> float:
        moved = np.linalg.norm(
            self.source.support[self.ii] - self.target.support[self.jj], axis=1)
        return float(np.sum(self.mm * moved ** p))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "mass"])
            for i, j, m in zip(self.ii, self.jj, self.mm):
                writer.writerow([int(i), int(j), repr(float(m))])


@dataclass(frozen=True)
class TransportMap:
    """Atom-to-atom assignment inducing a deterministic plan."""

    source: DiscreteMeasure
    target: DiscreteMeasure
    assignment: np.ndarray

    def __post_init__(self):
        assignment = np.asarray(self.assignment, dtype=np.int64)
        if assignment.shape != (self.source.n,):
            raise ValueError("need one target index per source atom")
        object.__setattr__(self, "assignment", assignment)

    def to_plan(self) -> TransportPlan:
        return TransportPlan(source=self.source, target=self.target,
                             ii=np.arange(self.source.n), jj=self.assignment,
                             mm=self.source.masses.copy())

    def displacement(self) -> np.ndarray:
        return np.linalg.norm(
            self.source.support - self.target.support[self.assignment], axis=1)


def push_forward(measure: DiscreteMeasure, assignment,
                 target_support) -> DiscreteMeasure:
    """Image measure under an atom map; masses add up on shared targets."""
    assignment = np.asarray(assignment, dtype=np.int64)
    target_support = np.atleast_2d(np.asarray(target_support, dtype=float))
    masses = np.bincount(assignment, weights=measure.masses,
                         minlength=target_support.shape[0])
    keep = masses > 0
    if not np.all(keep):
        raise ValueError("every target atom must receive mass; "
                         "restrict the support first")
    return DiscreteMeasure(support=target_support, masses=masses)


def _cost_matrix(a: np.ndarray, b: np.ndarray, p: float,
                 fa: Optional[np.ndarray] = None,
                 fb: Optional[np.ndarray] = None) -> np.ndarray:
    if a.shape[0] * b.shape[0] > MAX_DENSE_COSTS:
        raise UnsupportedConfigurationError(
            f"cost matrix {a.shape[0]} x {b.shape[0]} exceeds the dense limit")
    cost = cdist(a, b) ** p
    if fa is not None:
        cost = cost + np.abs(fa[:, None] - fb[None, :]) ** p
    return cost


def _clamp(distance: float) -> float:
    return 0.0 if distance <= DISTANCE_FLOOR else distance


def _solve_assignment(mu, nu, cost, p):
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum()) / mu.n
    plan = TransportPlan(source=mu, target=nu, ii=rows, jj=cols,
                         mm=np.full(mu.n, 1.0 / mu.n))
    return _clamp(total ** (1.0 / p)), plan


def _solve_lp(mu, nu, cost, p):
    ns, nt = cost.shape
    row_idx = np.repeat(np.arange(ns), nt)
    col_idx = np.tile(np.arange(nt), ns)
    var = np.arange(ns * nt)
    a_rows = coo_matrix((np.ones(ns * nt), (row_idx, var)), shape=(ns, ns * nt))
    a_cols = coo_matrix((np.ones(ns * nt), (col_idx, var)), shape=(nt, ns * nt))
    from scipy.sparse import vstack
    a_eq = vstack([a_rows, a_cols]).tocsr()
    b_eq = np.concatenate([mu.masses, nu.masses])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs")
    if not res.success:
        raise RuntimeError(f"transportation solve failed: {res.message}")
    x = np.maximum(res.x, 0.0)
    keep = x > 1e-14
    plan = TransportPlan(source=mu, target=nu,
                         ii=row_idx[keep], jj=col_idx[keep], mm=x[keep])
    return _clamp(float(res.fun) ** (1.0 / p)), plan


def ot_distance(mu: DiscreteMeasure, nu: DiscreteMeasure,
                p: float = 2.0) -> Tuple[float, TransportPlan]:
    """Exact p-cost transport distance and an optimal plan."""
    if p < 1:
        raise ValueError("p must be at least 1")
    cost = _cost_matrix(mu.support, nu.support, p)
    if mu.n == nu.n and mu.uniform and nu.uniform:
        return _solve_assignment(mu, nu, cost, p)
    return _solve_lp(mu, nu, cost, p)


def tlp_distance(f: LiftedFunction, g: LiftedFunction,
                 p: float = 1.0) -> Tuple[float, TransportPlan]:
    """Transport distance between functions over their measures.

    Ground cost |x - y|^p + |f(x) - g(y)|^p; equivalently the p-cost
    transport distance between the push-forwards of the measures onto
    the function graphs in R^(d+1) under the p-product metric.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    mu, nu = f.measure, g.measure
    cost = _cost_matrix(mu.support, nu.support, p, f.values, g.values)
    if mu.n == nu.n and mu.uniform and nu.uniform:
        return _solve_assignment(mu, nu, cost, p)
    return _solve_lp(mu, nu, cost, p)


def _bipartite_candidates(x: np.ndarray, y: np.ndarray, radius: float):
    """Cross-set index pairs within the cell list radius."""
    n, d = x.shape
    both = np.vstack([x, y])
    cells = np.floor(both / radius).astype(np.int64)
    cells -= cells.min(axis=0)
    spans = cells.max(axis=0) + 3
    cells += 1
    strides = np.ones(d, dtype=np.int64)
    for ax in range(d - 2, -1, -1):
        strides[ax] = strides[ax + 1] * spans[ax + 1]
    kx = cells[:n] @ strides
    ky = cells[n:] @ strides
    order_x = np.argsort(kx, kind="stable")
    order_y = np.argsort(ky, kind="stable")
    ux, sx = np.unique(kx[order_x], return_index=True)
    cx = np.diff(np.append(sx, n))
    uy, sy = np.unique(ky[order_y], return_index=True)
    cy = np.diff(np.append(sy, y.shape[0]))

    offsets = np.stack(np.meshgrid(*([np.arange(-1, 2)] * d), indexing="ij"),
                       axis=-1).reshape(-1, d)
    pairs_i: List[np.ndarray] = []
    pairs_j: List[np.ndarray] = []
    for o in offsets:
        delta = int(o @ strides)
        target = ux + delta
        pos = np.searchsorted(uy, target)
        pos = np.minimum(pos, uy.size - 1)
        valid = uy[pos] == target
        if not valid.any():
            continue
        ga = np.nonzero(valid)[0]
        gb = pos[valid]
        sizes = cx[ga] * cy[gb]
        total = int(sizes.sum())
        if total == 0:
            continue
        group = np.repeat(np.arange(sizes.size), sizes)
        base = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        t = np.arange(total) - base[group]
        ai = t // cy[gb][group]
        bi = t % cy[gb][group]
        pairs_i.append(order_x[sx[ga][group] + ai])
        pairs_j.append(order_y[sy[gb][group] + bi])
    if not pairs_i:
        return (np.empty(0, dtype=np.int64),) * 2 + (np.empty(0),)
    ci = np.concatenate(pairs_i)
    cj = np.concatenate(pairs_j)
    dist = np.linalg.norm(x[ci] - y[cj], axis=1)
    near = dist <= radius
    return ci[near], cj[near], dist[near]


def _perfect_matching(n: int, ci, cj, mask) -> Optional[np.ndarray]:
    """Row-to-column perfect matching over the masked edges, or None.

    Solved as unit-capacity maximum flow (source, rows, columns, sink);
    on bipartite unit networks this runs in Hopcroft-Karp time and, in
    contrast to the dedicated matcher, stays fast on geometric graphs.
    """
    ci = ci[mask]
    cj = cj[mask]
    src, sink = 2 * n, 2 * n + 1
    rows = np.concatenate([np.full(n, src), ci, n + np.arange(n)])
    cols = np.concatenate([np.arange(n), n + cj, np.full(n, sink)])
    graph = csr_matrix((np.ones(rows.size, dtype=np.int32), (rows, cols)),
                       shape=(2 * n + 2, 2 * n + 2))
    res = maximum_flow(graph, src, sink)
    if res.flow_value < n:
        return None
    flow = res.flow.tocoo()
    used = (flow.data > 0) & (flow.row < n) & (flow.col >= n) & (flow.col < 2 * n)
    match = np.empty(n, dtype=np.int64)
    match[flow.row[used]] = flow.col[used] - n
    return match


def bottleneck_distance(mu: DiscreteMeasure,
                        nu: DiscreteMeasure) -> Tuple[float, TransportMap]:
    """Infinity-cost transport distance for uniform equal-count measures.

    The optimum is the smallest realized pairwise distance t such that
    the bipartite graph of pairs within t has a perfect matching.
    Candidate pairs come from a cell list whose radius doubles until a
    perfect matching exists; the threshold is then found by binary
    search over the candidate distances, each step checked by a unit
    capacity maximum flow.
    """
    if mu.n != nu.n or not (mu.uniform and nu.uniform):
        raise UnsupportedConfigurationError(
            "bottleneck distance needs uniform measures with equal atom counts")
    n = mu.n
    x, y = mu.support, nu.support
    if n == 0:
        raise ValueError("empty measures")
    radius = 4.0 * max(n, 2) ** (-1.0 / x.shape[1])
    span = float(np.max(np.max(np.vstack([x, y]), axis=0)
                        - np.min(np.min(np.vstack([x, y]), axis=0))))
    while True:
        ci, cj, dist = _bipartite_candidates(x, y, radius)
        match = _perfect_matching(n, ci, cj, np.ones(dist.size, dtype=bool))
        if match is not None:
            break
        if radius > 2.0 * max(span, 1.0):
            raise RuntimeError("no perfect matching found at any radius")
        radius *= 2.0

    levels = np.unique(dist)
    lo, hi = 0, levels.size - 1
    best = match
    while lo < hi:
        mid = (lo + hi) // 2
        match = _perfect_matching(n, ci, cj, dist <= levels[mid])
        if match is not None:
            best = match
            hi = mid
        else:
            lo = mid + 1
    # perm_type='column' yields, per row of the biadjacency, its column
    return _clamp(float(levels[lo])), TransportMap(source=mu, target=nu,
                                                   assignment=np.asarray(best))


def plan_inverse(plan: TransportPlan) -> TransportPlan:
    """The same coupling read backwards."""
    return TransportPlan(source=plan.target, target=plan.source,
                         ii=plan.jj, jj=plan.ii, mm=plan.mm)


def plan_compose(p12: TransportPlan, p23: TransportPlan) -> TransportPlan:
    """Glue two plans along their shared middle measure.

    Mass routed i -> j -> k is m12(i, j) * m23(j, k) / mass(j); summing
    over j gives the composed coupling.
    """
    mid_a, mid_b = p12.target, p23.source
    if mid_a.n != mid_b.n or not np.array_equal(mid_a.support, mid_b.support) \
            or not np.array_equal(mid_a.masses, mid_b.masses):
        raise UnsupportedConfigurationError(
            "plans do not share their middle measure")
    order12 = np.argsort(p12.jj, kind="stable")
    order23 = np.argsort(p23.ii, kind="stable")
    j12 = p12.jj[order12]
    j23 = p23.ii[order23]
    mid_n = mid_a.n
    start12 = np.searchsorted(j12, np.arange(mid_n))
    end12 = np.searchsorted(j12, np.arange(mid_n), side="right")
    start23 = np.searchsorted(j23, np.arange(mid_n))
    end23 = np.searchsorted(j23, np.arange(mid_n), side="right")
    c12 = end12 - start12
    c23 = end23 - start23
    sizes = c12 * c23
    total = int(sizes.sum())
    group = np.repeat(np.arange(mid_n), sizes)
    base = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    t = np.arange(total) - base[group]
    a = t // np.maximum(c23[group], 1)
    b = t % np.maximum(c23[group], 1)
    e12 = order12[start12[group] + a]
    e23 = order23[start23[group] + b]
    ii = p12.ii[e12]
    kk = p23.jj[e23]
    mm = p12.mm[e12] * p23.mm[e23] / mid_a.masses[group]
    key = ii * np.int64(p23.target.n) + kk
    uniq, inverse = np.unique(key, return_inverse=True)
    mm_agg = np.bincount(inverse, weights=mm)
    return TransportPlan(source=p12.source, target=p23.target,
                         ii=(uniq // p23.target.n).astype(np.int64),
                         jj=(uniq % p23.target.n).astype(np.int64),
                         mm=mm_agg)


def scaling_ratio(n: int, d: int, distance: float) -> float:
    """Distance over the optimal matching rate for n uniform points.

    In the plane the rate is (log n)^(3/4) / sqrt(n); in higher
    dimension it is (log n / n)^(1/d).
    """
    if d == 2:
        return distance * math.sqrt(n) / math.log(n) ** 0.75
    return distance * n ** (1.0 / d) / math.log(n) ** (1.0 / d)


@dataclass(frozen=True)
class MatchingRecord:
    n: int
    d: int
    seed: int
    distance: float
    ratio: float


def matching_scaling_experiment(domain: Domain, density: Density,
                                n_values: Sequence[int], seeds: Sequence[int],
                                ) -> Tuple[List[MatchingRecord], float, float]:
    """Bottleneck distance between samples and the matching grid.

    For each n = k^d, matches n density samples to the k^d cell-center
    grid and records the distance over the expected rate.  Returns the
    records plus the Kendall tau of ratio against n with its two-sided
    p-value; a flat trend says the rate is the right normalization.
    """
    d = domain.dimension
    records: List[MatchingRecord] = []
    for n in n_values:
        k = round(n ** (1.0 / d))
        if k ** d != n:
            raise ValueError(f"n={n} is not a perfect {d}-th power")
        grid = DiscreteMeasure.uniform_on(grid_points(k, d))
        for seed in seeds:
            cloud = sample_iid(domain, density, n, seed=seed)
            sample = DiscreteMeasure.uniform_on(cloud.points)
            distance, _ = bottleneck_distance(sample, grid)
            records.append(MatchingRecord(
                n=n, d=d, seed=seed, distance=distance,
                ratio=scaling_ratio(n, d, distance)))
    ns = [r.n for r in records]
    ratios = [r.ratio for r in records]
    tau, pvalue = kendalltau(ns, ratios)
    return records, float(tau), float(pvalue)

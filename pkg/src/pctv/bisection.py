"""Balanced graph bisection by cut energy.

A bisection splits the vertices of a weighted graph into two classes of
equal size.  Its energy is the graph total variation of the class
indicator, so minimizing it means cutting as little weight as possible
while keeping the halves balanced.  This module provides an exhaustive
solver for small graphs, a swap-based local search for realistic sizes,
and helpers that compare computed bisections against the flat interfaces
they approximate on simple domains.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedConfigurationError
from .geometry import Box, BoxUnion, Domain, sample_iid
from .graph import WeightedGraph, component_labels, graph_total_variation, is_connected
from .transport import DiscreteMeasure, LiftedFunction, tlp_distance

BRUTE_FORCE_LIMIT = 24
DENSE_LIMIT = 6000
GAIN_TOL = 1e-12


@dataclass(frozen=True)
class Bisection:
    """A balanced two-class vertex partition and its cut energy.

    labels[v] is True when vertex v belongs to class A.  Partitions are
    canonical: vertex 0 always lies in class A, so complementary label
    vectors describe the same bisection exactly once.
    """

    labels: np.ndarray
    energy: float
    method: str

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=bool)
        object.__setattr__(self, "labels", labels)
        n = labels.size
        if n == 0 or n % 2:
            raise UnsupportedConfigurationError(
                "a bisection needs an even, positive number of vertices"
            )
        if int(labels.sum()) != n // 2:
            raise UnsupportedConfigurationError("bisection classes must have equal size")
        if not labels[0]:
            raise UnsupportedConfigurationError("canonical bisections keep vertex 0 in class A")

    @property
    def n(self) -> int:
        return self.labels.size


def _canonical(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=bool)
    return labels if labels[0] else ~labels


def bisection_energy(graph: WeightedGraph, labels: np.ndarray) -> float:
    """Cut energy of a labeling: the graph total variation of its indicator."""
    return graph_total_variation(graph, np.asarray(labels, dtype=float))


def brute_force_bisection(graph: WeightedGraph) -> Bisection:
    """Exact minimizer by enumeration of all balanced partitions.

    Vertex 0 is pinned to class A, which enumerates each unordered
    bisection exactly once.  Ties in energy resolve to the
    lexicographically smallest label vector.  Only graphs with at most
    24 vertices are accepted; the candidate count doubles with every
    additional pair.
    """
    n = graph.n
    if n % 2 or n == 0:
        raise UnsupportedConfigurationError("bisection needs an even, positive vertex count")
    if n > BRUTE_FORCE_LIMIT:
        raise UnsupportedConfigurationError(
            f"brute force handles at most {BRUTE_FORCE_LIMIT} vertices, got {n}"
        )
    half = n // 2
    scale = 2.0 / (n * n * graph.eps)
    ii, jj, ww = graph.ii, graph.jj, graph.ww

    best_energy = np.inf
    best_labels: tuple[bool, ...] | None = None
    chunk = 1 << 14
    combos = itertools.combinations(range(1, n), half - 1)
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        labels = np.zeros((len(block), n), dtype=bool)
        labels[:, 0] = True
        rows = np.repeat(np.arange(len(block)), half - 1)
        cols = np.fromiter(
            itertools.chain.from_iterable(block), dtype=np.intp, count=len(block) * (half - 1)
        )
        labels[rows, cols] = True
        crossing = labels[:, ii] != labels[:, jj]
        energies = scale * (crossing @ ww)
        order = np.argsort(energies, kind="stable")
        low = energies[order[0]]
        if low > best_energy:
            continue
        tied = [tuple(labels[k]) for k in np.flatnonzero(energies == low)]
        candidate = min(tied)
        if low < best_energy or (best_labels is not None and candidate < best_labels):
            best_energy = float(low)
            best_labels = candidate
    assert best_labels is not None
    return Bisection(np.array(best_labels, dtype=bool), best_energy, method="brute-force")


def _dense_weights(graph: WeightedGraph) -> np.ndarray:
    n = graph.n
    if n > DENSE_LIMIT:
        raise UnsupportedConfigurationError(
            f"local search stores a dense weight matrix; {n} vertices exceed the"
            f" supported {DENSE_LIMIT}"
        )
    weights = np.zeros((n, n))
    weights[graph.ii, graph.jj] = graph.ww
    weights[graph.jj, graph.ii] = graph.ww
    return weights


def _zero_energy_start(graph: WeightedGraph) -> np.ndarray | None:
    """Balanced union of whole components, when one exists.

    On a disconnected graph a bisection that never splits a component
    cuts no weight at all.  Subset-sum over the component sizes decides
    whether some components add up to exactly half the vertices; the
    reachable sums are tracked as bits of a single integer.
    """
    comps = component_labels(graph)
    sizes = np.bincount(comps)
    if sizes.size < 2:
        return None
    half = graph.n // 2
    reachable = [1]
    for size in sizes:
        reachable.append(reachable[-1] | (reachable[-1] << int(size)))
    if not (reachable[-1] >> half) & 1:
        return None
    chosen = np.zeros(sizes.size, dtype=bool)
    remaining = half
    for k in range(sizes.size - 1, -1, -1):
        take = int(sizes[k])
        if take <= remaining and (reachable[k] >> (remaining - take)) & 1:
            chosen[k] = True
            remaining -= take
    assert remaining == 0
    return chosen[comps]


def _swap_descent(
    weights: np.ndarray, labels: np.ndarray, cut: float, max_iters: int
) -> tuple[np.ndarray, float]:
    """Best-improvement swap descent from one balanced labeling.

    Each step exchanges the pair whose swap lowers the cut weight the
    most; the gain of swapping a in A with b in B is
    D[a] + D[b] - 2 W[a, b], where D is external minus internal degree.
    """
    labels = labels.copy()
    degrees = weights.sum(axis=1)
    for _ in range(max_iters):
        to_a = weights @ labels
        diff = np.where(labels, degrees - 2.0 * to_a, 2.0 * to_a - degrees)
        idx_a = np.flatnonzero(labels)
        idx_b = np.flatnonzero(~labels)
        gains = diff[idx_a][:, None] + diff[idx_b][None, :] - 2.0 * weights[np.ix_(idx_a, idx_b)]
        flat = int(np.argmax(gains))
        best = gains.flat[flat]
        if best <= GAIN_TOL * max(cut, 1.0):
            break
        a = idx_a[flat // idx_b.size]
        b = idx_b[flat % idx_b.size]
        labels[a] = False
        labels[b] = True
        cut -= float(best)
    return labels, cut


def local_search_bisection(
    graph: WeightedGraph,
    seed: int,
    restarts: int = 32,
    max_iters: int | None = None,
    initial: np.ndarray | None = None,
) -> Bisection:
    """Swap-based local search over balanced partitions.

    Runs a best-improvement descent from several starting partitions and
    keeps the lowest-energy result.  Starts are: the warm start when
    given, a cut-free union of whole components when the graph is
    disconnected in a balanced way, and ``restarts`` random balanced
    splits drawn from independent streams spawned off ``seed``.  Ties
    resolve to the lexicographically smallest canonical label vector.
    """
    n = graph.n
    if n % 2 or n == 0:
        raise UnsupportedConfigurationError("bisection needs an even, positive vertex count")
    if restarts < 0:
        raise UnsupportedConfigurationError("restarts must be non-negative")
    half = n // 2
    if max_iters is None:
        max_iters = 10 * n
    weights = _dense_weights(graph)
    scale = 2.0 / (n * n * graph.eps)

    starts: list[np.ndarray] = []
    if initial is not None:
        warm = np.asarray(initial, dtype=bool)
        if warm.size != n or int(warm.sum()) != half:
            raise UnsupportedConfigurationError("warm start must be a balanced label vector")
        starts.append(warm)
    packed = _zero_energy_start(graph)
    if packed is not None:
        starts.append(packed)
    children = np.random.SeedSequence(seed).spawn(restarts)
    for child in children:
        rng = np.random.default_rng(child)
        labels = np.zeros(n, dtype=bool)
        labels[rng.permutation(n)[:half]] = True
        starts.append(labels)
    if not starts:
        raise UnsupportedConfigurationError("need a warm start or at least one restart")

    best_labels: tuple[bool, ...] | None = None
    best_cut = np.inf
    for start in starts:
        crossing = start[graph.ii] != start[graph.jj]
        cut = float(graph.ww[crossing].sum())
        labels, cut = _swap_descent(weights, start, cut, max_iters)
        key = tuple(_canonical(labels))
        if cut < best_cut - GAIN_TOL * max(best_cut, 1.0) or (
            cut <= best_cut + GAIN_TOL * max(best_cut, 1.0)
            and (best_labels is None or key < best_labels)
        ):
            best_cut = cut
            best_labels = key
    assert best_labels is not None
    final = np.array(best_labels, dtype=bool)
    crossing = final[graph.ii] != final[graph.jj]
    energy = scale * float(graph.ww[crossing].sum())
    return Bisection(final, energy, method="local-search")


def agreement(labels: np.ndarray, reference: np.ndarray) -> float:
    """Fraction of vertices on which two partitions agree.

    Class names carry no meaning, so the score is the better of the two
    ways of identifying the classes with each other.
    """
    labels = np.asarray(labels, dtype=bool)
    reference = np.asarray(reference, dtype=bool)
    match = float(np.mean(labels == reference))
    return max(match, 1.0 - match)


def reference_partitions(domain: Domain, points: np.ndarray) -> list[np.ndarray]:
    """Label vectors induced by the flat minimal interfaces of a domain.

    A unit box admits one straight halving cut per axis; the dumbbell
    shape is cut across the middle of its neck.  Other domains are not
    covered.
    """
    points = np.asarray(points, dtype=float)
    if isinstance(domain, Box):
        lo, hi = domain.bounding_box()
        edges = hi - lo
        if np.allclose(edges, edges[0]):
            mid = 0.5 * (lo + hi)
            return [points[:, axis] < mid[axis] for axis in range(domain.dimension)]
    if isinstance(domain, BoxUnion):
        lo, hi = domain.bounding_box()
        return [points[:, 0] < 0.5 * (lo[0] + hi[0])]
    raise UnsupportedConfigurationError(
        "reference interfaces are available for cubes and dumbbell shapes only"
    )


@dataclass(frozen=True)
class SweepRecord:
    """One bisection run inside a consistency sweep."""

    n: int
    eps: float
    seed: int
    energy: float
    connected: bool
    agreement: float
    tl1_distance: float


@dataclass(frozen=True)
class SweepRun:
    """A sweep record together with the cloud and labels that produced it."""

    record: SweepRecord
    points: np.ndarray
    labels: np.ndarray


def sweep_reference(domain: Domain, density, reference_size: int = 2000):
    """Fixed discretization of the continuum minimizers for TL1 scoring.

    Returns the reference measure and the indicator label vectors of
    each flat interface over its support.  The reference cloud uses a
    fixed internal seed so every sweep scores against the same points.
    """
    reference = sample_iid(domain, density, reference_size, seed=715517)
    partitions = reference_partitions(domain, reference.points)
    return DiscreteMeasure.uniform_on(reference.points), partitions


def sweep_run(
    domain: Domain,
    density,
    profile,
    n: int,
    eps: float,
    seed: int,
    reference,
    restarts: int = 32,
) -> SweepRun:
    """Sample one cloud, bisect it, and score it against the reference.

    Records the cut energy, graph connectivity, the best label agreement
    with a flat interface, and the smallest TL1 distance between the
    computed indicator and a reference interface indicator over all
    interface choices and label identifications.
    """
    from .graph import build_graph

    ref_measure, ref_partitions = reference
    cloud = sample_iid(domain, density, n, seed=seed)
    graph = build_graph(cloud, profile, eps)
    result = local_search_bisection(graph, seed=seed, restarts=restarts)
    score = max(
        agreement(result.labels, part)
        for part in reference_partitions(domain, cloud.points)
    )
    measure = DiscreteMeasure.uniform_on(cloud.points)
    best_tl1 = np.inf
    for part in ref_partitions:
        ref_lifted = LiftedFunction(ref_measure, part.astype(float))
        for values in (result.labels, ~result.labels):
            dist, _ = tlp_distance(
                LiftedFunction(measure, values.astype(float)), ref_lifted, p=1
            )
            best_tl1 = min(best_tl1, dist)
    record = SweepRecord(
        n=n,
        eps=eps,
        seed=seed,
        energy=result.energy,
        connected=is_connected(graph),
        agreement=score,
        tl1_distance=float(best_tl1),
    )
    return SweepRun(record=record, points=cloud.points, labels=result.labels)


def consistency_sweep(
    domain: Domain,
    density,
    profile,
    n_values: list[int],
    eps_of_n,
    seeds: list[int],
    restarts: int = 32,
    reference_size: int = 2000,
) -> list[SweepRecord]:
    """Bisect sampled graphs and compare against the flat interface.

    For each cloud size and seed the sweep samples points, builds the
    geometric graph at the scale ``eps_of_n(n)``, runs the local search,
    and records the cut energy, graph connectivity, and the agreement
    and TL1 scores of ``sweep_run``.
    """
    reference = sweep_reference(domain, density, reference_size)
    records = []
    for n in n_values:
        eps = float(eps_of_n(n))
        for seed in seeds:
            run = sweep_run(
                domain, density, profile, n, eps, seed, reference, restarts=restarts
            )
            records.append(run.record)
    return records

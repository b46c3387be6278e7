"""Exact minimum-weight perfect matching of spacetime defects.

Defects pair with each other or with the open boundary.  Distances count
unit-weight events: spatial hops on the check graph plus one per layer.  Edges
at least as long as the two boundary weights combined are never needed, so
they are dropped; the remaining graph splits into small components that are
solved exactly by dynamic programming over subsets.  Components above the
size cap either raise :class:`MatchingCapacityError` or, on request, go to
the blossom algorithm from networkx, which is also exact.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _backend
from .correction import Correction, SectorCorrection
from .lattice import SECTORS, CodeLayout, build_layout
from .noise import SyndromeTensor

MAX_COMPONENT = 24
BOUNDARY = -1
LARGE_COMPONENT_POLICIES = ("error", "blossom")


class MatchingCapacityError(RuntimeError):
    """A connected component has more defects than the subset DP allows."""

    def __init__(self, size: int, cap: int):
        super().__init__(f"matching component of {size} defects exceeds the cap of {cap}")
        self.size = size
        self.cap = cap


class CheckGraph:
    """Shortest paths between the checks of one sector and to the boundary."""

    def __init__(self, layout: CodeLayout, sector: str):
        self.sector = sector
        per_qubit = layout.qubit_checks[sector]
        n = layout.num_checks(sector)
        adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        boundary_qubit = [-1] * n
        for q, checks in enumerate(per_qubit):
            if len(checks) == 2:
                a, b = checks
                adj[a].append((b, q))
                adj[b].append((a, q))
            elif len(checks) == 1 and boundary_qubit[checks[0]] < 0:
                boundary_qubit[checks[0]] = q
        for row in adj:
            row.sort()
        self.dist = np.full((n, n), -1, dtype=np.int64)
        self.parent = np.full((n, n), -1, dtype=np.int64)
        self.parent_qubit = np.full((n, n), -1, dtype=np.int64)
        for src in range(n):
            self.dist[src, src] = 0
            queue = deque([src])
            while queue:
                u = queue.popleft()
                for v, q in adj[u]:
                    if self.dist[src, v] < 0:
                        self.dist[src, v] = self.dist[src, u] + 1
                        self.parent[src, v] = u
                        self.parent_qubit[src, v] = q
                        queue.append(v)
        exits = [c for c in range(n) if boundary_qubit[c] >= 0]
        self.boundary_qubit = boundary_qubit
        self.boundary_dist = np.empty(n, dtype=np.int64)
        self.boundary_exit = np.empty(n, dtype=np.int64)
        for c in range(n):
            nearest = min(exits, key=lambda e: (self.dist[c, e], e))
            self.boundary_exit[c] = nearest
            self.boundary_dist[c] = self.dist[c, nearest] + 1

    def path_qubits(self, src: int, dst: int) -> list[int]:
        out = []
        node = dst
        while node != src:
            out.append(int(self.parent_qubit[src, node]))
            node = int(self.parent[src, node])
        return out

    def boundary_path_qubits(self, src: int) -> list[int]:
        exit_check = int(self.boundary_exit[src])
        return self.path_qubits(src, exit_check) + [self.boundary_qubit[exit_check]]


@lru_cache(maxsize=None)
def _graph(d: int, sector: str) -> CheckGraph:
    return CheckGraph(build_layout(d), sector)


def check_graph(layout: CodeLayout, sector: str) -> CheckGraph:
    return _graph(layout.d, sector)


@dataclass
class MatchingInstance:
    sector: str
    layers: int
    defects: list[tuple[int, int]]
    boundary: np.ndarray
    weights: np.ndarray


@dataclass
class Matching:
    """``pairs`` holds ``(i, j)`` defect indices, ``j = BOUNDARY`` for boundary pairings."""

    pairs: list[tuple[int, int]]
    weight: int


def build_matching_instance(layout: CodeLayout, syndrome: SyndromeTensor, sector: str) -> MatchingInstance:
    graph = check_graph(layout, sector)
    defects = syndrome.defects(sector)
    checks = np.array([c for c, _ in defects], dtype=np.int64)
    layers = np.array([t for _, t in defects], dtype=np.int64)
    weights = graph.dist[np.ix_(checks, checks)] + np.abs(layers[:, None] - layers[None, :])
    return MatchingInstance(
        sector=sector,
        layers=syndrome.layers,
        defects=defects,
        boundary=graph.boundary_dist[checks].copy(),
        weights=np.ascontiguousarray(weights, dtype=np.int64),
    )


def _backtrack(dp, boundary, dist) -> list[tuple[int, int]]:
    n = len(boundary)
    mask = (1 << n) - 1
    pairs = []
    while mask:
        i = (mask & -mask).bit_length() - 1
        rest = mask ^ (1 << i)
        if dp[rest] + boundary[i] == dp[mask]:
            pairs.append((i, BOUNDARY))
            mask = rest
            continue
        for j in range(i + 1, n):
            if rest >> j & 1 and dp[rest ^ (1 << j)] + dist[i, j] == dp[mask]:
                pairs.append((i, j))
                mask = rest ^ (1 << j)
                break
        else:  # pragma: no cover - dp is self-consistent
            raise AssertionError("inconsistent matching table")
    return pairs


def _blossom(boundary: np.ndarray, weights: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-weight pairing of one component via a perfect matching on a doubled graph.

    Every defect ``i`` gets a private boundary node ``~i``; boundary nodes
    pair among themselves for free.
    """
    import networkx as nx

    n = len(boundary)
    top = int(weights.max(initial=0)) + int(boundary.max(initial=0)) + 1
    g = nx.Graph()
    for i in range(n):
        g.add_edge(i, n + i, weight=top - int(boundary[i]))
        for j in range(i + 1, n):
            if weights[i, j] < boundary[i] + boundary[j]:
                g.add_edge(i, j, weight=top - int(weights[i, j]))
            g.add_edge(n + i, n + j, weight=top)
    mate = nx.max_weight_matching(g, maxcardinality=True)
    pairs = []
    for a, b in mate:
        a, b = min(a, b), max(a, b)
        if a < n:
            pairs.append((a, BOUNDARY if b >= n else b))
    return sorted(pairs)


def solve_matching(
    instance: MatchingInstance,
    max_component: int = MAX_COMPONENT,
    backend: str | None = None,
    large_components: str = "error",
) -> Matching:
    """Globally minimum-weight pairing of all defects, boundary pairings allowed.

    Among optimal pairings found by the subset DP, the lowest-indexed
    unmatched defect prefers the boundary, then its lowest-indexed partner.
    Components larger than ``max_component`` raise
    :class:`MatchingCapacityError` unless ``large_components="blossom"``,
    in which case their tie-breaking is whatever networkx returns.
    """
    if large_components not in LARGE_COMPONENT_POLICIES:
        raise ValueError(f"large_components must be one of {', '.join(LARGE_COMPONENT_POLICIES)}")
    n = len(instance.defects)
    if n == 0:
        return Matching(pairs=[], weight=0)
    kernels = _backend.get_kernels(backend)
    B, W = instance.boundary, instance.weights
    keep = W < B[:, None] + B[None, :]
    np.fill_diagonal(keep, False)
    n_comp, labels = connected_components(csr_matrix(keep), directed=False)
    pairs: list[tuple[int, int]] = []
    total = 0
    for comp in range(n_comp):
        members = np.nonzero(labels == comp)[0]
        sub_b = np.ascontiguousarray(B[members])
        sub_w = np.ascontiguousarray(W[np.ix_(members, members)])
        if len(members) > max_component:
            if large_components == "error":
                raise MatchingCapacityError(len(members), max_component)
            local = _blossom(sub_b, sub_w)
        else:
            dp = kernels.subset_dp(sub_b, sub_w)
            local = _backtrack(dp, sub_b, sub_w)
        for i, j in local:
            total += int(sub_b[i]) if j == BOUNDARY else int(sub_w[i, j])
            pairs.append((int(members[i]), BOUNDARY if j == BOUNDARY else int(members[j])))
    pairs.sort()
    return Matching(pairs=pairs, weight=total)


def matching_weight(instance: MatchingInstance, pairs) -> int:
    total = 0
    for i, j in pairs:
        total += int(instance.boundary[i]) if j == BOUNDARY else int(instance.weights[i, j])
    return total


def correction_from_matching(layout: CodeLayout, instance: MatchingInstance, matching: Matching) -> SectorCorrection:
    """Realise every matched pair as a shortest chain of events.

    A pair ``(c1, t1), (c2, t2)`` with ``t1 <= t2`` becomes readout errors of
    ``c1`` across the gaps ``t1 .. t2 - 1`` plus data errors along a shortest
    path from ``c1`` to ``c2`` in layer ``t2``.
    """
    graph = check_graph(layout, instance.sector)
    sc = SectorCorrection.empty(layout, instance.sector, instance.layers)
    for i, j in matching.pairs:
        c1, t1 = instance.defects[i]
        if j == BOUNDARY:
            for q in graph.boundary_path_qubits(c1):
                sc.data[t1, q] ^= 1
            continue
        c2, t2 = instance.defects[j]
        if t1 > t2:
            c1, t1, c2, t2 = c2, t2, c1, t1
        for g in range(t1, t2):
            sc.meas[g, c1] ^= 1
        for q in graph.path_qubits(c1, c2):
            sc.data[t2, q] ^= 1
    return sc


def decode_mwpm(
    layout: CodeLayout,
    syndrome: SyndromeTensor,
    max_component: int = MAX_COMPONENT,
    large_components: str = "error",
) -> tuple[Correction, int]:
    """Both sectors decoded independently; returns the correction and total weight."""
    sectors = {}
    weight = 0
    for sector in SECTORS:
        inst = build_matching_instance(layout, syndrome, sector)
        matching = solve_matching(inst, max_component, large_components=large_components)
        weight += matching.weight
        sectors[sector] = correction_from_matching(layout, inst, matching)
    return Correction(sectors=sectors, satisfied=True), weight

"""Network graph: DC coordinates, links with residual bandwidth, path discovery.

Residual bandwidth is tracked in integer units of 0.001 Mbps so that any
balanced reserve/release sequence restores the exact initial state. Path
discovery is depth-first enumeration over simple paths with the usual
length-bound prune, seeded by a Dijkstra pass on the bandwidth-feasible
subgraph so the bound is tight from the start.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

C_FIBER_KM_S = 2.0e5  # light in fiber
STEP_SECONDS = 1.0e-5  # one step = 0.01 ms

BW_QUANTUM = 1000  # internal residual units per Mbps


def to_milli(mbps: float) -> int:
    return int(round(mbps * BW_QUANTUM))


@dataclass(frozen=True)
class PathResult:
    """A simple path: ordered hop ids plus total length in km."""

    hops: tuple[int, ...]
    length_km: float

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(self.hops[i], self.hops[i + 1]) for i in range(len(self.hops) - 1)]


class TopologyError(ValueError):
    """Bad node id or a reserve/release that violates link capacity."""


class NetworkGraph:
    """Undirected graph of DCs with per-edge capacity and residual bandwidth.

    bw_version increments on every residual change; callers can use it to
    skip repeating a path search whose inputs cannot have changed.
    """

    def __init__(self, nodes, edges, *, propagation=True, c_fiber_km_s=C_FIBER_KM_S):
        """nodes: [(dc_id, x_km, y_km)], ids must be 0..n-1.

        edges: [(m, n, capacity_mbps)] or [(m, n, capacity_mbps, distance_km)];
        an explicit distance overrides the Euclidean one for that edge.
        """
        ids = [nid for nid, _, _ in nodes]
        if sorted(ids) != list(range(len(nodes))):
            raise TopologyError("node ids must be contiguous 0..n-1")
        self.n = len(nodes)
        self.coords = {nid: (float(x), float(y)) for nid, x, y in nodes}
        self.adj: dict[int, list[int]] = {nid: [] for nid in range(self.n)}
        self._capacity: dict[tuple[int, int], int] = {}
        self._residual: dict[tuple[int, int], int] = {}
        self._dist: dict[tuple[int, int], float] = {}
        self.propagation = propagation
        self.c_fiber_km_s = c_fiber_km_s
        self.bw_version = 0
        for edge in edges:
            m, n, cap = edge[0], edge[1], edge[2]
            dist_km = edge[3] if len(edge) > 3 and edge[3] is not None else None
            if m not in self.coords or n not in self.coords:
                raise TopologyError(f"edge ({m},{n}) references unknown node")
            if m == n:
                raise TopologyError("self-loop edges are not allowed")
            key = (min(m, n), max(m, n))
            if key in self._capacity:
                raise TopologyError(f"duplicate edge {key}")
            self._capacity[key] = to_milli(cap)
            self._residual[key] = to_milli(cap)
            self._dist[key] = float(dist_km) if dist_km is not None else self.euclidean(m, n)
            self.adj[m].append(n)
            self.adj[n].append(m)
        for nid in self.adj:
            self.adj[nid].sort()

    # -- geometry ----------------------------------------------------------

    def euclidean(self, m: int, n: int) -> float:
        (xm, ym), (xn, yn) = self.coords[m], self.coords[n]
        return math.hypot(xm - xn, ym - yn)

    def distance(self, m: int, n: int) -> float:
        if m == n:
            return 0.0
        key = (min(m, n), max(m, n))
        if key in self._dist:
            return self._dist[key]
        return self.euclidean(m, n)

    def distance_matrix(self):
        return [[self.distance(m, n) for n in range(self.n)] for m in range(self.n)]

    # -- bandwidth ---------------------------------------------------------

    def edge_keys(self) -> list[tuple[int, int]]:
        return sorted(self._capacity)

    def capacity_mbps(self, m: int, n: int) -> float:
        return self._capacity[(min(m, n), max(m, n))] / BW_QUANTUM

    def residual_mbps(self, m: int, n: int) -> float:
        return self._residual[(min(m, n), max(m, n))] / BW_QUANTUM

    def residual_snapshot(self) -> dict[tuple[int, int], int]:
        return dict(self._residual)

    def check_residuals(self) -> None:
        for key, res in self._residual.items():
            if res < 0 or res > self._capacity[key]:
                raise TopologyError(f"edge {key} residual {res} out of [0, capacity]")

    def reserve_bw(self, path: PathResult, bw_mbps: float) -> None:
        """Decrement residual by bw on every edge of path.

        The caller must have just verified feasibility; failure here means a
        policy or engine bug, not an expected runtime condition.
        """
        amount = to_milli(bw_mbps)
        if amount == 0 or len(path.hops) < 2:
            return
        edges = [(min(m, n), max(m, n)) for m, n in path.edges]
        for key in edges:
            if self._residual[key] < amount:
                raise TopologyError(f"reserve of {bw_mbps} Mbps exceeds residual on edge {key}")
        for key in edges:
            self._residual[key] -= amount
        self.bw_version += 1

    def release_bw(self, path: PathResult, bw_mbps: float) -> None:
        """Increment residual by bw on every edge of path (inverse of reserve)."""
        amount = to_milli(bw_mbps)
        if amount == 0 or len(path.hops) < 2:
            return
        edges = [(min(m, n), max(m, n)) for m, n in path.edges]
        for key in edges:
            if self._residual[key] + amount > self._capacity[key]:
                raise TopologyError(f"release of {bw_mbps} Mbps exceeds capacity on edge {key}")
        for key in edges:
            self._residual[key] += amount
        self.bw_version += 1

    # -- path discovery ------------------------------------------------------

    def _feasible(self, m: int, n: int, req_milli: int) -> bool:
        return self._residual[(min(m, n), max(m, n))] >= req_milli

    def _dijkstra_bound(self, src: int, dest: int, req_milli: int) -> float:
        """Shortest feasible-path length, or inf if unreachable."""
        dist = {src: 0.0}
        heap = [(0.0, src)]
        while heap:
            d, node = heapq.heappop(heap)
            if node == dest:
                return d
            if d > dist.get(node, math.inf):
                continue
            for nxt in self.adj[node]:
                if not self._feasible(node, nxt, req_milli):
                    continue
                nd = d + self.distance(node, nxt)
                if nd < dist.get(nxt, math.inf):
                    dist[nxt] = nd
                    heapq.heappush(heap, (nd, nxt))
        return math.inf

    def select_min_path(self, src: int, dest: int, req_bw: float, *, prune: bool = True):
        """Minimum-length simple path whose edges all have residual >= req_bw.

        Returns a PathResult or None. Ties between equal-length paths go to
        the lexicographically smallest hop sequence. Does not reserve.
        """
        if src not in self.coords or dest not in self.coords:
            raise TopologyError(f"unknown dc id in ({src}, {dest})")
        if src == dest:
            return PathResult((src,), 0.0)
        req_milli = to_milli(req_bw)

        best_len = math.inf
        best_hops = None
        if prune:
            best_len = self._dijkstra_bound(src, dest, req_milli)
            if math.isinf(best_len):
                return None

        visited = [False] * self.n
        visited[src] = True
        hops = [src]

        def dfs(node: int, length: float) -> None:
            nonlocal best_len, best_hops
            if prune and length > best_len:
                return
            if node == dest:
                if length < best_len or (
                    length == best_len and (best_hops is None or tuple(hops) < best_hops)
                ):
                    best_len = length
                    best_hops = tuple(hops)
                return
            for nxt in self.adj[node]:
                if visited[nxt] or not self._feasible(node, nxt, req_milli):
                    continue
                visited[nxt] = True
                hops.append(nxt)
                dfs(nxt, length + self.distance(node, nxt))
                hops.pop()
                visited[nxt] = False

        dfs(src, 0.0)
        if best_hops is None:
            return None
        return PathResult(best_hops, best_len)

    def propagation_steps(self, path: PathResult) -> int:
        """Propagation delay of a path in whole steps; 0 when disabled."""
        if not self.propagation or len(path.hops) < 2:
            return 0
        return math.ceil((path.length_km / self.c_fiber_km_s) / STEP_SECONDS)


def circle_topology(n, radius_km, edge_prob, seed, *, capacity_mbps=500.0,
                    propagation=True) -> NetworkGraph:
    """n nodes evenly spaced on a circle; ring edges always present, chords
    added with probability edge_prob (seeded). Guarantees connectivity."""
    import numpy as np

    if n < 1:
        raise TopologyError("need at least one node")
    nodes = []
    for i in range(n):
        angle = 2.0 * math.pi * i / n
        nodes.append((i, radius_km * math.cos(angle), radius_km * math.sin(angle)))
    rng = np.random.default_rng([int(seed), 0x702])
    edges = []
    seen = set()
    for i in range(n):
        j = (i + 1) % n
        key = (min(i, j), max(i, j))
        if key not in seen and i != j:
            seen.add(key)
            edges.append((key[0], key[1], capacity_mbps))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) in seen:
                continue
            if rng.random() < edge_prob:
                seen.add((i, j))
                edges.append((i, j, capacity_mbps))
    return NetworkGraph(nodes, edges, propagation=propagation)

"""Network graph, traffic demands and candidate route sets.

Graphs are undirected, simple and stored as parallel numpy arrays indexed by
edge. Routes are tuples of edge indices, which is the only form the optimizers
ever touch.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._rng import as_generator, stage_rng
from .exceptions import DisconnectedError, GenerationError, PreconditionError

LATENCY_PER_KM = 4.9
KEYRATE_PREFACTOR = 100.0
KEYRATE_LENGTH_SCALE = 25.0
KEYRATE_NOISE = 2.0
KEYRATE_FLOOR = 0.1
CAPACITY_MARGIN_RANGE = (10.0, 30.0)
RISK_RANGE = (0.05, 0.4)
LENGTH_RANGE = (5.0, 40.0)
FLOW_RANGE = (5.0, 20.0)
MAX_GENERATION_ATTEMPTS = 1000

Route = tuple  # tuple[int, ...] of edge indices
CandidateRoutes = list  # list[list[Route]], one list of exactly q routes per demand


@dataclass(frozen=True)
class Link:
    u: int
    v: int
    length_km: float
    latency_us: float
    keyrate: float
    capacity: float
    risk: float

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.u, self.v)


@dataclass(frozen=True)
class Demand:
    source: int
    target: int
    flow: float

    def __post_init__(self):
        if self.source == self.target:
            raise PreconditionError(f"demand source and target coincide ({self.source})")
        if not self.flow > 0:
            raise PreconditionError(f"demand flow must be positive, got {self.flow}")


class NetworkGraph:
    """Undirected simple graph with per-edge QKD link observables.

    Parameters
    ----------
    n_nodes : int
    u, v : array-like of int
        Edge endpoints. Stored with ``u < v``.
    length, latency, keyrate, capacity, risk : array-like of float
        Per-edge observables, all strictly positive.
    require_connected : bool
        Reject graphs that do not span all nodes.
    """

    def __init__(self, n_nodes, u, v, length, latency, keyrate, capacity, risk,
                 require_connected=True):
        self.n_nodes = int(n_nodes)
        if self.n_nodes < 2:
            raise PreconditionError("a network needs at least 2 nodes")
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        self.u = np.minimum(u, v)
        self.v = np.maximum(u, v)
        self.length = np.asarray(length, dtype=float)
        self.latency = np.asarray(latency, dtype=float)
        self.keyrate = np.asarray(keyrate, dtype=float)
        self.capacity = np.asarray(capacity, dtype=float)
        self.risk = np.asarray(risk, dtype=float)
        m = self.u.shape[0]
        for name in ("v", "length", "latency", "keyrate", "capacity", "risk"):
            if getattr(self, name).shape != (m,):
                raise PreconditionError(f"edge array {name!r} has shape "
                                        f"{getattr(self, name).shape}, expected ({m},)")
        if m == 0:
            raise PreconditionError("a network needs at least one edge")
        if np.any(self.u == self.v):
            raise PreconditionError("self-loops are not allowed")
        if self.u.min() < 0 or self.v.max() >= self.n_nodes:
            raise PreconditionError("edge endpoint out of node range")
        for name in ("length", "latency", "keyrate", "capacity", "risk"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise PreconditionError(f"edge {name} values must be finite and > 0")

        self.edge_index = {}
        for i, (a, b) in enumerate(zip(self.u.tolist(), self.v.tolist())):
            if (a, b) in self.edge_index:
                raise PreconditionError(f"duplicate edge ({a}, {b})")
            self.edge_index[(a, b)] = i
        adjacency = [[] for _ in range(self.n_nodes)]
        for (a, b), i in self.edge_index.items():
            adjacency[a].append((b, i))
            adjacency[b].append((a, i))
        self.adjacency = [sorted(nbrs) for nbrs in adjacency]
        if require_connected and not self.is_connected():
            raise DisconnectedError("network graph is not connected")

    @property
    def n_edges(self) -> int:
        return int(self.u.shape[0])

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.n_edges / self.n_nodes

    def link(self, i: int) -> Link:
        return Link(int(self.u[i]), int(self.v[i]), float(self.length[i]),
                    float(self.latency[i]), float(self.keyrate[i]),
                    float(self.capacity[i]), float(self.risk[i]))

    @property
    def links(self) -> list[Link]:
        return [self.link(i) for i in range(self.n_edges)]

    def edge_between(self, a: int, b: int) -> int:
        return self.edge_index[(min(a, b), max(a, b))]

    def is_connected(self) -> bool:
        return _is_connected(self.n_nodes, self.u, self.v)

    def nodes_to_route(self, nodes: Sequence[int]) -> Route:
        return tuple(self.edge_between(a, b) for a, b in zip(nodes[:-1], nodes[1:]))

    def route_to_nodes(self, route: Sequence[int], source: int) -> list[int]:
        """Walk ``route`` from ``source`` and return the visited node sequence."""
        nodes = [int(source)]
        for e in route:
            a, b = int(self.u[e]), int(self.v[e])
            if nodes[-1] == a:
                nodes.append(b)
            elif nodes[-1] == b:
                nodes.append(a)
            else:
                raise PreconditionError(f"edge {e} does not continue a path at node {nodes[-1]}")
        return nodes

    def __eq__(self, other):
        if not isinstance(other, NetworkGraph):
            return NotImplemented
        return self.n_nodes == other.n_nodes and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("u", "v", "length", "latency", "keyrate", "capacity", "risk"))

    __hash__ = None

    def __repr__(self):
        return f"NetworkGraph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


def _is_connected(n, u, v) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = n
    for a, b in zip(np.asarray(u).tolist(), np.asarray(v).tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            components -= 1
    return components == 1


def generate_network(n, k, seed, length_range=LENGTH_RANGE, *,
                     keyrate_noise=KEYRATE_NOISE, keyrate_floor=KEYRATE_FLOOR,
                     max_attempts=MAX_GENERATION_ATTEMPTS) -> NetworkGraph:
    """Sample a connected G(n, m) graph with ``m = round(n*k/2)`` and QKD link data.

    Edges are drawn uniformly without replacement from all node pairs; the
    draw is repeated until the graph is connected. Link observables follow
    ``tau = 4.9*l``, ``r = max(100*exp(-l/25) + eta, floor)`` with
    ``eta ~ U(-noise, noise)``, ``c = r + U(10, 30)`` and ``rho ~ U(0.05, 0.4)``.
    """
    n = int(n)
    if n < 2:
        raise PreconditionError(f"need n >= 2 nodes, got {n}")
    m = int(math.floor(n * k / 2.0 + 0.5))
    max_m = n * (n - 1) // 2
    if m < n - 1:
        raise PreconditionError(
            f"mean degree k={k} gives m={m} edges, fewer than the n-1={n - 1} a connected graph needs")
    if m > max_m:
        raise PreconditionError(f"mean degree k={k} gives m={m} edges, more than the {max_m} node pairs")
    lo, hi = map(float, length_range)
    if not 0 < lo <= hi:
        raise PreconditionError(f"invalid length range {length_range}")

    rng = as_generator(seed)
    pair_u, pair_v = np.triu_indices(n, 1)
    for _ in range(max_attempts):
        chosen = np.sort(rng.choice(max_m, size=m, replace=False))
        u, v = pair_u[chosen], pair_v[chosen]
        if _is_connected(n, u, v):
            break
    else:
        raise GenerationError(
            f"no connected graph with n={n}, m={m} after {max_attempts} attempts; increase k")

    length = rng.uniform(lo, hi, size=m)
    latency = LATENCY_PER_KM * length
    eta = rng.uniform(-keyrate_noise, keyrate_noise, size=m)
    keyrate = np.maximum(KEYRATE_PREFACTOR * np.exp(-length / KEYRATE_LENGTH_SCALE) + eta,
                         keyrate_floor)
    capacity = keyrate + rng.uniform(*CAPACITY_MARGIN_RANGE, size=m)
    risk = rng.uniform(*RISK_RANGE, size=m)
    return NetworkGraph(n, u, v, length, latency, keyrate, capacity, risk)


def generate_demands(g: NetworkGraph, n_demands, seed, flow_range=FLOW_RANGE) -> list[Demand]:
    n_demands = int(n_demands)
    if n_demands < 1:
        raise PreconditionError(f"need at least one demand, got {n_demands}")
    lo, hi = map(float, flow_range)
    if not 0 < lo <= hi:
        raise PreconditionError(f"invalid flow range {flow_range}")
    rng = as_generator(seed)
    demands = []
    for _ in range(n_demands):
        s = int(rng.integers(g.n_nodes))
        t = int(rng.integers(g.n_nodes - 1))
        if t >= s:
            t += 1
        demands.append(Demand(s, t, float(rng.uniform(lo, hi))))
    return demands


def _dijkstra(g, weights, source, target, banned_nodes=frozenset(), banned_edges=frozenset()):
    """Cheapest ``source -> target`` node path; equal costs go to the smallest node sequence.

    Heap keys are ``(cost, path)``, so among equal-cost labels the
    lexicographically smaller path is settled first. Returns ``(cost, path)``
    or ``None`` when the target is unreachable.
    """
    heap = [(0.0, (source,))]
    settled = set()
    while heap:
        cost, path = heapq.heappop(heap)
        node = path[-1]
        if node in settled:
            continue
        settled.add(node)
        if node == target:
            return cost, path
        for nbr, e in g.adjacency[node]:
            if nbr in settled or nbr in banned_nodes or e in banned_edges:
                continue
            w = 1.0 if weights is None else weights[e]
            heapq.heappush(heap, (cost + w, path + (nbr,)))
    return None


def _check_nodes(g, a, b):
    for x in (a, b):
        if not 0 <= x < g.n_nodes:
            raise PreconditionError(f"node {x} out of range [0, {g.n_nodes})")
    if a == b:
        raise PreconditionError(f"source and target coincide ({a})")


def shortest_path(g: NetworkGraph, a, b, weights=None) -> Route:
    """Minimum-weight ``a -> b`` route (edge indices); ``weights=None`` counts hops."""
    a, b = int(a), int(b)
    _check_nodes(g, a, b)
    w = None if weights is None else np.asarray(weights, dtype=float).tolist()
    found = _dijkstra(g, w, a, b)
    if found is None:
        raise DisconnectedError(f"no path between nodes {a} and {b}")
    return g.nodes_to_route(found[1])


def unweighted_shortest_path(g: NetworkGraph, a, b) -> Route:
    return shortest_path(g, a, b, weights=None)


def route_cost(route: Iterable[int], weights) -> float:
    return math.fsum(weights[e] for e in route)


def k_shortest_paths(g: NetworkGraph, a, b, k, weights=None) -> list[list[int]]:
    """Yen's algorithm: up to ``k`` loopless ``a -> b`` node paths in cost order."""
    a, b = int(a), int(b)
    _check_nodes(g, a, b)
    w = None if weights is None else np.asarray(weights, dtype=float).tolist()
    first = _dijkstra(g, w, a, b)
    if first is None:
        raise DisconnectedError(f"no path between nodes {a} and {b}")

    def cost_of(path):
        return math.fsum(1.0 if w is None else w[g.edge_between(x, y)]
                         for x, y in zip(path[:-1], path[1:]))

    accepted = [first[1]]
    seen = {first[1]}
    candidates = []
    while len(accepted) < k:
        last = accepted[-1]
        for i in range(len(last) - 1):
            root = last[:i + 1]
            banned_edges = {g.edge_between(p[i], p[i + 1])
                            for p in accepted if len(p) > i + 1 and p[:i + 1] == root}
            found = _dijkstra(g, w, last[i], b, frozenset(root[:-1]), banned_edges)
            if found is None:
                continue
            path = root[:-1] + found[1]
            if path not in seen:
                seen.add(path)
                heapq.heappush(candidates, (cost_of(path), path))
        if not candidates:
            break
        accepted.append(heapq.heappop(candidates)[1])
    return [list(p) for p in accepted]


def generate_candidate_routes(g: NetworkGraph, demands: Sequence[Demand], q) -> CandidateRoutes:
    """Exactly ``q`` latency-ranked loopless routes per demand.

    Demands with fewer than ``q`` simple paths are padded by repeating the
    last path found.
    """
    q = int(q)
    if q < 1:
        raise PreconditionError(f"need q >= 1 candidate paths, got {q}")
    routes = []
    for d in demands:
        paths = k_shortest_paths(g, d.source, d.target, q, weights=g.latency)
        paths += [paths[-1]] * (q - len(paths))
        routes.append([g.nodes_to_route(p) for p in paths])
    return routes


def check_routes(g: NetworkGraph, demands: Sequence[Demand], routes: CandidateRoutes) -> None:
    """Raise if ``routes`` is not a rectangular set of valid simple paths."""
    if len(routes) != len(demands):
        raise PreconditionError(f"{len(routes)} route lists for {len(demands)} demands")
    if not routes:
        raise PreconditionError("empty route set")
    q = len(routes[0])
    for a, (d, rlist) in enumerate(zip(demands, routes)):
        if len(rlist) != q or q == 0:
            raise PreconditionError(f"demand {a} has {len(rlist)} routes, expected {q}")
        for p, route in enumerate(rlist):
            if len(route) == 0 or any(not 0 <= e < g.n_edges for e in route):
                raise PreconditionError(f"route ({a}, {p}) has invalid edge indices")
            nodes = g.route_to_nodes(route, d.source)
            if nodes[-1] != d.target or len(set(nodes)) != len(nodes):
                raise PreconditionError(f"route ({a}, {p}) is not a simple "
                                        f"{d.source}->{d.target} path")


@dataclass
class RoutingProblem:
    """A network, its demands and the candidate routes of every demand."""

    graph: NetworkGraph
    demands: list
    routes: list

    def __post_init__(self):
        check_routes(self.graph, self.demands, self.routes)

    @property
    def n_demands(self) -> int:
        return len(self.demands)

    @property
    def n_paths(self) -> int:
        return len(self.routes[0])

    @property
    def flows(self) -> np.ndarray:
        return np.array([d.flow for d in self.demands], dtype=float)

    @classmethod
    def from_network(cls, g, demands, q):
        return cls(g, list(demands), generate_candidate_routes(g, demands, q))


def generate_problem(n, k, n_demands, q, seed, *, length_range=LENGTH_RANGE,
                     flow_range=FLOW_RANGE) -> RoutingProblem:
    """Graph, demands and routes from one root seed (stages ``graph`` and ``demands``)."""
    g = generate_network(n, k, stage_rng(seed, "graph"), length_range)
    demands = generate_demands(g, n_demands, stage_rng(seed, "demands"), flow_range)
    return RoutingProblem.from_network(g, demands, q)

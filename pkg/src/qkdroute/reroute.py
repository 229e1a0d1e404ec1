"""Minimum-marginal-congestion routing of one extra flow over a fixed load state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import PreconditionError
from .hamiltonian import HamiltonianWeights
from .netmodel import NetworkGraph, Route, route_cost, shortest_path, unweighted_shortest_path

DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class MarginalWeights:
    lambda_marg: float
    marg_overload_weight: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not (self.lambda_marg >= 0 and self.marg_overload_weight >= 0):
            raise PreconditionError("marginal weights must be >= 0")
        if not self.epsilon > 0:
            raise PreconditionError(f"epsilon must be > 0, got {self.epsilon}")

    @classmethod
    def from_hamiltonian(cls, w: HamiltonianWeights, epsilon=DEFAULT_EPSILON):
        return cls(w.lambda_cong, w.mu_cap, epsilon)


def marginal_penalty(x, capacity, mw: MarginalWeights):
    over = np.maximum(0.0, np.subtract(x, capacity))
    return mw.lambda_marg * np.square(x) + mw.marg_overload_weight * np.square(over)


def marginal_edge_cost(load, capacity, f_new, mw: MarginalWeights):
    """Extra marginal energy of pushing ``f_new`` more flow through a link, plus epsilon."""
    load = np.asarray(load, dtype=float)
    return (marginal_penalty(load + f_new, capacity, mw)
            - marginal_penalty(load, capacity, mw) + mw.epsilon)


@dataclass
class RerouteResult:
    source: int
    target: int
    flow: float
    path_cong: Route
    path_topo: Route
    nodes_cong: list
    nodes_topo: list
    cost_cong: float
    cost_topo: float
    reduction: float  # percent
    updated_load: np.ndarray

    def to_dict(self) -> dict:
        return {
            "from": self.source,
            "to": self.target,
            "flow": self.flow,
            "congestion_path": {"nodes": self.nodes_cong, "edges": list(self.path_cong)},
            "topological_path": {"nodes": self.nodes_topo, "edges": list(self.path_topo)},
            "C_cong": self.cost_cong,
            "C_topo": self.cost_topo,
            "R_percent": self.reduction,
            "updated_load": self.updated_load.tolist(),
        }


def min_congestion_route(g: NetworkGraph, load, source, target, f_new,
                         mw: MarginalWeights) -> RerouteResult:
    """Route ``f_new`` from ``source`` to ``target`` by least marginal congestion cost.

    Also prices the hop-count shortest path under the same edge costs and
    reports the relative saving ``R = 100*(1 - C_cong/C_topo)``. The input
    ``load`` is left untouched; ``updated_load`` is a new array.
    """
    load = np.asarray(load, dtype=float)
    if load.shape != (g.n_edges,):
        raise PreconditionError(f"load has shape {load.shape}, expected ({g.n_edges},)")
    if np.any(load < 0):
        raise PreconditionError("link loads must be >= 0")
    if not f_new > 0:
        raise PreconditionError(f"new flow must be > 0, got {f_new}")
    source, target = int(source), int(target)
    weights = marginal_edge_cost(load, g.capacity, f_new, mw)
    path_cong = shortest_path(g, source, target, weights)
    path_topo = unweighted_shortest_path(g, source, target)
    cost_cong = route_cost(path_cong, weights)
    cost_topo = route_cost(path_topo, weights)
    if cost_topo < cost_cong:
        # equal-cost paths whose rounded sums differ in the last bit
        path_cong, cost_cong = path_topo, cost_topo
    updated = load.copy()
    updated[list(path_cong)] += f_new
    return RerouteResult(source, target, float(f_new), path_cong, path_topo,
                         g.route_to_nodes(path_cong, source), g.route_to_nodes(path_topo, source),
                         cost_cong, cost_topo, 100.0 * (1.0 - cost_cong / cost_topo), updated)

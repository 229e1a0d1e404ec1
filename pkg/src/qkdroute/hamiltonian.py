"""Routing energy: route observables, local energies, link penalties.

The energy of a routing state ``p`` (one route index per demand, 0-based) is

    H(p) = sum_a h[a, p_a] + sum_e Phi_e(load_e)

with ``Phi_e(x) = lambda_cong*x**2 + mu_cap*max(0, x - c_e)**2`` and ``load_e``
the total flow of all demands whose selected route crosses edge ``e``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import PreconditionError
from .netmodel import NetworkGraph, RoutingProblem


@dataclass(frozen=True)
class HamiltonianWeights:
    alpha_lat: float = 1.0
    beta_rate: float = 1.0
    gamma_risk: float = 0.5
    lambda_cong: float = 0.1
    mu_cap: float = 5.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (np.isfinite(value) and value >= 0):
                raise PreconditionError(f"weight {name} must be finite and >= 0, got {value}")

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}


@dataclass(frozen=True)
class RouteObservables:
    """Per-(demand, route) observables, arrays of shape ``(M, q)``."""

    latency: np.ndarray
    keyrate: np.ndarray
    capacity: np.ndarray
    risk: np.ndarray
    latency_norm: np.ndarray
    keyrate_norm: np.ndarray
    risk_norm: np.ndarray


def _normalize(x):
    top = x.max()
    # degenerate all-zero column stays zero instead of NaN
    return x / top if top > 0 else np.zeros_like(x)


def compute_route_observables(g: NetworkGraph, routes) -> RouteObservables:
    if not routes or not routes[0]:
        raise PreconditionError("empty route set")
    M, q = len(routes), len(routes[0])
    lat = np.empty((M, q))
    rate = np.empty((M, q))
    cap = np.empty((M, q))
    risk = np.empty((M, q))
    for a, rlist in enumerate(routes):
        for p, route in enumerate(rlist):
            idx = np.asarray(route, dtype=np.int64)
            lat[a, p] = g.latency[idx].sum()
            rate[a, p] = g.keyrate[idx].min()
            cap[a, p] = g.capacity[idx].min()
            risk[a, p] = g.risk[idx].sum()
    return RouteObservables(lat, rate, cap, risk, _normalize(lat), _normalize(rate),
                            _normalize(risk))


def local_energy(a, p, obs: RouteObservables, w: HamiltonianWeights, flow) -> float:
    """Energy of giving demand ``a`` route ``p``, ignoring other demands.

    The shortfall terms compare the flow with the raw route keyrate and
    capacity; only latency, keyrate and risk enter in normalized form.
    """
    rate_gap = max(0.0, flow - obs.keyrate[a, p])
    cap_gap = max(0.0, flow - obs.capacity[a, p])
    return float(w.alpha_lat * obs.latency_norm[a, p]
                 - w.beta_rate * obs.keyrate_norm[a, p]
                 + w.gamma_risk * obs.risk_norm[a, p]
                 + w.mu_cap * (rate_gap ** 2 + cap_gap ** 2))


def local_energy_table(obs: RouteObservables, w: HamiltonianWeights, flows) -> np.ndarray:
    f = np.asarray(flows, dtype=float)[:, None]
    rate_gap = np.maximum(0.0, f - obs.keyrate)
    cap_gap = np.maximum(0.0, f - obs.capacity)
    return (w.alpha_lat * obs.latency_norm
            - w.beta_rate * obs.keyrate_norm
            + w.gamma_risk * obs.risk_norm
            + w.mu_cap * (rate_gap ** 2 + cap_gap ** 2))


def link_penalty(x, capacity, w: HamiltonianWeights):
    """Congestion plus overload penalty of carrying load ``x`` on a link."""
    over = np.maximum(0.0, np.subtract(x, capacity))
    return w.lambda_cong * np.square(x) + w.mu_cap * np.square(over)


class LoadDelta(NamedTuple):
    """Sparse load change: ``load[edges] += amounts``."""

    edges: np.ndarray
    amounts: np.ndarray


class RoutingHamiltonian:
    """Energy evaluator bound to one routing problem and one set of weights.

    Route observables and the local energy table are computed once; states
    and load vectors are owned by the caller.
    """

    def __init__(self, problem: RoutingProblem, weights: HamiltonianWeights | None = None):
        self.problem = problem
        self.graph = problem.graph
        self.weights = weights if weights is not None else HamiltonianWeights()
        self.observables = compute_route_observables(problem.graph, problem.routes)
        self.flows = problem.flows
        self.capacity = problem.graph.capacity
        self.local = local_energy_table(self.observables, self.weights, self.flows)
        self.route_edges = [[np.asarray(r, dtype=np.int64) for r in rlist]
                            for rlist in problem.routes]

    @property
    def n_demands(self) -> int:
        return self.local.shape[0]

    @property
    def n_paths(self) -> int:
        return self.local.shape[1]

    @property
    def n_edges(self) -> int:
        return self.graph.n_edges

    def check_state(self, state) -> np.ndarray:
        state = np.asarray(state, dtype=np.int64)
        if state.shape != (self.n_demands,):
            raise PreconditionError(f"state has shape {state.shape}, expected ({self.n_demands},)")
        if state.min() < 0 or state.max() >= self.n_paths:
            raise PreconditionError(f"route indices must lie in [0, {self.n_paths})")
        return state

    def load(self, state) -> np.ndarray:
        load = np.zeros(self.n_edges)
        for a, p in enumerate(state):
            if p >= 0:
                load[self.route_edges[a][p]] += self.flows[a]
        return load

    def link_energy(self, load) -> float:
        return float(np.sum(link_penalty(load, self.capacity, self.weights)))

    def total_energy(self, state) -> tuple[float, np.ndarray]:
        """Exact energy of ``state`` and its freshly accumulated load vector."""
        state = self.check_state(state)
        load = self.load(state)
        local = float(np.sum(self.local[np.arange(self.n_demands), state]))
        return local + self.link_energy(load), load

    def partial_energy(self, assignment) -> tuple[float, np.ndarray]:
        """Energy of a partial assignment where ``-1`` marks unassigned demands."""
        assignment = np.asarray(assignment, dtype=np.int64)
        mask = assignment >= 0
        load = self.load(assignment)
        local = float(np.sum(self.local[np.flatnonzero(mask), assignment[mask]]))
        return local + self.link_energy(load), load

    def delta_energy(self, state, a, p_new, load) -> tuple[float, LoadDelta]:
        """Energy change of moving demand ``a`` to route ``p_new``.

        Only edges on the old or the new route are read; ``load`` is not
        modified. Commit with :meth:`apply`.
        """
        p_old = int(state[a])
        if p_new == p_old:
            raise PreconditionError("proposed route equals the current route")
        e_old = self.route_edges[a][p_old]
        e_new = self.route_edges[a][p_new]
        edges = np.union1d(e_old, e_new)
        amounts = self.flows[a] * (np.isin(edges, e_new).astype(float)
                                   - np.isin(edges, e_old).astype(float))
        before = load[edges]
        d_load = np.sum(link_penalty(before + amounts, self.capacity[edges], self.weights)
                        - link_penalty(before, self.capacity[edges], self.weights))
        d_local = self.local[a, p_new] - self.local[a, p_old]
        return float(d_local + d_load), LoadDelta(edges, amounts)

    @staticmethod
    def apply(load, delta: LoadDelta) -> None:
        load[delta.edges] += delta.amounts

    def flat_routes(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR layout of all routes: edges of ``(a, p)`` are ``edges[ptr[i]:ptr[i+1]]``, ``i = a*q + p``."""
        flat = [r for rlist in self.route_edges for r in rlist]
        ptr = np.zeros(len(flat) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(r) for r in flat])
        return ptr, np.concatenate(flat).astype(np.int64)

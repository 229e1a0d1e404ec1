import itertools

import networkx as nx
import numpy as np
import pytest

from qkdroute.hamiltonian import HamiltonianWeights, RoutingHamiltonian
from qkdroute.netmodel import Demand, NetworkGraph, RoutingProblem, generate_problem


def make_graph(n, edges, length=10.0, keyrate=50.0, capacity=60.0, risk=0.1):
    """Graph with uniform link data unless per-edge arrays are given."""
    m = len(edges)
    u, v = zip(*edges)

    def col(x):
        return np.full(m, float(x)) if np.isscalar(x) else np.asarray(x, dtype=float)

    length = col(length)
    return NetworkGraph(n, u, v, length, 4.9 * length, col(keyrate), col(capacity), col(risk))


def naive_energy(problem, w, state):
    """Straight-line evaluation of the routing energy from its definition."""
    g, routes, demands = problem.graph, problem.routes, problem.demands
    lat, rate, cap, risk = {}, {}, {}, {}
    for a, rlist in enumerate(routes):
        for p, r in enumerate(rlist):
            lat[a, p] = sum(g.latency[e] for e in r)
            rate[a, p] = min(g.keyrate[e] for e in r)
            cap[a, p] = min(g.capacity[e] for e in r)
            risk[a, p] = sum(g.risk[e] for e in r)
    lat_max, rate_max, risk_max = max(lat.values()), max(rate.values()), max(risk.values())
    total = 0.0
    load = [0.0] * g.n_edges
    for a, p in enumerate(state):
        f = demands[a].flow
        total += (w.alpha_lat * lat[a, p] / lat_max - w.beta_rate * rate[a, p] / rate_max
                  + w.gamma_risk * risk[a, p] / risk_max
                  + w.mu_cap * (max(0.0, f - rate[a, p]) ** 2 + max(0.0, f - cap[a, p]) ** 2))
        for e in routes[a][p]:
            load[e] += f
    for e in range(g.n_edges):
        total += w.lambda_cong * load[e] ** 2 + w.mu_cap * max(0.0, load[e] - g.capacity[e]) ** 2
    return total


def overload_free_energy(problem, w, state):
    """naive_energy without the global link-overload term."""
    load = np.zeros(problem.graph.n_edges)
    for a, p in enumerate(state):
        load[list(problem.routes[a][p])] += problem.demands[a].flow
    overload = np.sum(np.maximum(0.0, load - problem.graph.capacity) ** 2)
    return naive_energy(problem, w, state) - w.mu_cap * overload


def brute_force(problem, w):
    """Minimum of naive_energy over every state, ties to the lexicographically first."""
    best = None
    for state in itertools.product(range(len(problem.routes[0])), repeat=len(problem.demands)):
        e = naive_energy(problem, w, state)
        if best is None or e < best[1]:
            best = (state, e)
    return best


def to_networkx(g, weights=None):
    G = nx.Graph()
    G.add_nodes_from(range(g.n_nodes))
    for i in range(g.n_edges):
        G.add_edge(int(g.u[i]), int(g.v[i]), idx=i,
                   w=1.0 if weights is None else float(weights[i]))
    return G


def all_simple_routes(g, a, b):
    """Every simple a->b path as an edge-index tuple (networkx enumeration)."""
    G = to_networkx(g)
    return [tuple(G[x][y]["idx"] for x, y in zip(p[:-1], p[1:]))
            for p in nx.all_simple_paths(G, a, b)]


@pytest.fixture(scope="session")
def small_problem():
    return generate_problem(10, 3, 5, 3, seed=11)


@pytest.fixture(scope="session")
def default_weights():
    return HamiltonianWeights()


@pytest.fixture(scope="session")
def small_ham(small_problem, default_weights):
    return RoutingHamiltonian(small_problem, default_weights)


@pytest.fixture
def bridge_problem():
    """Two demands forced through one bottleneck link 0-1, with a longer bypass 0-2-3-1."""
    g = make_graph(4, [(0, 1), (0, 2), (1, 3), (2, 3)], capacity=30.0)
    demands = [Demand(0, 1, 20.0), Demand(0, 1, 20.0)]
    routes = [[(0,)], [(0,)]]
    return RoutingProblem(g, demands, routes)


def gibbs_zscores(problem, beta=1.0, n_steps=200_000, thin=20, seed=0):
    """|empirical - Gibbs| / sigma for every (demand, route) of a fixed-temperature chain.

    Only meaningful for separable weights (no congestion or capacity terms),
    where each demand's marginal is proportional to exp(-beta*h[a, p]).
    """
    from qkdroute.qmc import AnnealSchedule, anneal

    w = HamiltonianWeights(1.0, 1.0, 0.5, 0.0, 0.0)
    ham = RoutingHamiltonian(problem, w)
    res = anneal(ham, AnnealSchedule(beta, beta, n_steps, thin), seed, trace_states=True)
    samples = res.state_trace
    n = samples.shape[0]
    z = []
    for a in range(ham.n_demands):
        p_exact = np.exp(-beta * ham.local[a])
        p_exact /= p_exact.sum()
        freq = np.bincount(samples[:, a], minlength=ham.n_paths) / n
        sigma = np.sqrt(p_exact * (1 - p_exact) / n)
        z.extend(np.abs(freq - p_exact) / sigma)
    return np.array(z)


ACCEPTANCE = []


def record(criterion, ok, detail):
    """Log one acceptance line; the summary is printed at the end of the run."""
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)

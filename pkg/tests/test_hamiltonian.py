import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdroute import hamiltonian
from qkdroute.exceptions import PreconditionError
from qkdroute.hamiltonian import (
    HamiltonianWeights,
    RouteObservables,
    RoutingHamiltonian,
    _normalize,
    compute_route_observables,
    link_penalty,
    local_energy,
)
from qkdroute.netmodel import Demand, NetworkGraph, RoutingProblem, generate_problem

from conftest import make_graph, naive_energy

ZERO = HamiltonianWeights(0, 0, 0, 0, 0)


def two_edge_graph():
    return NetworkGraph(3, [0, 1], [1, 2], [10 / 4.9, 20 / 4.9], [10.0, 20.0], [50.0, 80.0],
                        [60.0, 90.0], [0.1, 0.2])


def test_route_observables_sum_and_min():
    obs = compute_route_observables(two_edge_graph(), [[(0, 1)]])
    assert obs.latency[0, 0] == 30.0
    assert obs.keyrate[0, 0] == 50.0
    assert obs.capacity[0, 0] == 60.0
    assert obs.risk[0, 0] == pytest.approx(0.3, rel=1e-15)


def test_single_route_normalizes_to_one():
    obs = compute_route_observables(two_edge_graph(), [[(0, 1)]])
    assert obs.latency_norm[0, 0] == obs.keyrate_norm[0, 0] == obs.risk_norm[0, 0] == 1.0


def test_normalization_divides_by_global_max():
    g = NetworkGraph(3, [0, 1], [1, 2], [1, 1], [30.0, 60.0], [1, 1], [1, 1], [0.1, 0.1])
    obs = compute_route_observables(g, [[(0,)], [(1,)]])
    np.testing.assert_array_equal(obs.latency_norm.ravel(), [0.5, 1.0])


def test_normalization_guard_for_zero_column():
    np.testing.assert_array_equal(_normalize(np.zeros((2, 3))), np.zeros((2, 3)))


def test_empty_route_set_rejected():
    with pytest.raises(PreconditionError):
        compute_route_observables(two_edge_graph(), [])


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_observable_invariants(seed):
    problem = generate_problem(12, 3, 4, 4, seed=seed)
    obs = compute_route_observables(problem.graph, problem.routes)
    for arr in (obs.latency_norm, obs.keyrate_norm, obs.risk_norm):
        assert arr.max() == 1.0 and arr.min() >= 0.0
    g = problem.graph
    for a, rlist in enumerate(problem.routes):
        for p, r in enumerate(rlist):
            assert all(obs.keyrate[a, p] <= g.keyrate[e] for e in r)
            assert all(obs.capacity[a, p] <= g.capacity[e] for e in r)


def _obs(lat=0.5, rate=7.0, cap=12.0):
    one = np.array([[1.0]])
    return RouteObservables(one * 30, one * rate, one * cap, one * 0.3,
                            one * lat, one * 0.25, one * 0.75)


def test_local_energy_zero_weights():
    assert local_energy(0, 0, _obs(), ZERO, 10.0) == 0.0


def test_local_energy_latency_only():
    assert local_energy(0, 0, _obs(lat=0.5), HamiltonianWeights(1, 0, 0, 0, 0), 3.0) == 0.5


def test_local_energy_shortfall_uses_raw_rate_and_capacity():
    w = HamiltonianWeights(0, 0, 0, 0, 2)
    assert local_energy(0, 0, _obs(rate=7.0, cap=12.0), w, 10.0) == 18.0


@pytest.mark.parametrize("x, expected", [(4.0, 32.0), (7.0, 110.0), (0.0, 0.0)])
def test_link_penalty(x, expected):
    w = HamiltonianWeights(0, 0, 0, 2, 3)
    assert link_penalty(x, 5.0, w) == expected


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0.1, 100), st.floats(0, 10), st.floats(0, 10))
def test_link_penalty_monotone_and_pure_congestion_below_capacity(x, dx, cap, lam, mu):
    w = HamiltonianWeights(0, 0, 0, lam, mu)
    assert link_penalty(x + dx, cap, w) >= link_penalty(x, cap, w)
    if x <= cap:
        assert link_penalty(x, cap, w) == pytest.approx(lam * x * x, rel=1e-15)


def test_total_energy_single_demand_zero_weights():
    problem = generate_problem(8, 3, 1, 2, seed=0)
    energy, load = RoutingHamiltonian(problem, ZERO).total_energy([0])
    assert energy == 0.0
    assert load.sum() == problem.demands[0].flow * len(problem.routes[0][0])


def test_total_energy_disjoint_routes_congestion():
    g = make_graph(5, [(0, 1), (1, 2), (3, 4), (2, 3)])
    problem = RoutingProblem(g, [Demand(0, 2, 3.0), Demand(3, 4, 5.0)], [[(0, 1)], [(2,)]])
    energy, _ = RoutingHamiltonian(problem, HamiltonianWeights(0, 0, 0, 1, 0)).total_energy([0, 0])
    assert energy == 3.0 ** 2 * 2 + 5.0 ** 2 * 1


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_total_energy_matches_naive_evaluator(seed):
    rng = np.random.default_rng(seed)
    problem = generate_problem(10, 3, 5, 3, seed=seed)
    w = HamiltonianWeights(*rng.uniform(0, 2, size=5))
    ham = RoutingHamiltonian(problem, w)
    state = rng.integers(3, size=5)
    assert ham.total_energy(state)[0] == pytest.approx(naive_energy(problem, w, state), rel=1e-12)


def test_identity_move_between_padded_duplicates():
    g = make_graph(3, [(0, 1), (1, 2), (0, 2)])
    problem = RoutingProblem.from_network(g, [Demand(0, 2, 4.0)], 4)
    ham = RoutingHamiltonian(problem)
    state = np.array([1])
    _, load = ham.total_energy(state)
    d_h, delta = ham.delta_energy(state, 0, 3, load)
    assert d_h == 0.0
    assert np.all(delta.amounts == 0.0)


def test_same_route_move_rejected(small_ham):
    state = np.zeros(5, dtype=int)
    with pytest.raises(PreconditionError):
        small_ham.delta_energy(state, 0, 0, small_ham.load(state))


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_delta_energy_matches_full_recompute_and_load_stays_exact(seed):
    rng = np.random.default_rng(seed)
    problem = generate_problem(30, 4, 10, 4, seed=seed)
    ham = RoutingHamiltonian(problem, HamiltonianWeights(1, 1, 0.5, 0.3, 2.0))
    state = rng.integers(4, size=10)
    energy, load = ham.total_energy(state)
    for _ in range(50):
        a = int(rng.integers(10))
        p_new = int((state[a] + rng.integers(1, 4)) % 4)
        d_h, delta = ham.delta_energy(state, a, p_new, load)
        moved = state.copy()
        moved[a] = p_new
        after, _ = ham.total_energy(moved)
        assert abs(d_h - (after - energy)) <= 1e-9 * max(1.0, abs(energy))
        if rng.random() < 0.5:
            ham.apply(load, delta)
            state, energy = moved, after
    np.testing.assert_allclose(load, ham.load(state), rtol=1e-12, atol=1e-12)


def test_delta_energy_touches_only_route_edges(small_ham, monkeypatch):
    sizes = []
    real = hamiltonian.link_penalty

    def counting(x, c, w):
        sizes.append(np.size(x))
        return real(x, c, w)

    monkeypatch.setattr(hamiltonian, "link_penalty", counting)
    state = np.zeros(5, dtype=int)
    load = small_ham.load(state)
    for a in range(5):
        for p in (1, 2):
            sizes.clear()
            small_ham.delta_energy(state, a, p, load)
            bound = len(small_ham.route_edges[a][0]) + len(small_ham.route_edges[a][p])
            assert sizes and max(sizes) <= bound


def test_state_validation(small_ham):
    with pytest.raises(PreconditionError):
        small_ham.total_energy([0, 0, 0])
    with pytest.raises(PreconditionError):
        small_ham.total_energy([0, 0, 0, 0, 3])


def test_partial_energy_of_empty_assignment_is_zero(small_ham):
    energy, load = small_ham.partial_energy([-1] * 5)
    assert energy == 0.0 and not load.any()


def test_negative_weight_rejected():
    with pytest.raises(PreconditionError):
        HamiltonianWeights(alpha_lat=-1)

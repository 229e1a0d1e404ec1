"""Metropolis annealing over routing states with sparse incremental updates.

Each step picks a demand uniformly, proposes one of its other ``q - 1`` route
slots uniformly, evaluates the energy change on the edges of the old and new
route only, and accepts with probability ``min(1, exp(-beta*dH))``. A uniform
draw is consumed only for uphill proposals. Random numbers are drawn from the
run's generator in blocks of ``CHUNK`` steps; unused uniforms of a block are
discarded.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._rng import as_generator, stage_seed
from .exceptions import PreconditionError
from .hamiltonian import RoutingHamiltonian

CHUNK = 1 << 16
RESYNC_EVERY = 1000


@dataclass(frozen=True)
class AnnealSchedule:
    beta0: float = 0.05
    beta_final: float = 20.0
    n_steps: int = 100_000
    n_save: int = 100

    def __post_init__(self):
        if not self.beta0 > 0:
            raise PreconditionError(f"beta0 must be > 0, got {self.beta0}")
        if not self.beta_final >= self.beta0:
            raise PreconditionError("beta_final must be >= beta0")
        if self.n_steps < 2:
            raise PreconditionError(f"n_steps must be >= 2, got {self.n_steps}")
        if self.n_save < 1:
            raise PreconditionError(f"n_save must be >= 1, got {self.n_save}")


def beta_at(t, schedule: AnnealSchedule) -> float:
    """Geometric inverse temperature at step ``t`` (1-based)."""
    return _geometric(t, schedule.n_steps, schedule.beta0, schedule.beta_final)


@njit(cache=True)
def _geometric(t, n, b0, bf):
    if t <= 1:
        return b0
    if t >= n:
        return bf
    return b0 * (bf / b0) ** ((t - 1) / (n - 1))


def metropolis_accept(delta_h, beta, u) -> bool:
    return delta_h <= 0 or u < math.exp(-beta * delta_h)


@dataclass
class QmcResult:
    best_state: np.ndarray
    best_energy: float
    best_load: np.ndarray
    history: np.ndarray  # columns: step, beta, H, H_best
    acceptance_count: int
    final_state: np.ndarray
    final_energy: float
    degenerate: bool = False
    state_trace: np.ndarray | None = field(default=None, repr=False)

    HISTORY_COLUMNS = ("step", "beta", "H", "H_best")


@njit(cache=True)
def _phi(x, c, lam, mu):
    over = x - c
    if over < 0.0:
        over = 0.0
    return lam * x * x + mu * over * over


@njit(cache=True)
def _full_energy(local, q, ptr, edges, flows, cap, lam, mu, state, load):
    load[:] = 0.0
    h = 0.0
    for a in range(state.shape[0]):
        i = a * q + state[a]
        h += local[i]
        for k in range(ptr[i], ptr[i + 1]):
            load[edges[k]] += flows[a]
    for e in range(load.shape[0]):
        h += _phi(load[e], cap[e], lam, mu)
    return h


@njit(cache=True, nogil=True)
def _anneal_chunk(local, q, ptr, edges, flows, cap, lam, mu,
                  state, load, best_state, best_load, energies, counters,
                  picks, uniforms, t_start, beta0, beta_final, n_steps, n_save,
                  history, trace, resync_every):
    # energies = [H, H_best]; counters = [accepted, since_resync, n_saved]
    u_ptr = 0
    for j in range(picks.shape[0]):
        t = t_start + j
        beta = _geometric(t, n_steps, beta0, beta_final)
        a = picks[j] // (q - 1)
        p_new = picks[j] % (q - 1)
        p_old = state[a]
        if p_new >= p_old:
            p_new += 1
        i_old = a * q + p_old
        i_new = a * q + p_new
        f = flows[a]
        dh = local[i_new] - local[i_old]
        for k in range(ptr[i_old], ptr[i_old + 1]):
            e = edges[k]
            shared = False
            for kk in range(ptr[i_new], ptr[i_new + 1]):
                if edges[kk] == e:
                    shared = True
                    break
            if not shared:
                dh += _phi(load[e] - f, cap[e], lam, mu) - _phi(load[e], cap[e], lam, mu)
        for k in range(ptr[i_new], ptr[i_new + 1]):
            e = edges[k]
            shared = False
            for kk in range(ptr[i_old], ptr[i_old + 1]):
                if edges[kk] == e:
                    shared = True
                    break
            if not shared:
                dh += _phi(load[e] + f, cap[e], lam, mu) - _phi(load[e], cap[e], lam, mu)

        accept = dh <= 0.0
        if not accept:
            accept = uniforms[u_ptr] < np.exp(-beta * dh)
            u_ptr += 1
        if accept:
            for k in range(ptr[i_old], ptr[i_old + 1]):
                load[edges[k]] -= f
            for k in range(ptr[i_new], ptr[i_new + 1]):
                load[edges[k]] += f
            state[a] = p_new
            energies[0] += dh
            counters[0] += 1
            counters[1] += 1
            if counters[1] >= resync_every:
                energies[0] = _full_energy(local, q, ptr, edges, flows, cap, lam, mu, state, load)
                counters[1] = 0
        if energies[0] < energies[1]:
            energies[1] = energies[0]
            best_state[:] = state
            best_load[:] = load
        if t % n_save == 0:
            row = counters[2]
            history[row, 0] = t
            history[row, 1] = beta
            history[row, 2] = energies[0]
            history[row, 3] = energies[1]
            if trace.shape[0] > 0:
                trace[row, :] = state
            counters[2] += 1


def anneal(ham: RoutingHamiltonian, schedule: AnnealSchedule, seed, *,
           trace_states=False) -> QmcResult:
    """Run one annealing chain; the result is a pure function of the inputs and seed.

    ``trace_states`` keeps a copy of the state at every saved step.
    """
    rng = as_generator(seed)
    M, q = ham.n_demands, ham.n_paths
    state = rng.integers(q, size=M).astype(np.int64)
    energy, load = ham.total_energy(state)
    n_rows = schedule.n_steps // schedule.n_save
    history = np.zeros((n_rows, 4))
    trace = np.zeros((n_rows if trace_states else 0, M), dtype=np.int64)

    if q < 2:
        warnings.warn("q = 1: no alternative routes to propose, returning the initial state",
                      RuntimeWarning, stacklevel=2)
        history[:, 0] = np.arange(1, n_rows + 1) * schedule.n_save
        history[:, 1] = [beta_at(t, schedule) for t in history[:, 0]]
        history[:, 2:] = energy
        trace[:] = state
        return QmcResult(state.copy(), energy, load.copy(), history, 0, state, energy,
                         degenerate=True, state_trace=trace if trace_states else None)

    ptr, edges = ham.flat_routes()
    local = np.ascontiguousarray(ham.local.ravel())
    w = ham.weights
    best_state = state.copy()
    best_load = load.copy()
    energies = np.array([energy, energy])
    counters = np.zeros(3, dtype=np.int64)
    t = 1
    while t <= schedule.n_steps:
        size = min(CHUNK, schedule.n_steps - t + 1)
        picks = rng.integers(M * (q - 1), size=size).astype(np.int64)
        uniforms = rng.random(size)
        _anneal_chunk(local, q, ptr, edges, ham.flows, ham.capacity, w.lambda_cong, w.mu_cap,
                      state, load, best_state, best_load, energies, counters,
                      picks, uniforms, t, schedule.beta0, schedule.beta_final,
                      schedule.n_steps, schedule.n_save, history, trace, RESYNC_EVERY)
        t += size

    # report exact energies; the running sum only drives acceptance
    best_energy, best_load = ham.total_energy(best_state)
    final_energy, _ = ham.total_energy(state)
    return QmcResult(best_state, best_energy, best_load, history, int(counters[0]),
                     state, final_energy, state_trace=trace if trace_states else None)


def anneal_replicas(ham: RoutingHamiltonian, schedule: AnnealSchedule, seed: int,
                    n_replicas: int, n_jobs: int | None = None) -> list[QmcResult]:
    """Independent chains seeded from stream ``("qmc", r)`` of the root seed.

    Replica 0 reproduces a single run with the same root seed. The inner loop
    releases the GIL, so threads run concurrently.
    """
    seeds = [stage_seed(seed, "qmc", r) for r in range(n_replicas)]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda s: anneal(ham, schedule, s), seeds))

"""Exhaustive reference minimizer over all ``q**M`` routing states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import SizeLimitError
from .hamiltonian import RoutingHamiltonian

DEFAULT_LIMIT = 10 ** 6
RESYNC_EVERY = 1024


@dataclass
class OracleResult:
    best_state: np.ndarray
    best_energy: float
    best_load: np.ndarray
    n_states: int
    spectrum: list | None = None  # (state tuple, energy) sorted by energy, ties lexicographic


def iter_spectrum(ham: RoutingHamiltonian):
    """Yield ``(state, energy)`` for every state in lexicographic (odometer) order.

    Consecutive states differ in a few trailing demands, so energies are
    carried forward with incremental updates and resynchronized every
    ``RESYNC_EVERY`` states.
    """
    M, q = ham.n_demands, ham.n_paths
    state = np.zeros(M, dtype=np.int64)
    energy, load = ham.total_energy(state)
    count = 0
    while True:
        yield tuple(state.tolist()), energy
        a = M - 1
        while a >= 0 and state[a] == q - 1:
            a -= 1
        if a < 0:
            return
        for b in range(M - 1, a - 1, -1):
            p_new = state[b] + 1 if b == a else 0
            if p_new == state[b]:
                continue
            d_h, delta = ham.delta_energy(state, b, p_new, load)
            ham.apply(load, delta)
            state[b] = p_new
            energy += d_h
        count += 1
        if count % RESYNC_EVERY == 0:
            energy, load = ham.total_energy(state)


def enumerate_optimum(ham: RoutingHamiltonian, limit=DEFAULT_LIMIT, keep_spectrum=False,
                      rtol=1e-9) -> OracleResult:
    """Global minimum by brute force. Ties go to the lexicographically smallest state."""
    n_states = ham.n_paths ** ham.n_demands
    if n_states > limit:
        raise SizeLimitError(f"q**M = {ham.n_paths}**{ham.n_demands} = {n_states} states "
                             f"exceeds the enumeration limit {limit}")
    states, energies = [], []
    for s, e in iter_spectrum(ham):
        states.append(s)
        energies.append(e)
    energies = np.array(energies)
    # near-minimal states are re-scored exactly before picking the winner
    lowest = energies.min()
    near = np.flatnonzero(energies <= lowest + rtol * max(1.0, abs(lowest)))
    exact = [ham.total_energy(states[i])[0] for i in near]
    pick = near[int(np.argmin(exact))]
    best_state = np.array(states[pick], dtype=np.int64)
    best_energy, best_load = ham.total_energy(best_state)
    spectrum = None
    if keep_spectrum:
        order = np.argsort(energies, kind="stable")
        spectrum = [(states[i], float(energies[i])) for i in order]
    return OracleResult(best_state, best_energy, best_load, n_states, spectrum)

"""Sequential branch-boundary optimizer with Boltzmann-weighted stochastic truncation.

Demands are added one at a time in a random order. Every retained partial
assignment (a branch) is expanded over all ``q`` routes of the next demand,
then the expanded set is cut back to at most ``chi`` branches:

1. perturb energies, ``E~ = E + U(-noise, noise)``;
2. weight ``w = exp(-beta*(E~ - min E~))`` and normalize;
3. draw up to ``3*chi`` distinct branches without replacement;
4. drop duplicate assignments, sort by the unperturbed energy, keep ``chi``.

Branch energies are exact partial energies; only the retained set is
approximate. With ``deterministic=True`` the cut is a plain top-``chi`` beam.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import as_generator
from .exceptions import PreconditionError
from .hamiltonian import RoutingHamiltonian, link_penalty

OVERSAMPLE = 3


@dataclass(frozen=True, eq=False)
class Branch:
    assignment: tuple  # route index per demand in original order, -1 while unassigned
    load: np.ndarray = field(repr=False)
    energy: float


@dataclass(frozen=True)
class TnsConfig:
    chi: int = 64
    beta0: float = 0.5
    beta_final: float = 20.0
    noise: float = 1e-3
    deterministic: bool = False

    def __post_init__(self):
        if self.chi < 1:
            raise PreconditionError(f"chi must be >= 1, got {self.chi}")
        if not (self.beta0 > 0 and self.beta_final > 0):
            raise PreconditionError("TNS inverse temperatures must be > 0")
        if not self.noise >= 0:
            raise PreconditionError(f"noise must be >= 0, got {self.noise}")


@dataclass
class TnsResult:
    best_state: np.ndarray
    best_energy: float
    best_load: np.ndarray
    demand_order: np.ndarray
    boundary_sizes: list
    chi: int
    branch_energy: float


def tns_beta_at(k, n_demands, cfg: TnsConfig) -> float:
    """Inverse temperature of tensor step ``k`` (1-based) out of ``n_demands``."""
    if n_demands <= 1 or k >= n_demands:
        return cfg.beta_final
    if k <= 1:
        return cfg.beta0
    return cfg.beta0 * (cfg.beta_final / cfg.beta0) ** ((k - 1) / (n_demands - 1))


def empty_branch(ham: RoutingHamiltonian) -> Branch:
    return Branch((-1,) * ham.n_demands, np.zeros(ham.n_edges), 0.0)


def expand_branches(boundary, a, ham: RoutingHamiltonian) -> list[Branch]:
    """Children ordered by (parent index, route index)."""
    if not boundary:
        raise PreconditionError("cannot expand an empty boundary")
    f = ham.flows[a]
    w = ham.weights
    children = []
    for parent in boundary:
        if parent.assignment[a] != -1:
            raise PreconditionError(f"demand {a} is already assigned in this branch")
        for p in range(ham.n_paths):
            edges = ham.route_edges[a][p]
            before = parent.load[edges]
            cap = ham.capacity[edges]
            d_link = np.sum(link_penalty(before + f, cap, w) - link_penalty(before, cap, w))
            load = parent.load.copy()
            load[edges] += f
            assignment = parent.assignment[:a] + (p,) + parent.assignment[a + 1:]
            children.append(Branch(assignment, load,
                                   float(parent.energy + ham.local[a, p] + d_link)))
    return children


def _dedupe_sorted(branches, order):
    seen = set()
    kept = []
    for i in order:
        key = branches[i].assignment
        if key not in seen:
            seen.add(key)
            kept.append(i)
    energies = np.array([branches[i].energy for i in kept])
    return [branches[kept[j]] for j in np.argsort(energies, kind="stable")]


def beam_truncate(expanded, chi) -> list[Branch]:
    """Deterministic limit: the ``chi`` lowest-energy distinct branches."""
    return _dedupe_sorted(expanded, range(len(expanded)))[:chi]


def stochastic_truncate(expanded, chi, beta, noise, rng) -> list[Branch]:
    if not expanded:
        raise PreconditionError("cannot truncate an empty boundary")
    if len(expanded) <= chi:
        return _dedupe_sorted(expanded, range(len(expanded)))
    rng = as_generator(rng)
    energies = np.array([b.energy for b in expanded])
    perturbed = energies + rng.uniform(-noise, noise, size=energies.size) if noise > 0 else energies
    weights = survival_weights(perturbed, beta)
    probs = weights / weights.sum()
    n_take = min(OVERSAMPLE * chi, int(np.count_nonzero(probs)))
    picked = rng.choice(len(expanded), size=n_take, replace=False, p=probs)
    return _dedupe_sorted(expanded, picked)[:chi]


def survival_weights(perturbed_energies, beta) -> np.ndarray:
    e = np.asarray(perturbed_energies, dtype=float)
    w = np.exp(-beta * (e - e.min()))
    w[w < np.finfo(float).tiny] = 0.0
    return w


def tns_optimize(ham: RoutingHamiltonian, cfg: TnsConfig, seed) -> TnsResult:
    rng = as_generator(seed)
    M = ham.n_demands
    order = rng.permutation(M)
    boundary = [empty_branch(ham)]
    sizes = []
    for k, a in enumerate(order, start=1):
        expanded = expand_branches(boundary, int(a), ham)
        if cfg.deterministic:
            boundary = beam_truncate(expanded, cfg.chi)
        else:
            boundary = stochastic_truncate(expanded, cfg.chi, tns_beta_at(k, M, cfg),
                                           cfg.noise, rng)
        sizes.append(len(boundary))
    best = min(boundary, key=lambda b: b.energy)
    state = np.array(best.assignment, dtype=np.int64)
    energy, load = ham.total_energy(state)
    return TnsResult(state, energy, load, order, sizes, cfg.chi, best.energy)

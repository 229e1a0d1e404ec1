"""scikit-learn style front ends for the routing optimizers.

Each router takes its hyperparameters in ``__init__`` (so ``get_params`` /
``set_params`` and ``sklearn.base.clone`` work), is fitted on a
:class:`~qkdroute.netmodel.RoutingProblem`, and exposes the result through
trailing-underscore attributes::

    router = QmcRouter(n_steps=50_000, random_state=3).fit(problem)
    router.best_state_, router.best_energy_
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._rng import stage_rng, stage_seed
from .exceptions import PreconditionError
from .hamiltonian import HamiltonianWeights, RoutingHamiltonian
from .netmodel import RoutingProblem, check_routes
from .oracle import DEFAULT_LIMIT, enumerate_optimum
from .qmc import AnnealSchedule, anneal, anneal_replicas
from .tns import TnsConfig, tns_optimize


def check_problem(problem) -> RoutingProblem:
    if not isinstance(problem, RoutingProblem):
        raise TypeError(f"expected a RoutingProblem, got {type(problem).__name__}")
    check_routes(problem.graph, problem.demands, problem.routes)
    return problem


class _RouterBase(BaseEstimator):
    """Shared Hamiltonian parameters and the predict/score surface."""

    def _weights(self) -> HamiltonianWeights:
        return HamiltonianWeights(self.alpha_lat, self.beta_rate, self.gamma_risk,
                                  self.lambda_cong, self.mu_cap)

    def _hamiltonian(self, problem) -> RoutingHamiltonian:
        return RoutingHamiltonian(check_problem(problem), self._weights())

    def predict(self, problem=None) -> np.ndarray:
        """Selected route index per demand."""
        check_is_fitted(self, "best_state_")
        if problem is not None:
            problem = check_problem(problem)
            if (problem.n_demands, problem.n_paths) != self.problem_shape_:
                raise PreconditionError(
                    f"problem has shape {(problem.n_demands, problem.n_paths)}, "
                    f"router was fitted on {self.problem_shape_}")
        return self.best_state_.copy()

    def fit_predict(self, problem) -> np.ndarray:
        return self.fit(problem).predict()

    def score(self, problem) -> float:
        """Negative routing energy of the fitted state on ``problem`` (higher is better)."""
        state = self.predict(problem)
        return -self._hamiltonian(problem).total_energy(state)[0]

    def _store(self, problem, state, energy, load):
        self.problem_shape_ = (problem.n_demands, problem.n_paths)
        self.best_state_ = np.asarray(state, dtype=np.int64)
        self.best_energy_ = float(energy)
        self.best_load_ = np.asarray(load, dtype=float)


class QmcRouter(_RouterBase):
    """Metropolis annealing router.

    ``n_replicas > 1`` runs independent chains and keeps the lowest-energy one.
    """

    def __init__(self, alpha_lat=1.0, beta_rate=1.0, gamma_risk=0.5, lambda_cong=0.1,
                 mu_cap=5.0, beta0=0.05, beta_final=20.0, n_steps=100_000, n_save=100,
                 n_replicas=1, n_jobs=None, random_state=0):
        self.alpha_lat = alpha_lat
        self.beta_rate = beta_rate
        self.gamma_risk = gamma_risk
        self.lambda_cong = lambda_cong
        self.mu_cap = mu_cap
        self.beta0 = beta0
        self.beta_final = beta_final
        self.n_steps = n_steps
        self.n_save = n_save
        self.n_replicas = n_replicas
        self.n_jobs = n_jobs
        self.random_state = random_state

    def fit(self, problem, y=None):
        ham = self._hamiltonian(problem)
        schedule = AnnealSchedule(self.beta0, self.beta_final, self.n_steps, self.n_save)
        if self.n_replicas < 1:
            raise PreconditionError("n_replicas must be >= 1")
        if self.n_replicas == 1:
            runs = [anneal(ham, schedule, stage_seed(self.random_state, "qmc", 0))]
        else:
            runs = anneal_replicas(ham, schedule, self.random_state, self.n_replicas, self.n_jobs)
        best = min(runs, key=lambda r: r.best_energy)
        self._store(problem, best.best_state, best.best_energy, best.best_load)
        self.result_ = best
        self.replica_energies_ = np.array([r.best_energy for r in runs])
        self.history_ = best.history
        self.n_accepted_ = best.acceptance_count
        return self


class TnsRouter(_RouterBase):
    """Stochastic branch-boundary router with bond dimension ``chi``."""

    def __init__(self, alpha_lat=1.0, beta_rate=1.0, gamma_risk=0.5, lambda_cong=0.1,
                 mu_cap=5.0, chi=64, tns_beta0=0.5, tns_beta_final=20.0, noise=1e-3,
                 deterministic=False, random_state=0):
        self.alpha_lat = alpha_lat
        self.beta_rate = beta_rate
        self.gamma_risk = gamma_risk
        self.lambda_cong = lambda_cong
        self.mu_cap = mu_cap
        self.chi = chi
        self.tns_beta0 = tns_beta0
        self.tns_beta_final = tns_beta_final
        self.noise = noise
        self.deterministic = deterministic
        self.random_state = random_state

    def fit(self, problem, y=None):
        ham = self._hamiltonian(problem)
        cfg = TnsConfig(self.chi, self.tns_beta0, self.tns_beta_final, self.noise,
                        self.deterministic)
        result = tns_optimize(ham, cfg, stage_rng(self.random_state, "tns"))
        self._store(problem, result.best_state, result.best_energy, result.best_load)
        self.result_ = result
        self.demand_order_ = result.demand_order
        self.boundary_sizes_ = np.array(result.boundary_sizes)
        return self


class ExhaustiveRouter(_RouterBase):
    """Brute-force minimum over all ``q**M`` states; refuses above ``limit``."""

    def __init__(self, alpha_lat=1.0, beta_rate=1.0, gamma_risk=0.5, lambda_cong=0.1,
                 mu_cap=5.0, limit=DEFAULT_LIMIT):
        self.alpha_lat = alpha_lat
        self.beta_rate = beta_rate
        self.gamma_risk = gamma_risk
        self.lambda_cong = lambda_cong
        self.mu_cap = mu_cap
        self.limit = limit

    def fit(self, problem, y=None):
        result = enumerate_optimum(self._hamiltonian(problem), self.limit)
        self._store(problem, result.best_state, result.best_energy, result.best_load)
        self.result_ = result
        return self

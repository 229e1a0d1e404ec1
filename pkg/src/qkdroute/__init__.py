"""Hamiltonian routing optimizers for QKD networks."""

__version__ = "0.1.0"

from .estimators import ExhaustiveRouter, QmcRouter, TnsRouter, check_problem  # noqa: E402
from .hamiltonian import HamiltonianWeights, RoutingHamiltonian  # noqa: E402
from .netmodel import (  # noqa: E402
    Demand,
    NetworkGraph,
    RoutingProblem,
    generate_candidate_routes,
    generate_demands,
    generate_network,
    generate_problem,
)
from .oracle import enumerate_optimum  # noqa: E402
from .qmc import AnnealSchedule, anneal  # noqa: E402
from .reroute import MarginalWeights, min_congestion_route  # noqa: E402
from .tns import TnsConfig, tns_optimize  # noqa: E402

__all__ = [
    "AnnealSchedule", "Demand", "ExhaustiveRouter", "HamiltonianWeights", "MarginalWeights",
    "NetworkGraph", "QmcRouter", "RoutingHamiltonian", "RoutingProblem", "TnsConfig",
    "TnsRouter", "anneal", "check_problem", "enumerate_optimum", "generate_candidate_routes",
    "generate_demands", "generate_network", "generate_problem", "min_congestion_route",
    "tns_optimize",
]

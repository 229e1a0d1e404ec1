"""QUBO and Ising forms of the routing energy.

Variable ``i = a*q + p`` is 1 when demand ``a`` uses route ``p``. The model is

    H(x) = sum_i h_i x_i + sum_{i<j} J_ij x_i x_j + C0

built from the local route energies, the expansion of
``lambda_cong * sum_e load_e**2`` (using ``x**2 = x``) and the one-hot penalty
``P * sum_a (sum_p x_ap - 1)**2``. The overload term ``max(0, load - c)**2``
has no quadratic binary form and is left out; on one-hot vectors the QUBO
therefore equals the routing energy with that term removed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import PreconditionError
from .hamiltonian import RoutingHamiltonian


@dataclass
class QuboModel:
    n_demands: int
    n_paths: int
    linear: np.ndarray
    quadratic: dict  # (i, j) with i < j -> J_ij
    offset: float
    penalty: float

    @property
    def n_variables(self) -> int:
        return self.linear.shape[0]

    def index(self, a, p) -> int:
        return a * self.n_paths + p

    def variable(self, i) -> tuple[int, int]:
        return divmod(int(i), self.n_paths)

    def coupling_matrix(self) -> np.ndarray:
        return _upper(self.quadratic, self.n_variables)


@dataclass
class IsingModel:
    linear: np.ndarray
    quadratic: dict
    offset: float

    @property
    def n_variables(self) -> int:
        return self.linear.shape[0]

    def coupling_matrix(self) -> np.ndarray:
        return _upper(self.quadratic, self.n_variables)


def _upper(quadratic, n):
    J = np.zeros((n, n))
    for (i, j), v in quadratic.items():
        J[i, j] = v
    return J


def _bias_linear(ham: RoutingHamiltonian) -> np.ndarray:
    lengths = np.array([[len(r) for r in rlist] for rlist in ham.route_edges], dtype=float)
    diag = ham.weights.lambda_cong * ham.flows[:, None] ** 2 * lengths
    return (ham.local + diag).ravel()


def default_penalty(ham: RoutingHamiltonian) -> float:
    h = _bias_linear(ham)
    return 10.0 * (h.max() - h.min() + 1.0)


def build_qubo(ham: RoutingHamiltonian, penalty=None) -> QuboModel:
    if penalty is None:
        penalty = default_penalty(ham)
    if not penalty > 0:
        raise PreconditionError(f"one-hot penalty must be > 0, got {penalty}")
    M, q = ham.n_demands, ham.n_paths
    lam = ham.weights.lambda_cong
    linear = _bias_linear(ham) - penalty

    users = [[] for _ in range(ham.n_edges)]
    for a in range(M):
        for p in range(q):
            for e in ham.route_edges[a][p]:
                users[e].append(a * q + p)
    quadratic = {}
    if lam != 0:
        for e in range(ham.n_edges):
            vs = users[e]
            for x in range(len(vs)):
                for y in range(x + 1, len(vs)):
                    i, j = vs[x], vs[y]
                    coupling = 2.0 * lam * ham.flows[i // q] * ham.flows[j // q]
                    quadratic[(i, j)] = quadratic.get((i, j), 0.0) + coupling
    for a in range(M):
        for p in range(q):
            for p2 in range(p + 1, q):
                key = (a * q + p, a * q + p2)
                quadratic[key] = quadratic.get(key, 0.0) + 2.0 * penalty
    quadratic = dict(sorted(quadratic.items()))
    return QuboModel(M, q, linear, quadratic, float(M * penalty), float(penalty))


def _check_vector(x, n, allowed):
    x = np.asarray(x)
    if x.shape != (n,):
        raise PreconditionError(f"vector has shape {x.shape}, expected ({n},)")
    if not np.all(np.isin(x, allowed)):
        raise PreconditionError(f"vector entries must be in {allowed}")
    return x.astype(float)


def qubo_energy(model: QuboModel, x) -> float:
    x = _check_vector(x, model.n_variables, (0, 1))
    return float(model.linear @ x + x @ model.coupling_matrix() @ x + model.offset)


def ising_energy(model: IsingModel, spins) -> float:
    s = _check_vector(spins, model.n_variables, (-1, 1))
    return float(model.offset + model.linear @ s + s @ model.coupling_matrix() @ s)


def encode_state(state, n_paths) -> np.ndarray:
    state = np.asarray(state, dtype=np.int64)
    x = np.zeros((state.size, n_paths), dtype=np.int64)
    x[np.arange(state.size), state] = 1
    return x.ravel()


def decode_state(x, n_paths) -> np.ndarray:
    block = np.asarray(x).reshape(-1, n_paths)
    if not np.all(block.sum(axis=1) == 1):
        raise PreconditionError("binary vector violates the one-route-per-demand constraint")
    return block.argmax(axis=1).astype(np.int64)


def to_ising(model: QuboModel) -> IsingModel:
    """Substitute ``x = (1 + s)/2``."""
    h = model.linear / 2.0
    offset = model.offset + model.linear.sum() / 2.0
    quadratic = {}
    for (i, j), v in model.quadratic.items():
        h[i] += v / 4.0
        h[j] += v / 4.0
        offset += v / 4.0
        quadratic[(i, j)] = v / 4.0
    return IsingModel(h, quadratic, float(offset))


def _write_terms(path, n, offset, linear, quadratic):
    lines = [f"# variables {n}", f"# offset {float(offset)!r}"]
    lines += [f"{i} {i} {float(v)!r}" for i, v in enumerate(linear)]
    lines += [f"{i} {j} {float(v)!r}" for (i, j), v in quadratic.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def write_qubo(model: QuboModel, path) -> None:
    _write_terms(path, model.n_variables, model.offset, model.linear, model.quadratic)


def write_ising(model: IsingModel, path) -> None:
    _write_terms(path, model.n_variables, model.offset, model.linear, model.quadratic)


def read_terms(path) -> tuple[int, float, np.ndarray, dict]:
    """Parse a file written by :func:`write_qubo` or :func:`write_ising`."""
    n = offset = None
    linear, quadratic = None, {}
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "#":
            if parts[1] == "variables":
                n = int(parts[2])
                linear = np.zeros(n)
            elif parts[1] == "offset":
                offset = float(parts[2])
            continue
        i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        if i == j:
            linear[i] = v
        else:
            quadratic[(i, j)] = v
    return n, offset, linear, quadratic


def variable_map(model: QuboModel) -> dict:
    return {
        "n_variables": model.n_variables,
        "n_demands": model.n_demands,
        "n_paths": model.n_paths,
        "onehot_penalty": model.penalty,
        "global_overload_term": "excluded",
        "variables": [{"index": i, "demand": a, "route": p}
                      for i in range(model.n_variables) for a, p in [model.variable(i)]],
    }


def write_variable_map(model: QuboModel, path) -> None:
    Path(path).write_text(json.dumps(variable_map(model), indent=2) + "\n")

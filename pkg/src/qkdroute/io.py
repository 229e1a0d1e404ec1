"""File formats: network JSON, result JSON, history and spectrum CSV."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import InputFileError, PreconditionError
from .netmodel import Demand, NetworkGraph

EDGE_FIELDS = ("u", "v", "length_km", "latency_us", "keyrate", "capacity", "risk")


def network_to_dict(g: NetworkGraph, demands) -> dict:
    edges = [{"u": int(g.u[i]), "v": int(g.v[i]), "length_km": float(g.length[i]),
              "latency_us": float(g.latency[i]), "keyrate": float(g.keyrate[i]),
              "capacity": float(g.capacity[i]), "risk": float(g.risk[i])}
             for i in range(g.n_edges)]
    return {"nodes": g.n_nodes, "edges": edges,
            "demands": [{"src": d.source, "dst": d.target, "flow": float(d.flow)} for d in demands]}


def network_from_dict(data: dict, require_connected=True) -> tuple[NetworkGraph, list[Demand]]:
    try:
        n = data["nodes"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise InputFileError(f"'nodes' must be an integer, got {n!r}")
        cols = {k: [e[k] for e in data["edges"]] for k in EDGE_FIELDS}
        demands = [Demand(int(d["src"]), int(d["dst"]), float(d["flow"]))
                   for d in data.get("demands", [])]
    except PreconditionError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFileError(f"malformed network data: missing or invalid {exc}") from exc
    g = NetworkGraph(n, cols["u"], cols["v"], cols["length_km"], cols["latency_us"],
                     cols["keyrate"], cols["capacity"], cols["risk"],
                     require_connected=require_connected)
    for d in demands:
        if not (0 <= d.source < n and 0 <= d.target < n):
            raise PreconditionError(f"demand {d} references a node outside [0, {n})")
    return g, demands


def network_hash(g: NetworkGraph, demands) -> str:
    """SHA-256 of the canonical JSON of nodes, edges and demands."""
    canonical = json.dumps(network_to_dict(g, demands), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def dumps(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


def write_json(path, payload: dict) -> None:
    try:
        Path(path).write_text(dumps(payload))
    except OSError as exc:
        raise InputFileError(f"cannot write {path}: {exc}") from exc


def read_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputFileError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InputFileError(f"{path} must hold a JSON object")
    return data


def write_network(path, g: NetworkGraph, demands, meta: dict | None = None) -> dict:
    payload = network_to_dict(g, demands)
    payload["meta"] = {"artifact_version": __version__,
                       "network_hash": network_hash(g, demands), **(meta or {})}
    write_json(path, payload)
    return payload


def read_network(path, require_connected=True) -> tuple[NetworkGraph, list[Demand], dict]:
    data = read_json(path)
    g, demands = network_from_dict(data, require_connected)
    return g, demands, data.get("meta", {})


def write_history_csv(path, history: np.ndarray) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "beta", "H", "H_best"])
            for step, beta, h, h_best in history.tolist():
                writer.writerow([int(step), repr(beta), repr(h), repr(h_best)])
    except OSError as exc:
        raise InputFileError(f"cannot write {path}: {exc}") from exc


def read_history_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([[float(r["step"]), float(r["beta"]), float(r["H"]), float(r["H_best"])]
                     for r in rows]).reshape(-1, 4)


def write_spectrum_csv(path, spectrum) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["state", "energy"])
        for state, energy in spectrum:
            writer.writerow(["-".join(str(p) for p in state), repr(float(energy))])

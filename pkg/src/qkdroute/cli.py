"""Command-line entry point: ``qkdroute <subcommand> [options]``.

Settings are resolved as command-line flags, then the ``--config`` JSON file,
then built-in defaults. Every output file echoes the resolved configuration,
the root seed and the network content hash, and carries no timestamps, so
repeated runs produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from ._rng import stage_rng, stage_seed
from .exceptions import ConfigError, NetworkMismatchError, QkdRouteError
from .hamiltonian import HamiltonianWeights, RoutingHamiltonian
from .io import (dumps, network_hash, network_to_dict, read_json, read_network,
                 write_history_csv, write_json, write_network, write_spectrum_csv)
from .netmodel import Demand, RoutingProblem, generate_demands, generate_network
from .oracle import enumerate_optimum
from .qmc import AnnealSchedule, anneal, anneal_replicas
from .qubo import build_qubo, to_ising, write_ising, write_qubo, write_variable_map
from .reroute import DEFAULT_EPSILON, MarginalWeights, min_congestion_route
from .tns import TnsConfig, tns_optimize


@dataclass
class RunConfig:
    nodes: int = 20
    degree: float = 4.0
    demands: int = 10
    paths_per_demand: int = 4
    length_range: tuple = (5.0, 40.0)
    flow_range: tuple = (5.0, 20.0)
    seed: int = 0
    alpha_lat: float = 1.0
    beta_rate: float = 1.0
    gamma_risk: float = 0.5
    lambda_cong: float = 0.1
    mu_cap: float = 5.0
    steps: int = 100_000
    save_every: int = 100
    beta0: float = 0.05
    betaF: float = 20.0
    replicas: int = 1
    chi: int = 64
    tns_beta0: float = 0.5
    tns_betaF: float = 20.0
    tns_noise: float = 1e-3
    deterministic: bool = False
    lambda_marg: float | None = None
    mu_marg: float | None = None
    epsilon: float = DEFAULT_EPSILON
    penalty: float | None = None
    limit: int = 10 ** 6

    @classmethod
    def resolve(cls, file_values: dict, flag_values: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(file_values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
        for key, value in merged.items():
            merged[key] = _coerce(key, value)
        return cls(**merged)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["length_range"] = list(self.length_range)
        d["flow_range"] = list(self.flow_range)
        return d

    def weights(self) -> HamiltonianWeights:
        return HamiltonianWeights(self.alpha_lat, self.beta_rate, self.gamma_risk,
                                  self.lambda_cong, self.mu_cap)

    def schedule(self) -> AnnealSchedule:
        return AnnealSchedule(self.beta0, self.betaF, self.steps, self.save_every)

    def tns_config(self) -> TnsConfig:
        return TnsConfig(self.chi, self.tns_beta0, self.tns_betaF, self.tns_noise,
                         self.deterministic)

    def marginal_weights(self) -> MarginalWeights:
        lam = self.lambda_cong if self.lambda_marg is None else self.lambda_marg
        mu = self.mu_cap if self.mu_marg is None else self.mu_marg
        return MarginalWeights(lam, mu, self.epsilon)


def _coerce(key, value):
    typ = FIELD_TYPES.get(key)
    if value is None and key in OPTIONAL_FIELDS:
        return None
    try:
        if typ is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if typ is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if typ is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if len(value) != 2:
            raise TypeError
        return tuple(float(x) for x in value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r} has an invalid value {value!r}") from None


CONFIG_FLAGS = {
    # flag: (RunConfig field, type)
    "--nodes": ("nodes", int), "--degree": ("degree", float), "--demands": ("demands", int),
    "--paths-per-demand": ("paths_per_demand", int), "--seed": ("seed", int),
    "--alpha-lat": ("alpha_lat", float), "--beta-rate": ("beta_rate", float),
    "--gamma-risk": ("gamma_risk", float), "--lambda-cong": ("lambda_cong", float),
    "--mu-cap": ("mu_cap", float), "--steps": ("steps", int),
    "--save-every": ("save_every", int), "--beta0": ("beta0", float),
    "--betaF": ("betaF", float), "--replicas": ("replicas", int), "--chi": ("chi", int),
    "--tns-beta0": ("tns_beta0", float), "--tns-betaF": ("tns_betaF", float),
    "--tns-noise": ("tns_noise", float), "--lambda-marg": ("lambda_marg", float),
    "--mu-marg": ("mu_marg", float), "--epsilon": ("epsilon", float),
    "--penalty": ("penalty", float), "--limit": ("limit", int),
}


FIELD_TYPES = {dest: typ for dest, typ in CONFIG_FLAGS.values()}
FIELD_TYPES.update(length_range=tuple, flow_range=tuple, deterministic=bool)
OPTIONAL_FIELDS = {"lambda_marg", "mu_marg", "penalty"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (flags override it)")
    for flag, (dest, typ) in CONFIG_FLAGS.items():
        common.add_argument(flag, dest=dest, type=typ, default=None)
    common.add_argument("--length-range", dest="length_range", type=float, nargs=2, default=None)
    common.add_argument("--flow-range", dest="flow_range", type=float, nargs=2, default=None)
    common.add_argument("--deterministic", dest="deterministic", action="store_true",
                        default=None, help="TNS: exact top-chi truncation, no noise")
    common.add_argument("--network", help="network JSON; generated from the config if omitted")
    common.add_argument("--out", help="output path (stdout if omitted)")

    parser = argparse.ArgumentParser(
        prog="qkdroute", description="Multi-demand routing optimizers for QKD networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write a random network file")
    p = sub.add_parser("qmc", parents=[common], help="Metropolis annealing")
    p.add_argument("--history", help="energy history CSV path")
    sub.add_parser("tns", parents=[common], help="stochastic branch-boundary optimizer")
    sub.add_parser("oracle", parents=[common], help="exhaustive optimum").add_argument(
        "--spectrum", help="write every state's energy as CSV")
    p = sub.add_parser("reroute", parents=[common], help="minimum-congestion route for a new flow")
    _add_flow_args(p)
    p.add_argument("--result", help="qmc/tns/oracle result whose best load is used (zero load if omitted)")
    p.add_argument("--commit", action="store_true",
                   help="also write the network with the new flow appended as a demand")
    p.add_argument("--commit-out", help="network path for --commit")
    sub.add_parser("qubo-export", parents=[common], help="write QUBO/Ising model files; "
                   "--out is a path prefix")
    p = sub.add_parser("compare", parents=[common], help="QMC vs TNS comparison report")
    p.add_argument("--qmc", dest="qmc_result", required=True)
    p.add_argument("--tns", dest="tns_result", required=True)
    _add_flow_args(p, required=False)
    return parser


def _add_flow_args(p, required=True):
    p.add_argument("--from", dest="node_from", type=int, required=required)
    p.add_argument("--to", dest="node_to", type=int, required=required)
    p.add_argument("--flow", dest="new_flow", type=float, required=required)


def _resolve_config(args) -> RunConfig:
    file_values = read_json(args.config) if args.config else {}
    flag_values = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    try:
        return RunConfig.resolve(file_values, flag_values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _network(args, cfg):
    if args.network:
        g, demands, _ = read_network(args.network)
        return g, demands
    g = generate_network(cfg.nodes, cfg.degree, stage_rng(cfg.seed, "graph"), cfg.length_range)
    demands = generate_demands(g, cfg.demands, stage_rng(cfg.seed, "demands"), cfg.flow_range)
    return g, demands


def _header(command, cfg, g, demands) -> dict:
    return {"artifact_version": __version__, "command": command, "seed": cfg.seed,
            "network_hash": network_hash(g, demands), "config": cfg.to_dict()}


def _emit(args, payload):
    if args.out:
        write_json(args.out, payload)
    else:
        sys.stdout.write(dumps(payload))


def _solution_payload(g, problem, ham, state) -> dict:
    energy, load = ham.total_energy(state)
    return {
        "best_state": [int(p) for p in state],
        "best_energy": energy,
        "selected_routes": [list(map(int, problem.routes[a][p])) for a, p in enumerate(state)],
        "best_load": load.tolist(),
        "overloaded_links": [int(e) for e in np.flatnonzero(load > g.capacity)],
    }


def cmd_generate(args, cfg):
    g, demands = _network(args, cfg)
    meta = {"seed": cfg.seed, "config": cfg.to_dict()}
    if args.out:
        write_network(args.out, g, demands, meta)
    else:
        payload = network_to_dict(g, demands)
        payload["meta"] = {"artifact_version": __version__,
                           "network_hash": network_hash(g, demands), **meta}
        sys.stdout.write(dumps(payload))
    print(f"nodes={g.n_nodes} edges={g.n_edges} mean_degree={g.mean_degree:.3f} "
          f"demands={len(demands)}", file=sys.stderr)


def _problem(args, cfg):
    g, demands = _network(args, cfg)
    problem = RoutingProblem.from_network(g, demands, cfg.paths_per_demand)
    return g, demands, problem, RoutingHamiltonian(problem, cfg.weights())


def cmd_qmc(args, cfg):
    g, demands, problem, ham = _problem(args, cfg)
    schedule = cfg.schedule()
    if cfg.replicas < 1:
        raise ConfigError("replicas must be >= 1")
    if cfg.replicas == 1:
        runs = [anneal(ham, schedule, stage_seed(cfg.seed, "qmc", 0))]
    else:
        runs = anneal_replicas(ham, schedule, cfg.seed, cfg.replicas)
    best_idx = int(np.argmin([r.best_energy for r in runs]))
    res = runs[best_idx]
    payload = _header("qmc", cfg, g, demands)
    payload["engine"] = "qmc"
    payload.update(_solution_payload(g, problem, ham, res.best_state))
    payload.update({"acceptance_count": res.acceptance_count, "degenerate": res.degenerate,
                    "replica": best_idx,
                    "replica_energies": [r.best_energy for r in runs]})
    if args.history:
        write_history_csv(args.history, res.history)
    _emit(args, payload)


def cmd_tns(args, cfg):
    g, demands, problem, ham = _problem(args, cfg)
    res = tns_optimize(ham, cfg.tns_config(), stage_rng(cfg.seed, "tns"))
    payload = _header("tns", cfg, g, demands)
    payload["engine"] = "tns"
    payload.update(_solution_payload(g, problem, ham, res.best_state))
    payload.update({"demand_order": [int(a) for a in res.demand_order], "chi": res.chi,
                    "boundary_sizes": [int(s) for s in res.boundary_sizes]})
    _emit(args, payload)


def cmd_oracle(args, cfg):
    g, demands, problem, ham = _problem(args, cfg)
    res = enumerate_optimum(ham, cfg.limit, keep_spectrum=bool(args.spectrum))
    payload = _header("oracle", cfg, g, demands)
    payload["engine"] = "oracle"
    payload.update(_solution_payload(g, problem, ham, res.best_state))
    payload["n_states"] = res.n_states
    if args.spectrum:
        write_spectrum_csv(args.spectrum, res.spectrum)
    _emit(args, payload)


def _load_from_result(path, g, demands):
    result = read_json(path)
    if result.get("network_hash") != network_hash(g, demands):
        raise NetworkMismatchError(f"{path} was computed on a different network")
    return np.asarray(result["best_load"], dtype=float)


def cmd_reroute(args, cfg):
    g, demands = _network(args, cfg)
    load = _load_from_result(args.result, g, demands) if args.result else np.zeros(g.n_edges)
    res = min_congestion_route(g, load, args.node_from, args.node_to, args.new_flow,
                               cfg.marginal_weights())
    payload = _header("reroute", cfg, g, demands)
    payload["load_source"] = "result" if args.result else "zero"
    payload.update(res.to_dict())
    payload["committed"] = bool(args.commit)
    if args.commit:
        if not args.commit_out:
            raise ConfigError("--commit needs --commit-out for the updated network file")
        extended = list(demands) + [Demand(res.source, res.target, res.flow)]
        write_network(args.commit_out, g, extended, {"seed": cfg.seed, "config": cfg.to_dict()})
    _emit(args, payload)


def cmd_qubo_export(args, cfg):
    if not args.out:
        raise ConfigError("qubo-export needs --out PREFIX")
    g, demands, problem, ham = _problem(args, cfg)
    model = build_qubo(ham, cfg.penalty)
    write_qubo(model, f"{args.out}.qubo")
    write_ising(to_ising(model), f"{args.out}.ising")
    write_variable_map(model, f"{args.out}.vars.json")
    summary = _header("qubo-export", cfg, g, demands)
    summary.update({"n_variables": model.n_variables, "n_couplings": len(model.quadratic),
                    "offset": model.offset, "onehot_penalty": model.penalty,
                    "global_overload_term": "excluded"})
    write_json(f"{args.out}.meta.json", summary)


def engine_summary(result: dict, capacity) -> dict:
    load = np.asarray(result["best_load"], dtype=float)
    return {
        "energy": result["best_energy"],
        "state": result["best_state"],
        "selected_routes": result["selected_routes"],
        "load": load.tolist(),
        "overloaded_links": [int(e) for e in np.flatnonzero(load > capacity)],
        "used_links": [int(e) for e in np.flatnonzero(load > 0)],
        "max_load": float(load.max()),
    }


def compare_results(qmc: dict, tns: dict, g, demands, marginal=None, query=None) -> dict:
    h = network_hash(g, demands)
    for name, res in (("qmc", qmc), ("tns", tns)):
        if res.get("network_hash") != h:
            raise NetworkMismatchError(f"{name} result was computed on a different network")
    engines = {"qmc": engine_summary(qmc, g.capacity), "tns": engine_summary(tns, g.capacity)}
    agree = sum(r1 == r2 for r1, r2 in zip(qmc["selected_routes"], tns["selected_routes"]))
    report = {
        "network_hash": h,
        "engines": engines,
        "energy_gap": tns["best_energy"] - qmc["best_energy"],
        "route_agreement": agree,
        "route_agreement_percent": 100.0 * agree / len(qmc["selected_routes"]),
    }
    if query is not None:
        a, b, f = query
        report["reroute"] = {
            name: min_congestion_route(g, np.asarray(res["best_load"]), a, b, f,
                                       marginal).to_dict()
            for name, res in (("qmc", qmc), ("tns", tns))}
    return report


def format_report(report: dict) -> str:
    q, t = report["engines"]["qmc"], report["engines"]["tns"]
    rows = [("final energy", f"{q['energy']:.6f}", f"{t['energy']:.6f}"),
            ("used links", str(len(q["used_links"])), str(len(t["used_links"]))),
            ("overloaded links", str(len(q["overloaded_links"])), str(len(t["overloaded_links"]))),
            ("max link load", f"{q['max_load']:.3f}", f"{t['max_load']:.3f}")]
    if "reroute" in report:
        rq, rt = report["reroute"]["qmc"], report["reroute"]["tns"]
        rows += [("reroute C_cong", f"{rq['C_cong']:.6f}", f"{rt['C_cong']:.6f}"),
                 ("reroute C_topo", f"{rq['C_topo']:.6f}", f"{rt['C_topo']:.6f}"),
                 ("reroute R (%)", f"{rq['R_percent']:.3f}", f"{rt['R_percent']:.3f}"),
                 ("reroute hops", str(len(rq["congestion_path"]["edges"])),
                  str(len(rt["congestion_path"]["edges"])))]
    lines = [f"{'metric':<20}{'QMC':>18}{'TNS':>18}", "-" * 56]
    lines += [f"{name:<20}{a:>18}{b:>18}" for name, a, b in rows]
    lines.append("-" * 56)
    lines.append(f"energy gap (TNS - QMC): {report['energy_gap']:.6g}")
    lines.append(f"route agreement: {report['route_agreement']} / "
                 f"{len(q['selected_routes'])} demands")
    return "\n".join(lines)


def cmd_compare(args, cfg):
    if not args.network:
        raise ConfigError("compare needs --network")
    g, demands, _ = read_network(args.network)
    query = None
    given = [args.node_from, args.node_to, args.new_flow]
    if any(v is not None for v in given):
        if any(v is None for v in given):
            raise ConfigError("--from, --to and --flow must be given together")
        query = tuple(given)
    report = compare_results(read_json(args.qmc_result), read_json(args.tns_result), g, demands,
                             cfg.marginal_weights(), query)
    report = {"artifact_version": __version__, "command": "compare", "seed": cfg.seed,
              "config": cfg.to_dict(), **report}
    if args.out:
        write_json(args.out, report)
        print(format_report(report))
    else:
        sys.stdout.write(dumps(report))
        print(format_report(report), file=sys.stderr)


COMMANDS = {"generate": cmd_generate, "qmc": cmd_qmc, "tns": cmd_tns, "oracle": cmd_oracle,
            "reroute": cmd_reroute, "qubo-export": cmd_qubo_export, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        COMMANDS[args.command](args, cfg)
    except QkdRouteError as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        print(json.dumps(err), file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

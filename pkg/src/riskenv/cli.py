"""Command-line interface.

Subcommands: ``envelope`` (one-shot envelope computation from a JSON state
file), ``simulate`` (one episode with a JSON-lines trace), ``benchmark``
(full rate sweep to CSV + JSON) and ``validate`` (config check).

Exit codes: 0 success, 1 runtime error, 2 usage or configuration error.
The RISKENV_LOG environment variable ({error, info, debug}) sets verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import multiprocessing
import os
import sys
from pathlib import Path

from . import bench
from .config import (
    COVARIANCE_CASES,
    ConfigError,
    POLICY_NAMES,
    load_config,
    parse_sigma,
)
from .prob_envelope import (
    envelope_distribution,
    risk_bounded_envelope,
    should_switch,
    violation_expectation,
)
from .rss import AgentState, safety_envelope, unrestricted_envelope
from .uncertainty import UncertaintySpec, eigendecompose

log = logging.getLogger("riskenv")

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _setup_logging() -> None:
    level = os.environ.get("RISKENV_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _envelope_dict(env) -> dict:
    return {"a_lon_min": env.a_lon_min, "a_lon_max": env.a_lon_max,
            "a_lat_min": env.a_lat_min, "a_lat_max": env.a_lat_max}


def _agent_from(obj: dict, where: str) -> AgentState:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    for key in obj:
        if key not in ("x", "y", "theta", "v"):
            raise ConfigError(f"unknown key {where}.{key}")
    try:
        return AgentState(x=float(obj.get("x", 0.0)), y=float(obj.get("y", 0.0)),
                          theta=float(obj.get("theta", 0.0)), v=float(obj["v"]))
    except KeyError as exc:
        raise ConfigError(f"{where}.v is required") from exc
    except ValueError as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def cmd_envelope(args) -> int:
    cfg = load_config(args.config)
    with open(args.input, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {args.input}: {exc}") from exc
    allowed = {"ego", "agents", "sigma", "beta", "contour_levels", "n_phi", "tau"}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key {key}")
    if "ego" not in data:
        raise ConfigError("ego is required")
    if "sigma" not in data:
        raise ConfigError("sigma is required")
    ego = _agent_from(data["ego"], "ego")
    agents = [_agent_from(a, f"agents[{i}]")
              for i, a in enumerate(data.get("agents", []))]
    sigma = parse_sigma("sigma", data["sigma"])
    beta = float(data.get("beta", args.beta))
    if not (0.0 <= beta <= 1.0):
        raise ConfigError(f"beta {beta} outside [0, 1]")
    base = cfg.uncertainty["small"]
    try:
        spec = UncertaintySpec(sigma,
                               tuple(data.get("contour_levels", base.contour_levels)),
                               int(data.get("n_phi", base.n_phi)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    tau = float(data.get("tau", cfg.tau))
    basis = eigendecompose(spec.sigma)
    det_env = safety_envelope(ego, agents, cfg.rss, tau)
    if agents:
        dists = [envelope_distribution(ego, a, spec, basis, cfg.rss, tau, agent_id=j)
                 for j, a in enumerate(agents)]
        prob_env = risk_bounded_envelope(dists, beta, cfg.rss)
        expectations = [violation_expectation(ego, a, spec, basis, cfg.rss)
                        for a in agents]
    else:
        prob_env = unrestricted_envelope(cfg.rss)
        expectations = []
    out = {
        "deterministic_envelope": _envelope_dict(det_env),
        "probabilistic_envelope": _envelope_dict(prob_env),
        "per_agent_violation_expectation": expectations,
        "switch_decision": should_switch(expectations, beta),
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def _record_to_json(rec) -> dict:
    def state(s):
        return {"x": s.x, "y": s.y, "theta": s.theta, "v": s.v}

    return {
        "t": rec.t,
        "ego": state(rec.ego),
        "obs": [state(s) for s in rec.observations],
        "envelope": None if rec.envelope is None else _envelope_dict(rec.envelope),
        "cmd": {"a_lon": rec.a_lon, "a_lat": rec.a_lat},
        "mode": rec.mode,
        "flags": {"collision": rec.collision, "success": rec.success,
                  "env_violated": rec.env_violated},
    }


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    scenarios = bench.generate_scenarios(cfg.scenario.n_scenarios, cfg.seed, cfg)
    if not (0 <= args.scenario < len(scenarios)):
        raise ConfigError(f"scenario index {args.scenario} outside "
                          f"[0, {len(scenarios) - 1}]")
    result = bench.run_episode(scenarios[args.scenario], args.policy, args.beta,
                               args.covariance, cfg, collect_trace=True)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / (f"trace_{args.policy}_{args.covariance}"
                            f"_beta{args.beta}_s{args.scenario}.jsonl")
    with open(trace_path, "w", encoding="utf-8") as fh:
        for rec in result.records:
            fh.write(json.dumps(_record_to_json(rec), sort_keys=True))
            fh.write("\n")
    print(f"{result.outcome} steps={result.steps} trace={trace_path}")
    return 0


def cmd_benchmark(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    policies = args.policies.split(",") if args.policies else list(cfg.policies)
    for p in policies:
        if p not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {p!r}")
    cases = [args.covariance] if args.covariance else list(COVARIANCE_CASES)
    betas = ([float(b) for b in args.betas.split(",")] if args.betas
             else list(cfg.betas))
    scenarios = bench.generate_scenarios(cfg.scenario.n_scenarios, cfg.seed, cfg)
    log.info("benchmark: %d scenarios, %d policies, %d cases, %d betas",
             len(scenarios), len(policies), len(cases), len(betas))
    if args.jobs > 1:
        with multiprocessing.Pool(args.jobs) as pool:
            rows = bench.sweep(scenarios, policies, cases, betas, cfg, pool=pool)
    else:
        rows = bench.sweep(scenarios, policies, cases, betas, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "rates.csv"
    json_path = out_dir / "results.json"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(bench.rows_to_csv(rows))
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(bench.rows_to_json(rows), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {csv_path} and {json_path}")
    return 0


def cmd_validate(args) -> int:
    load_config(args.config)
    print("config ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskenv",
        description="Risk-bounded safety envelopes and the 2-lane highway benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("envelope", help="compute envelopes for one observed state")
    p.add_argument("--input", required=True, help="JSON file: ego, agents, sigma, beta")
    p.add_argument("--config", default=None, help="run config JSON")
    p.add_argument("--beta", type=float, default=0.1,
                   help="risk level when the input file has none")
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("simulate", help="run one episode and write its trace")
    p.add_argument("--config", default=None)
    p.add_argument("--scenario", type=int, default=0, help="scenario index")
    p.add_argument("--policy", default="ProbabilisticEnvelopeRestriction",
                   choices=POLICY_NAMES)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--covariance", default="small", choices=COVARIANCE_CASES)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="run the full rate sweep")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="results")
    p.add_argument("--jobs", type=int, default=1, help="parallel cell workers")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--policies", default=None, help="comma-separated policy names")
    p.add_argument("--betas", default=None, help="comma-separated risk levels")
    p.add_argument("--covariance", default=None, choices=COVARIANCE_CASES,
                   help="restrict to one covariance case")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("validate", help="validate a config file")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.debug("unhandled failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())

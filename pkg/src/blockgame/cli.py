"""Command line entry points.

Subcommands: ``simulate`` (trajectory or event-log files), ``estimate``
(burst probabilities and the pre-exit law), ``optimize`` (reserve grid
search), ``sweep`` (the cost surface as a comma-separated table) and
``oracle`` (exact lattice values). Data goes to stdout or ``--out``;
diagnostics go to stderr. Exit codes: 0 success, 1 validation failure,
2 runtime failure. Fixed config and seed give byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from typing import Optional

from .config import ConfigError, RunConfig, load_config, make_mc
from .economics import OptimizationResult, optimize
from .estimators import (
    DegenerateModelError,
    estimate_burst_probability,
    estimate_pre_exit_distribution,
)
from .netsim import run_network_sim, write_event_log
from .oracle import oracle_burst_probability, oracle_pre_exit_distribution
from .process import Mode, sample_trajectory
from .rng import fold_seed

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="blockgame", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: _Parser) -> None:
        p.add_argument("--config", required=True, help="path to the YAML run configuration")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides mc.seed)")
        p.add_argument("--out", default=None, help="write output to this file instead of stdout")
        p.add_argument(
            "--ci",
            action="store_true",
            help="reproducibility mode: an explicit seed is required",
        )

    p = sub.add_parser("simulate", help="sample trajectories or one network event log")
    common(p)
    p.add_argument("--mode", choices=["regular", "safety"], default="regular")
    p.add_argument("--engine", choices=["process", "network"], default="process")
    p.add_argument("--trajectories", type=int, default=1)

    p = sub.add_parser("estimate", help="estimate burst probabilities and the pre-exit law")
    common(p)
    p.add_argument("--mode", choices=["regular", "safety", "both"], default="both")
    p.add_argument("--trajectories", type=int, default=None)

    p = sub.add_parser("optimize", help="search the reserve grid for the cheapest feasible point")
    common(p)
    p.add_argument("--trajectories", type=int, default=None)
    p.add_argument("--q-source", choices=["mc", "oracle"], default="mc")

    p = sub.add_parser("sweep", help="emit the cost surface as a comma-separated table")
    common(p)
    p.add_argument("--trajectories", type=int, default=None)
    p.add_argument("--q-source", choices=["mc", "oracle"], default="mc")

    p = sub.add_parser("oracle", help="exact burst probabilities from the lattice solver")
    common(p)
    p.add_argument("--mode", choices=["regular", "safety", "both"], default="both")
    p.add_argument("--truncation", type=int, default=512)

    return parser


def _resolve_seed(args, config: RunConfig) -> int:
    if args.seed is not None:
        return args.seed
    if config.mc_seed is not None:
        return config.mc_seed
    if args.ci:
        raise ConfigError("seed: --ci mode requires an explicit seed (flag or mc.seed)")
    seed = secrets.randbits(63)
    print(f"no seed given; drew {seed}", file=sys.stderr)
    return seed


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)
            if not text.endswith("\n"):
                handle.write("\n")


def _estimate_dict(est) -> dict:
    return {
        "mode": est.mode.value,
        "q_hat": est.q_hat,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "cap_hit_fraction": est.cap_hit_fraction,
        "samples": est.samples,
    }


def _cmd_simulate(args, config: RunConfig, seed: int) -> int:
    mode = Mode(args.mode)
    if mode is Mode.SAFETY and config.policy is None:
        raise ConfigError("policy: safety mode requires a policy section")
    if args.trajectories < 1:
        raise ConfigError("trajectories: must be >= 1")
    if args.engine == "network":
        if config.topology is None:
            raise ConfigError("topology: the network engine requires a topology section")
        outcome = run_network_sim(config.topology, config.game, config.policy, mode, seed)
        if args.out is None:
            for event in outcome.events:
                sys.stdout.write(event.to_json() + "\n")
        else:
            write_event_log(outcome.events, args.out)
        print(
            f"network run: burst={outcome.burst} epochs={outcome.observed_epochs} "
            f"injected={outcome.injected_reserve}",
            file=sys.stderr,
        )
        return 0
    lines = []
    for i in range(args.trajectories):
        trajectory = sample_trajectory(config.game, config.policy, mode, fold_seed(seed, i))
        lines.append(
            json.dumps(
                {
                    "trajectory": i,
                    "times": [float(t) for t in trajectory.times],
                    "attacker": [int(v) for v in trajectory.attacker_counts],
                    "defender": [int(v) for v in trajectory.defender_counts],
                    "attacker_exit": trajectory.attacker_exit,
                    "defender_exit": trajectory.defender_exit,
                    "reserve": trajectory.realized_reserve,
                    "cap_hit": trajectory.cap_hit,
                },
                sort_keys=True,
            )
        )
    _emit("\n".join(lines), args.out)
    return 0


def _cmd_estimate(args, config: RunConfig, seed: int) -> int:
    mc = make_mc(config, seed, args.trajectories)
    report: dict = {
        "command": "estimate",
        "seed": seed,
        "num_trajectories": mc.num_trajectories,
        "ci_level": mc.ci_level,
        "regular": None,
        "safety": None,
        "pre_exit": None,
        "notes": [],
    }
    if args.mode in ("regular", "both"):
        report["regular"] = _estimate_dict(
            estimate_burst_probability(config.game, Mode.REGULAR, None, mc)
        )
        try:
            pre = estimate_pre_exit_distribution(config.game, mc)
            report["pre_exit"] = {
                "pmf": [float(p) for p in pre.pmf],
                "p_below": pre.p_below,
                "samples": pre.samples,
            }
        except DegenerateModelError as exc:
            report["notes"].append(f"pre_exit unavailable: {exc}")
    if args.mode in ("safety", "both"):
        if config.policy is None:
            if args.mode == "safety":
                raise ConfigError("policy: safety estimation requires a policy section")
            report["notes"].append("safety estimate skipped: no policy section")
        else:
            report["safety"] = _estimate_dict(
                estimate_burst_probability(config.game, Mode.SAFETY, config.policy, mc)
            )
    _emit(json.dumps(report, sort_keys=True, indent=2), args.out)
    return 0


def _require_costs_grid(config: RunConfig) -> None:
    if config.costs is None:
        raise ConfigError("costs: this command requires a costs section")
    if config.grid is None:
        raise ConfigError("grid: this command requires a grid section")


def _run_optimizer(args, config: RunConfig, seed: int) -> OptimizationResult:
    _require_costs_grid(config)
    mc = make_mc(config, seed, args.trajectories)
    return optimize(config.game, config.costs, config.grid, mc, q_source=args.q_source)


def _cmd_optimize(args, config: RunConfig, seed: int) -> int:
    result = _run_optimizer(args, config, seed)
    report = {
        "command": "optimize",
        "seed": seed,
        "q_source": args.q_source,
        "best": None if result.best is None else {"n": result.best[0], "rho": result.best[1]},
        "best_cost": result.best_cost,
        "frontier": None
        if result.frontier is None
        else {"n": result.frontier[0], "rho": result.frontier[1]},
        "ambiguous": [{"n": n, "rho": rho} for n, rho in result.ambiguous],
        "q0": result.q0,
        "q0_ci": list(result.q0_ci),
        "p_below": result.p_below,
        "feasibility_note": result.feasibility_note,
        "surface": [
            {
                "n": row.n,
                "rho": row.rho,
                "q1_hat": row.q1_hat,
                "q1_ci_low": row.q1_ci_low,
                "q1_ci_high": row.q1_ci_high,
                "total_cost": row.total_cost,
                "feasible": row.feasible,
            }
            for row in result.surface
        ],
    }
    _emit(json.dumps(report, sort_keys=True, indent=2), args.out)
    if result.best is None:
        print("no feasible grid point", file=sys.stderr)
        return 2
    return 0


def _cmd_sweep(args, config: RunConfig, seed: int) -> int:
    result = _run_optimizer(args, config, seed)
    lines = ["n,rho,q1_hat,q1_ci_low,q1_ci_high,total_cost,feasible"]
    for row in result.surface:
        lines.append(
            f"{row.n},{row.rho!r},{row.q1_hat!r},{row.q1_ci_low!r},"
            f"{row.q1_ci_high!r},{row.total_cost!r},{'true' if row.feasible else 'false'}"
        )
    _emit("\n".join(lines), args.out)
    if result.best is None:
        print("no feasible grid point", file=sys.stderr)
        return 2
    return 0


def _cmd_oracle(args, config: RunConfig) -> int:
    report: dict = {
        "command": "oracle",
        "truncation": args.truncation,
        "regular_threshold": config.game.regular_threshold,
        "q0_exact": None,
        "q1_exact": None,
        "q1_by_reserve": None,
        "pre_exit": None,
        "notes": [],
    }
    if args.mode in ("regular", "both"):
        report["q0_exact"] = oracle_burst_probability(
            config.game, Mode.REGULAR, truncation=args.truncation
        )
        try:
            pmf, p_below = oracle_pre_exit_distribution(config.game, truncation=args.truncation)
            report["pre_exit"] = {"pmf": [float(p) for p in pmf], "p_below": p_below}
        except ValueError as exc:
            report["notes"].append(f"pre_exit unavailable: {exc}")
    if args.mode in ("safety", "both"):
        if config.policy is None:
            if args.mode == "safety":
                raise ConfigError("policy: safety oracle requires a policy section")
            report["notes"].append("safety oracle skipped: no policy section")
        else:
            report["q1_exact"] = oracle_burst_probability(
                config.game, Mode.SAFETY, policy=config.policy, truncation=args.truncation
            )
            report["q1_by_reserve"] = {
                str(b): oracle_burst_probability(
                    config.game, Mode.SAFETY, reserve=b, truncation=args.truncation
                )
                for b in range(config.policy.reserve_count + 1)
            }
    _emit(json.dumps(report, sort_keys=True, indent=2), args.out)
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        config = load_config(args.config)
        if args.command == "oracle":
            return _cmd_oracle(args, config)
        seed = _resolve_seed(args, config)
        if args.command == "simulate":
            return _cmd_simulate(args, config, seed)
        if args.command == "estimate":
            return _cmd_estimate(args, config, seed)
        if args.command == "optimize":
            return _cmd_optimize(args, config, seed)
        if args.command == "sweep":
            return _cmd_sweep(args, config, seed)
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DegenerateModelError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

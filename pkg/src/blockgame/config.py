"""Run configuration: a nested key/value file with strict validation.

Configs are YAML with up to six sections (``game`` is required, the rest are
optional): game, policy, costs, grid, mc, topology. Unknown keys are
rejected, never ignored, and every error message names the offending field
by its dotted path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import yaml

from .economics import CostParams, SearchGrid
from .estimators import McConfig
from .netsim import Topology
from .process import GameParams, ReservePolicy

__all__ = ["ConfigError", "RunConfig", "load_config", "DEFAULT_TRAJECTORIES"]

DEFAULT_TRAJECTORIES = 10_000


class ConfigError(ValueError):
    """Configuration rejected; the message starts with the field path."""


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration for the command line tools."""

    game: GameParams
    policy: Optional[ReservePolicy]
    costs: Optional[CostParams]
    grid: Optional[SearchGrid]
    mc_trajectories: int
    mc_ci_level: float
    mc_seed: Optional[int]
    topology: Optional[Topology]


def _require_mapping(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, found {type(value).__name__}")
    return value


def _take(section: dict, path: str, key: str, kind: str, default: Any = ...) -> Any:
    if key not in section:
        if default is ...:
            raise ConfigError(f"{path}.{key}: required key is missing")
        return default
    value = section.pop(key)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}.{key}: expected an integer, found {value!r}")
        return value
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}.{key}: expected a number, found {value!r}")
        return float(value)
    if kind == "string":
        if not isinstance(value, str):
            raise ConfigError(f"{path}.{key}: expected a string, found {value!r}")
        return value
    raise AssertionError(kind)


def _reject_unknown(section: dict, path: str) -> None:
    if section:
        key = sorted(section)[0]
        raise ConfigError(f"{path}.{key}: unknown key")


def _build(path: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path) -> RunConfig:
    """Load and validate a run configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    if raw is None:
        raw = {}
    root = dict(_require_mapping(raw, "config"))

    game_section = dict(_require_mapping(root.pop("game", None), "game")) if "game" in root else None
    if game_section is None:
        raise ConfigError("game: required section is missing")
    game = _build(
        "game",
        GameParams,
        total_nodes=_take(game_section, "game", "total_nodes", "int"),
        attacker_rate=_take(game_section, "game", "attacker_rate", "number"),
        defender_rate=_take(game_section, "game", "defender_rate", "number"),
        observation_rate=_take(game_section, "game", "observation_rate", "number", 1.0),
        initial_attacker=_take(game_section, "game", "initial_attacker", "int", 0),
        initial_defender=_take(game_section, "game", "initial_defender", "int", 0),
        max_epochs=_take(game_section, "game", "max_epochs", "int", 10_000),
    )
    _reject_unknown(game_section, "game")

    policy = None
    if "policy" in root:
        section = dict(_require_mapping(root.pop("policy"), "policy"))
        policy = _build(
            "policy",
            ReservePolicy,
            reserve_count=_take(section, "policy", "reserve_count", "int"),
            availability=_take(section, "policy", "availability", "number"),
        )
        _reject_unknown(section, "policy")

    costs = None
    if "costs" in root:
        section = dict(_require_mapping(root.pop("costs"), "costs"))
        costs = _build(
            "costs",
            CostParams,
            unit_safety_cost=_take(section, "costs", "unit_safety_cost", "number"),
            burst_loss=_take(section, "costs", "burst_loss", "number"),
            reserve_pricing=_take(section, "costs", "reserve_pricing", "string", "flat"),
        )
        _reject_unknown(section, "costs")

    grid = None
    if "grid" in root:
        section = dict(_require_mapping(root.pop("grid"), "grid"))
        grid = _build(
            "grid",
            SearchGrid,
            n_max=_take(section, "grid", "n_max", "int"),
            rho_step=_take(section, "grid", "rho_step", "number", 0.05),
        )
        _reject_unknown(section, "grid")

    mc_trajectories = DEFAULT_TRAJECTORIES
    mc_ci_level = 0.95
    mc_seed = None
    if "mc" in root:
        section = dict(_require_mapping(root.pop("mc"), "mc"))
        mc_trajectories = _take(section, "mc", "num_trajectories", "int", DEFAULT_TRAJECTORIES)
        mc_ci_level = _take(section, "mc", "ci_level", "number", 0.95)
        if "seed" in section and section["seed"] is None:
            section.pop("seed")
        else:
            mc_seed = _take(section, "mc", "seed", "int", None)
        _reject_unknown(section, "mc")
        if mc_trajectories < 1:
            raise ConfigError(f"mc.num_trajectories: must be >= 1 (got {mc_trajectories})")
        if not 0.0 < mc_ci_level < 1.0:
            raise ConfigError(f"mc.ci_level: must lie in (0, 1) (got {mc_ci_level})")

    topology = None
    if "topology" in root:
        section = dict(_require_mapping(root.pop("topology"), "topology"))
        topology = _build(
            "topology",
            Topology,
            component_nodes=_take(section, "topology", "component_nodes", "int"),
            service_nodes=_take(section, "topology", "service_nodes", "int"),
            hq_nodes=_take(section, "topology", "hq_nodes", "int"),
        )
        _reject_unknown(section, "topology")
        if topology.total != game.total_nodes:
            raise ConfigError(
                f"topology: tiers sum to {topology.total} nodes "
                f"but game.total_nodes is {game.total_nodes}"
            )

    _reject_unknown(root, "config")
    return RunConfig(
        game=game,
        policy=policy,
        costs=costs,
        grid=grid,
        mc_trajectories=mc_trajectories,
        mc_ci_level=mc_ci_level,
        mc_seed=mc_seed,
        topology=topology,
    )


def make_mc(config: RunConfig, seed: int, trajectories: Optional[int] = None) -> McConfig:
    """Assemble the Monte Carlo config for one command invocation."""
    return McConfig(
        num_trajectories=trajectories or config.mc_trajectories,
        seed=seed,
        ci_level=config.mc_ci_level,
    )

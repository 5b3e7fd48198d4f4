"""Antagonistic block-accrual race on a fixed-size ledger network.

An attacker and a defender accumulate blocks at constant rates on a network
of ``M`` ledger nodes. Neither side sees the other continuously: both
cumulative counts are sampled at the epochs of an independent observation
process with exponential gaps (rate ``observation_rate``). Conditional on a
gap of length ``dt``, the per-epoch block increments are independent Poisson
counts with means ``attacker_rate * dt`` and ``defender_rate * dt``.

The game ends at the first observation epoch where either side's count
crosses its threshold. The defender needs a strict majority of the network
(``floor(M/2) + 1``); the attacker needs the same majority plus, under the
safety strategy, the number ``B`` of reserve nodes the headquarters managed
to commit. ``B`` is drawn once per game from ``Binomial(n, rho)`` where
``(n, rho)`` is the reserve policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .rng import substream

__all__ = [
    "Mode",
    "GameParams",
    "ReservePolicy",
    "Thresholds",
    "GameTrajectory",
    "sample_increment_pair",
    "sample_reserve",
    "sample_trajectory",
    "exit_indices",
    "first_crossing",
    "safety_trigger_epoch",
    "is_burst",
]

# Substream layout used by sample_trajectory: one stream for the increment
# sequence, a separate one for the reserve draw, so the increment path is
# identical under Regular and Safety play with the same seed.
_INCREMENT_STREAM = 0
_RESERVE_STREAM = 1


class Mode(str, Enum):
    """Defender strategy: plain majority race or reserve-backed safety play."""

    REGULAR = "regular"
    SAFETY = "safety"


@dataclass(frozen=True)
class GameParams:
    """Static description of one network's game.

    ``total_nodes`` is the ledger-node count per network; block rates are in
    blocks per unit time, ``observation_rate`` in epochs per unit time.
    ``initial_attacker`` / ``initial_defender`` model a partially
    compromised fleet. ``max_epochs`` caps trajectory length; hitting the
    cap is reported, never silently dropped.
    """

    total_nodes: int
    attacker_rate: float
    defender_rate: float
    observation_rate: float = 1.0
    initial_attacker: int = 0
    initial_defender: int = 0
    max_epochs: int = 10_000

    def __post_init__(self) -> None:
        if not isinstance(self.total_nodes, int) or self.total_nodes < 2:
            raise ValueError(f"total_nodes must be an integer >= 2 (got {self.total_nodes!r})")
        for name in ("attacker_rate", "defender_rate", "observation_rate"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative (got {value!r})")
        if self.observation_rate <= 0:
            raise ValueError(f"observation_rate must be > 0 (got {self.observation_rate!r})")
        for name in ("initial_attacker", "initial_defender"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0 or value > self.total_nodes:
                raise ValueError(f"{name} must be an integer in [0, total_nodes] (got {value!r})")
        if not isinstance(self.max_epochs, int) or self.max_epochs < 1:
            raise ValueError(f"max_epochs must be a positive integer (got {self.max_epochs!r})")

    @property
    def regular_threshold(self) -> int:
        """Strict majority of the network: ``floor(M/2) + 1``."""
        return self.total_nodes // 2 + 1


@dataclass(frozen=True)
class ReservePolicy:
    """Headquarters reserve: ``reserve_count`` nodes, each independently
    available with probability ``availability``."""

    reserve_count: int
    availability: float

    def __post_init__(self) -> None:
        if not isinstance(self.reserve_count, int) or self.reserve_count < 0:
            raise ValueError(f"reserve_count must be an integer >= 0 (got {self.reserve_count!r})")
        if not 0.0 <= self.availability <= 1.0:
            raise ValueError(f"availability must be within [0, 1] (got {self.availability!r})")


@dataclass(frozen=True)
class Thresholds:
    """Active crossing thresholds for one game."""

    regular_threshold: int
    safety_threshold: int

    def __post_init__(self) -> None:
        if self.safety_threshold < self.regular_threshold:
            raise ValueError("safety_threshold must be >= regular_threshold")

    @classmethod
    def for_game(cls, params: GameParams, reserve: int = 0) -> "Thresholds":
        base = params.regular_threshold
        return cls(regular_threshold=base, safety_threshold=base + int(reserve))


@dataclass(frozen=True)
class GameTrajectory:
    """One observed game path.

    ``times[k]``, ``attacker_counts[k]``, ``defender_counts[k]`` describe
    observation epoch ``k`` (epoch 0 is the initial state at time 0).
    ``attacker_exit`` / ``defender_exit`` are the first epochs at which the
    corresponding count reached its threshold, or ``None`` if the threshold
    was not reached before the path stopped. ``realized_reserve`` is the
    reserve draw ``B`` (0 unless a safety policy was attached). ``cap_hit``
    marks paths truncated at ``max_epochs`` with neither side absorbed.
    """

    times: np.ndarray
    attacker_counts: np.ndarray
    defender_counts: np.ndarray
    attacker_exit: Optional[int]
    defender_exit: Optional[int]
    realized_reserve: int
    cap_hit: bool


def sample_increment_pair(
    attacker_rate: float,
    defender_rate: float,
    observation_rate: float,
    rng: np.random.Generator,
) -> tuple[int, int, float]:
    """Draw one observation gap and both per-epoch block increments.

    Returns ``(x, y, dt)``: the gap ``dt`` is exponential with rate
    ``observation_rate``; given ``dt``, ``x`` and ``y`` are independent
    Poisson counts with means ``attacker_rate * dt`` and
    ``defender_rate * dt``. Marginally ``x`` is geometric with success
    probability ``observation_rate / (attacker_rate + observation_rate)``.
    """
    dt = rng.exponential(1.0 / observation_rate)
    x = int(rng.poisson(attacker_rate * dt))
    y = int(rng.poisson(defender_rate * dt))
    return x, y, dt


def sample_reserve(policy: ReservePolicy, rng: np.random.Generator) -> int:
    """Draw the committed reserve ``B ~ Binomial(n, rho)``.

    Implemented as ``n`` per-node availability trials so that, replayed on a
    common uniform stream, the draw is monotone in both ``n`` and ``rho``.
    """
    if policy.reserve_count == 0:
        return 0
    u = rng.random(policy.reserve_count)
    return int(np.count_nonzero(u < policy.availability))


def sample_trajectory(
    params: GameParams,
    policy: Optional[ReservePolicy],
    mode: Mode,
    seed: int,
) -> GameTrajectory:
    """Generate one game path, stopping at the first crossing or the cap.

    Identical ``(params, policy, mode, seed)`` reproduce the trajectory bit
    for bit. The increment stream does not depend on ``mode`` or ``policy``,
    so the same seed replays the same underlying randomness under both
    strategies (the safety path can only exit later).
    """
    mode = Mode(mode)
    if mode is Mode.SAFETY and policy is None:
        raise ValueError("safety mode requires a reserve policy")

    rng_inc = substream(seed, _INCREMENT_STREAM)
    reserve = 0
    if mode is Mode.SAFETY:
        reserve = sample_reserve(policy, substream(seed, _RESERVE_STREAM))
    thresholds = Thresholds.for_game(params, reserve)
    threshold_attacker = thresholds.safety_threshold
    threshold_defender = thresholds.regular_threshold

    a = params.initial_attacker
    h = params.initial_defender
    times = [0.0]
    attacker = [a]
    defender = [h]
    nu: Optional[int] = 0 if a >= threshold_attacker else None
    mu: Optional[int] = 0 if h >= threshold_defender else None

    t = 0.0
    k = 0
    while nu is None and mu is None and k < params.max_epochs:
        x, y, dt = sample_increment_pair(
            params.attacker_rate, params.defender_rate, params.observation_rate, rng_inc
        )
        k += 1
        t += dt
        a += x
        h += y
        times.append(t)
        attacker.append(a)
        defender.append(h)
        if a >= threshold_attacker:
            nu = k
        if h >= threshold_defender:
            mu = k

    return GameTrajectory(
        times=np.asarray(times, dtype=float),
        attacker_counts=np.asarray(attacker, dtype=np.int64),
        defender_counts=np.asarray(defender, dtype=np.int64),
        attacker_exit=nu,
        defender_exit=mu,
        realized_reserve=reserve,
        cap_hit=nu is None and mu is None,
    )


def first_crossing(counts: Sequence[int], threshold: int) -> Optional[int]:
    """Smallest index ``k`` with ``counts[k] >= threshold``, or ``None``."""
    arr = np.asarray(counts)
    hits = np.nonzero(arr >= threshold)[0]
    return int(hits[0]) if hits.size else None


def exit_indices(
    trajectory: GameTrajectory, thresholds: Thresholds
) -> tuple[Optional[int], Optional[int]]:
    """Recompute both exit indices of a recorded path under given thresholds.

    The attacker index uses the safety threshold (which equals the regular
    one when no reserve is active); the defender index always uses the
    regular threshold. Either index is ``None`` when the corresponding count
    never reaches its threshold within the recorded epochs.
    """
    nu = first_crossing(trajectory.attacker_counts, thresholds.safety_threshold)
    mu = first_crossing(trajectory.defender_counts, thresholds.regular_threshold)
    return nu, mu


def safety_trigger_epoch(trajectory: GameTrajectory) -> Optional[float]:
    """Observation time one epoch before attacker absorption.

    This is the last moment at which the defender could still commit
    reserves. Returns ``None`` when the attacker never absorbed or absorbed
    at epoch 0 (no earlier observation exists).
    """
    nu = trajectory.attacker_exit
    if nu is None or nu < 1:
        return None
    return float(trajectory.times[nu - 1])


def is_burst(trajectory: GameTrajectory) -> bool:
    """Whether the attacker won: absorbed strictly before the defender.

    Simultaneous absorption counts as defender survival.
    """
    nu, mu = trajectory.attacker_exit, trajectory.defender_exit
    if nu is None:
        return False
    return mu is None or nu < mu

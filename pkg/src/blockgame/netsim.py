"""Node-level discrete-event simulation of a tiered ledger network.

Individual nodes live in three tiers (in-vehicle components, service-center
equipment, headquarters databases). An attacker captures uncaptured nodes
one at a time as a Poisson stream, honest block finalizations form a second
stream, and an observation stream samples both counts; every block is
attributed to a leader elected uniformly among all nodes. Thresholds are
evaluated only at observation epochs, so the observed-count process has
exactly the same law as the abstract block-accrual race, while sharing none
of its sampling code: the simulation is an independent end-to-end check on
burst frequencies.

Under safety play the headquarters watches the observed capture count and,
at the first observation that lands exactly one node short of the majority
threshold, injects its available reserve nodes, raising the attacker's bar.
If captures jump over that tripwire between observations, the warning came
too late and no injection happens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .process import GameParams, Mode, ReservePolicy, sample_reserve
from .rng import fold_seed, substream

__all__ = [
    "Topology",
    "NodeState",
    "SimOutcome",
    "Event",
    "ReplayError",
    "elect_leader",
    "run_network_sim",
    "replay",
    "burst_frequency",
    "write_event_log",
    "read_event_log",
]

_TIER_BY_GROUP = ("edge", "fog", "cloud")

# Substream layout per run: event clock/kinds, capture targets, leader
# elections, reserve availability. Separate streams keep the event timeline
# identical across modes with the same seed.
_CLOCK = 0
_TARGET = 1
_LEADER = 2
_RESERVE = 3


@dataclass(frozen=True)
class Topology:
    """Node counts per tier; must sum to the game's total node count."""

    component_nodes: int
    service_nodes: int
    hq_nodes: int

    def __post_init__(self) -> None:
        for name in ("component_nodes", "service_nodes", "hq_nodes"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"{name} must be an integer >= 0 (got {value!r})")

    @property
    def total(self) -> int:
        return self.component_nodes + self.service_nodes + self.hq_nodes

    def tiers(self) -> list[str]:
        return (
            ["edge"] * self.component_nodes
            + ["fog"] * self.service_nodes
            + ["cloud"] * self.hq_nodes
        )


@dataclass
class NodeState:
    """One ledger node: identity, tier, allegiance, time of capture if any."""

    node_id: int
    tier: str
    owner: str  # honest | captured | reserve
    capture_time: Optional[float] = None


@dataclass(frozen=True)
class Event:
    """One record of the simulation log."""

    time: float
    kind: str
    node: Optional[int] = None
    info: dict = field(default_factory=dict)

    def to_json(self) -> str:
        record = {"t": self.time, "kind": self.kind}
        if self.node is not None:
            record["node"] = self.node
        record.update(self.info)
        return json.dumps(record, sort_keys=True)


@dataclass(frozen=True)
class SimOutcome:
    """Result of one network simulation run."""

    burst: bool
    trigger_time: Optional[float]
    injected_reserve: int
    final_attacker: int
    final_defender: int
    observed_epochs: int
    cap_hit: bool
    events: tuple[Event, ...]


class ReplayError(ValueError):
    """Malformed event log; the message names the offending record."""


def elect_leader(nodes: Sequence[NodeState], rng: np.random.Generator) -> int:
    """Uniformly elect the node producing the next ledger entry.

    Every node has an equal chance; captured nodes stay eligible (capture
    changes allegiance, not participation).
    """
    if not nodes:
        raise ValueError("cannot elect a leader from an empty node set")
    return nodes[int(rng.integers(len(nodes)))].node_id


def run_network_sim(
    topology: Topology,
    params: GameParams,
    policy: Optional[ReservePolicy],
    mode: Mode,
    seed: int,
    record_log: bool = True,
) -> SimOutcome:
    """Simulate one game at node granularity.

    Three racing exponential clocks drive captures, honest blocks and
    observations; thresholds are checked at observations only, and ties go
    to the defender. Initial captures (``params.initial_attacker``) mark the
    lowest node ids at time zero.
    """
    mode = Mode(mode)
    if topology.total != params.total_nodes:
        raise ValueError(
            f"topology holds {topology.total} nodes but the game expects {params.total_nodes}"
        )
    if mode is Mode.SAFETY and policy is None:
        raise ValueError("safety mode requires a reserve policy")

    clock = substream(seed, _CLOCK)
    targets = substream(seed, _TARGET)
    leaders = substream(seed, _LEADER)

    nodes = [
        NodeState(node_id=i, tier=tier, owner="honest") for i, tier in enumerate(topology.tiers())
    ]
    events: list[Event] = []
    threshold_regular = params.regular_threshold
    threshold_active = threshold_regular

    if record_log:
        events.append(
            Event(
                time=0.0,
                kind="start",
                info={
                    "total_nodes": params.total_nodes,
                    "mode": mode.value,
                    "regular_threshold": threshold_regular,
                    "initial_defender": params.initial_defender,
                    "max_epochs": params.max_epochs,
                },
            )
        )
    captured = 0
    for i in range(params.initial_attacker):
        nodes[i].owner = "captured"
        nodes[i].capture_time = 0.0
        captured += 1
        if record_log:
            events.append(Event(time=0.0, kind="capture", node=i))

    blocks = params.initial_defender
    injected = 0
    trigger_time: Optional[float] = None
    triggered = False
    epoch = 0
    t = 0.0
    burst = False
    cap_hit = False
    decided = False

    total_rate = params.attacker_rate + params.defender_rate + params.observation_rate
    p_capture = params.attacker_rate / total_rate
    p_block = (params.attacker_rate + params.defender_rate) / total_rate

    # Degenerate starts are decided at the first observation epoch like any
    # other state; no special casing needed.
    while not decided:
        t += clock.exponential(1.0 / total_rate)
        u = clock.random()
        if u < p_capture:
            pool = [node for node in nodes if node.owner != "captured"]
            if pool:
                victim = pool[int(targets.integers(len(pool)))]
                victim.owner = "captured"
                victim.capture_time = t
                captured += 1
                if record_log:
                    events.append(Event(time=t, kind="capture", node=victim.node_id))
        elif u < p_block:
            leader = elect_leader(nodes, leaders)
            blocks += 1
            if record_log:
                events.append(Event(time=t, kind="block", node=leader))
        else:
            epoch += 1
            if record_log:
                events.append(Event(time=t, kind="observe"))
            attacker_crossed = captured >= threshold_active
            defender_crossed = blocks >= threshold_regular
            if attacker_crossed or defender_crossed:
                burst = attacker_crossed and not defender_crossed
                decided = True
            elif epoch >= params.max_epochs:
                cap_hit = True
                decided = True
            elif (
                mode is Mode.SAFETY
                and not triggered
                and captured == threshold_regular - 1
            ):
                injected = sample_reserve(policy, substream(seed, _RESERVE))
                triggered = True
                trigger_time = t
                for j in range(injected):
                    nodes.append(
                        NodeState(node_id=params.total_nodes + j, tier="cloud", owner="reserve")
                    )
                threshold_active = threshold_regular + injected
                if record_log:
                    events.append(Event(time=t, kind="inject", info={"count": injected}))

    return SimOutcome(
        burst=burst,
        trigger_time=trigger_time,
        injected_reserve=injected,
        final_attacker=captured,
        final_defender=blocks,
        observed_epochs=epoch,
        cap_hit=cap_hit,
        events=tuple(events),
    )


def burst_frequency(
    topology: Topology,
    params: GameParams,
    policy: Optional[ReservePolicy],
    mode: Mode,
    seed: int,
    runs: int,
) -> float:
    """Fraction of runs that burst; run ``i`` uses substream ``(seed, i)``."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    hits = 0
    for i in range(runs):
        outcome = run_network_sim(
            topology, params, policy, mode, fold_seed(seed, i), record_log=False
        )
        hits += outcome.burst
    return hits / runs


def replay(events: Iterable[Event]) -> SimOutcome:
    """Re-derive the outcome of a recorded run from its event log alone.

    Validates ordering and ownership while replaying: time must never go
    backwards, a node may be captured at most once, and the log must begin
    with a start record. Raises :class:`ReplayError` naming the offending
    record position.
    """
    events = tuple(events)
    if not events:
        raise ReplayError("record 1: empty log, expected a start record")
    head = events[0]
    if head.kind != "start":
        raise ReplayError(f"record 1: expected start record, found {head.kind!r}")
    try:
        total_nodes = int(head.info["total_nodes"])
        mode = Mode(head.info["mode"])
        threshold_regular = int(head.info["regular_threshold"])
        blocks = int(head.info["initial_defender"])
        max_epochs = int(head.info["max_epochs"])
    except (KeyError, ValueError) as exc:
        raise ReplayError(f"record 1: incomplete start record ({exc})") from exc

    captured_nodes: set[int] = set()
    captured = 0
    threshold_active = threshold_regular
    injected = 0
    trigger_time: Optional[float] = None
    epoch = 0
    burst = False
    cap_hit = False
    decided = False
    last_time = head.time

    for position, event in enumerate(events[1:], start=2):
        if decided:
            raise ReplayError(f"record {position}: event after the game was decided")
        if event.time < last_time:
            raise ReplayError(
                f"record {position}: time goes backwards ({event.time} < {last_time})"
            )
        last_time = event.time
        if event.kind == "capture":
            if event.node is None:
                raise ReplayError(f"record {position}: capture without a node id")
            if event.node in captured_nodes:
                raise ReplayError(f"record {position}: node {event.node} captured twice")
            captured_nodes.add(event.node)
            captured += 1
        elif event.kind == "block":
            blocks += 1
        elif event.kind == "inject":
            injected = int(event.info.get("count", 0))
            threshold_active = threshold_regular + injected
            trigger_time = event.time
        elif event.kind == "observe":
            epoch += 1
            attacker_crossed = captured >= threshold_active
            defender_crossed = blocks >= threshold_regular
            if attacker_crossed or defender_crossed:
                burst = attacker_crossed and not defender_crossed
                decided = True
            elif epoch >= max_epochs:
                cap_hit = True
                decided = True
        elif event.kind == "start":
            raise ReplayError(f"record {position}: duplicate start record")
        else:
            raise ReplayError(f"record {position}: unknown event kind {event.kind!r}")

    if not decided:
        raise ReplayError(f"record {len(events)}: log ends before the game is decided")
    return SimOutcome(
        burst=burst,
        trigger_time=trigger_time,
        injected_reserve=injected,
        final_attacker=captured,
        final_defender=blocks,
        observed_epochs=epoch,
        cap_hit=cap_hit,
        events=events,
    )


def write_event_log(events: Iterable[Event], path) -> None:
    """Serialize events as one JSON record per line."""
    with open(path, "w", encoding="utf-8") as handle:
        for event in events:
            handle.write(event.to_json())
            handle.write("\n")


def read_event_log(path) -> tuple[Event, ...]:
    """Parse a line-delimited event log, validating record structure."""
    events: list[Event] = []
    with open(path, "r", encoding="utf-8") as handle:
        for position, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReplayError(f"record {position}: invalid JSON ({exc})") from exc
            if not isinstance(record, dict) or "t" not in record or "kind" not in record:
                raise ReplayError(f"record {position}: missing required fields 't'/'kind'")
            time = record.pop("t")
            kind = record.pop("kind")
            node = record.pop("node", None)
            events.append(Event(time=float(time), kind=str(kind), node=node, info=record))
    return tuple(events)

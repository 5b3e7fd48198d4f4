"""Attacker/defender block-accrual game on a decentralized ledger network.

Simulate the race between an attacker capturing ledger nodes and a defender
finalizing honest blocks, estimate the probability that the network bursts
(the attacker reaches a controlling majority first) under regular and
reserve-backed safety strategies, and optimize the reserve configuration
that minimizes total defense cost.
"""

from .batch import RaceOutcomes, sample_outcomes
from .config import ConfigError, RunConfig, load_config
from .economics import (
    CostParams,
    OptimizationResult,
    SearchGrid,
    StrategyCosts,
    SurfaceRow,
    cost_matrix,
    expected_cost,
    feasibility,
    optimize,
    reserve_cost,
    total_cost,
)
from .estimators import (
    BurstEstimate,
    DegenerateModelError,
    McConfig,
    PreExitDistribution,
    TransformPoint,
    estimate_burst_probability,
    estimate_joint_functional,
    estimate_pre_exit_distribution,
    poisson_kernel,
    wilson_interval,
)
from .netsim import (
    Event,
    NodeState,
    ReplayError,
    SimOutcome,
    Topology,
    burst_frequency,
    elect_leader,
    read_event_log,
    replay,
    run_network_sim,
    write_event_log,
)
from .oracle import (
    oracle_burst_probability,
    oracle_joint_functional,
    oracle_pre_exit_distribution,
)
from .process import (
    GameParams,
    GameTrajectory,
    Mode,
    ReservePolicy,
    Thresholds,
    exit_indices,
    first_crossing,
    is_burst,
    safety_trigger_epoch,
    sample_increment_pair,
    sample_reserve,
    sample_trajectory,
)
from .rng import fold_seed, substream

__version__ = "0.1.0"

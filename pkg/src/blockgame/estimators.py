"""Monte Carlo estimators for burst probabilities and path transforms.

All estimators consume the shared batch engine, so two estimators run with
the same ``McConfig`` see exactly the same trajectories: the transform
estimator at the all-ones point reproduces the burst estimate bit for bit,
and safety-mode estimates share randomness with regular-mode ones.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .batch import RaceOutcomes, sample_outcomes
from .process import GameParams, Mode, ReservePolicy

__all__ = [
    "McConfig",
    "BurstEstimate",
    "PreExitDistribution",
    "TransformPoint",
    "DegenerateModelError",
    "wilson_interval",
    "poisson_kernel",
    "estimate_burst_probability",
    "estimate_pre_exit_distribution",
    "estimate_joint_functional",
]

CAP_HIT_WARN_FRACTION = 0.01


class DegenerateModelError(RuntimeError):
    """Raised when the requested quantity does not exist for the parameters."""


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo budget: sample count, master seed, confidence level."""

    num_trajectories: int
    seed: int
    ci_level: float = 0.95

    def __post_init__(self) -> None:
        if not isinstance(self.num_trajectories, int) or self.num_trajectories < 1:
            raise ValueError(
                f"num_trajectories must be a positive integer (got {self.num_trajectories!r})"
            )
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError(f"ci_level must lie in (0, 1) (got {self.ci_level!r})")


@dataclass(frozen=True)
class BurstEstimate:
    """Estimated attacker-win probability with a Wilson interval."""

    mode: Mode
    q_hat: float
    ci_low: float
    ci_high: float
    cap_hit_fraction: float
    samples: int


@dataclass(frozen=True)
class PreExitDistribution:
    """Empirical law of the attacker count one epoch before absorption.

    ``pmf[k]`` for ``k = 0..total_nodes``; ``p_below`` is the mass at or
    below ``floor(M/2)``, the regime in which reserves can still be
    committed in time. ``samples`` counts the paths that realized an
    attacker exit at epoch >= 1.
    """

    pmf: np.ndarray
    p_below: float
    samples: int


@dataclass(frozen=True)
class TransformPoint:
    """Arguments of the path transform; each must lie in (0, 1]."""

    zeta: float
    g0: float = 1.0
    g1: float = 1.0
    z0: float = 1.0
    z1: float = 1.0

    def __post_init__(self) -> None:
        for name in ("zeta", "g0", "g1", "z0", "z1"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1] (got {value!r})")


def wilson_interval(
    successes: int, total: int, *, level: float = 0.95, z: Optional[float] = None
) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Pass either a confidence ``level`` or an explicit ``z`` score. Wilson is
    preferred over the Wald interval here because estimated probabilities
    are routinely near 0 or 1.
    """
    if not 0 <= successes <= total or total < 1:
        raise ValueError("need 0 <= successes <= total with total >= 1")
    if z is None:
        if not 0.0 < level < 1.0:
            raise ValueError(f"level must lie in (0, 1) (got {level!r})")
        z = float(norm.ppf(0.5 + level / 2.0))
    p = successes / total
    z2 = z * z
    denom = 1.0 + z2 / total
    center = (p + z2 / (2.0 * total)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / total + z2 / (4.0 * total * total))
    return max(0.0, center - half), min(1.0, center + half)


def poisson_kernel(rate: float, elapsed: float, count: int) -> float:
    """Poisson pmf ``P{N = count}`` for a stream of ``rate`` over ``elapsed``."""
    if rate < 0 or elapsed < 0 or count < 0:
        raise ValueError("rate, elapsed and count must be non-negative")
    mean = rate * elapsed
    if mean == 0.0:
        return 1.0 if count == 0 else 0.0
    return math.exp(count * math.log(mean) - mean - math.lgamma(count + 1))


def _warn_on_cap(outcomes: RaceOutcomes) -> float:
    fraction = float(np.mean(outcomes.cap_hit))
    if fraction > CAP_HIT_WARN_FRACTION:
        warnings.warn(
            f"{fraction:.1%} of paths hit the epoch cap without resolving; "
            "they are counted as non-burst",
            stacklevel=3,
        )
    return fraction


def estimate_burst_probability(
    params: GameParams,
    mode: Mode,
    policy: Optional[ReservePolicy],
    mc: McConfig,
) -> BurstEstimate:
    """Estimate the probability that the attacker absorbs strictly first.

    Safety-mode estimates average over the per-path reserve draw, matching
    the outer expectation over ``B``. Paths that hit the epoch cap count as
    non-burst and are reported via ``cap_hit_fraction`` (a warning is issued
    above 1%).
    """
    mode = Mode(mode)
    outcomes = sample_outcomes(params, policy, mode, mc.seed, mc.num_trajectories)
    cap_fraction = _warn_on_cap(outcomes)
    bursts = int(np.count_nonzero(outcomes.burst))
    q_hat = bursts / mc.num_trajectories
    low, high = wilson_interval(bursts, mc.num_trajectories, level=mc.ci_level)
    return BurstEstimate(
        mode=mode,
        q_hat=q_hat,
        ci_low=low,
        ci_high=high,
        cap_hit_fraction=cap_fraction,
        samples=mc.num_trajectories,
    )


def estimate_pre_exit_distribution(params: GameParams, mc: McConfig) -> PreExitDistribution:
    """Empirical pre-exit law under regular play.

    Collects the attacker count one epoch before attacker absorption over
    paths whose attacker exit happened at epoch >= 1; raises
    ``DegenerateModelError`` when no path qualifies (for instance when the
    game is already decided at epoch 0).
    """
    outcomes = sample_outcomes(params, None, Mode.REGULAR, mc.seed, mc.num_trajectories)
    _warn_on_cap(outcomes)
    eligible = outcomes.attacker_exit >= 1
    count = int(np.count_nonzero(eligible))
    if count == 0:
        raise DegenerateModelError(
            "no path realized an attacker exit after epoch 0; pre-exit law is undefined"
        )
    values = outcomes.pre_attacker[eligible]
    pmf = np.bincount(values, minlength=params.total_nodes + 1).astype(float)
    pmf /= count
    p_below = float(pmf[: params.total_nodes // 2 + 1].sum())
    return PreExitDistribution(pmf=pmf, p_below=p_below, samples=count)


def estimate_joint_functional(
    params: GameParams,
    point: TransformPoint,
    policy: Optional[ReservePolicy],
    mc: McConfig,
) -> float:
    """Monte Carlo mean of the path transform on the attacker-win event.

    Averages ``zeta**nu * g0**A_pre * g1**A_exit * z0**H_pre * z1**H_exit``
    over all paths (zero off the attacker-win event). With a policy the game
    runs in safety mode, averaging over the reserve draw; without one it
    runs in regular mode. At the all-ones point this equals the burst
    estimate from :func:`estimate_burst_probability` on the same seed,
    exactly.
    """
    mode = Mode.SAFETY if policy is not None else Mode.REGULAR
    outcomes = sample_outcomes(params, policy, mode, mc.seed, mc.num_trajectories)
    _warn_on_cap(outcomes)
    rows = outcomes.burst
    if not rows.any():
        return 0.0
    nu = outcomes.attacker_exit[rows].astype(float)
    values = (
        point.zeta**nu
        * point.g0 ** outcomes.pre_attacker[rows].astype(float)
        * point.g1 ** outcomes.exit_attacker[rows].astype(float)
        * point.z0 ** outcomes.pre_defender[rows].astype(float)
        * point.z1 ** outcomes.exit_defender[rows].astype(float)
    )
    return float(values.sum() / mc.num_trajectories)

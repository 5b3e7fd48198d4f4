"""Two-strategy defense cost model and reserve-provisioning optimizer.

Regular play risks the full burst loss; safety play pays for a reserve and
risks a reduced burst probability. The total cost blends the two by the
probability that the pre-warning arrives in time, and the optimizer searches
a grid over reserve count and availability subject to the payback constraint
(a reserve is only admissible if the regular-play exposure it displaces can
cover its cost).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .estimators import (
    McConfig,
    estimate_burst_probability,
    estimate_pre_exit_distribution,
    wilson_interval,
)
from .oracle import DEFAULT_TRUNCATION, oracle_burst_probability, oracle_pre_exit_distribution
from .process import GameParams, Mode, ReservePolicy

__all__ = [
    "CostParams",
    "SearchGrid",
    "StrategyCosts",
    "SurfaceRow",
    "OptimizationResult",
    "cost_matrix",
    "reserve_cost",
    "expected_cost",
    "total_cost",
    "feasibility",
    "optimize",
]


@dataclass(frozen=True)
class CostParams:
    """Unit cost of one reserved node and the loss incurred on a burst.

    ``reserve_pricing`` selects the reserve cost form: ``"flat"`` charges for
    owning the nodes (``unit_safety_cost * n``), ``"availability"`` charges
    for their expected commitment (``unit_safety_cost * n * rho``).
    """

    unit_safety_cost: float
    burst_loss: float
    reserve_pricing: str = "flat"

    def __post_init__(self) -> None:
        if self.unit_safety_cost < 0:
            raise ValueError(f"unit_safety_cost must be >= 0 (got {self.unit_safety_cost!r})")
        if self.burst_loss < 0:
            raise ValueError(f"burst_loss must be >= 0 (got {self.burst_loss!r})")
        if self.reserve_pricing not in ("flat", "availability"):
            raise ValueError(
                f"reserve_pricing must be 'flat' or 'availability' (got {self.reserve_pricing!r})"
            )


@dataclass(frozen=True)
class SearchGrid:
    """Grid over reserve count 0..n_max and availability multiples of rho_step."""

    n_max: int
    rho_step: float = 0.05

    def __post_init__(self) -> None:
        if not isinstance(self.n_max, int) or self.n_max < 0:
            raise ValueError(f"n_max must be an integer >= 0 (got {self.n_max!r})")
        if not 0.0 < self.rho_step <= 1.0:
            raise ValueError(f"rho_step must lie in (0, 1] (got {self.rho_step!r})")

    def rho_values(self) -> tuple[float, ...]:
        count = int(math.floor(1.0 / self.rho_step + 1e-9))
        values = []
        for k in range(1, count + 1):
            value = round(k * self.rho_step, 12)
            if value <= 1.0:
                values.append(value)
        return tuple(values)

    def n_values(self) -> range:
        return range(self.n_max + 1)


@dataclass(frozen=True)
class StrategyCosts:
    """Expected costs of both strategies plus the blended total, with the
    inputs they were computed from."""

    regular_expected: float
    safety_expected: float
    total: float
    q0: float
    q1: float
    p_below: float
    reserve_count: int
    availability: float
    reserve_cost: float


@dataclass(frozen=True)
class SurfaceRow:
    """One grid point of the cost surface (column order is the wire format)."""

    n: int
    rho: float
    q1_hat: float
    q1_ci_low: float
    q1_ci_high: float
    total_cost: float
    feasible: bool


@dataclass(frozen=True)
class OptimizationResult:
    """Optimizer output: best feasible point, full surface, threshold point.

    ``frontier`` is the first grid point, in (n, rho) lexicographic order, at
    which the safety strategy is no more expensive than regular play.
    ``ambiguous`` lists feasible points other than the best whose total-cost
    interval overlaps the best point's interval (indistinguishable at the
    Monte Carlo resolution).
    """

    best: Optional[tuple[int, float]]
    best_cost: Optional[float]
    surface: tuple[SurfaceRow, ...]
    frontier: Optional[tuple[int, float]]
    ambiguous: tuple[tuple[int, float], ...]
    q0: float
    q0_ci: tuple[float, float]
    p_below: float
    feasibility_note: str


def reserve_cost(policy: ReservePolicy, costs: CostParams) -> float:
    """Cost of the reserve under the configured pricing form."""
    base = costs.unit_safety_cost * policy.reserve_count
    if costs.reserve_pricing == "availability":
        return base * policy.availability
    return base


def cost_matrix(costs: CostParams, policy: ReservePolicy, q: float) -> np.ndarray:
    """Prior cost matrix, rows (regular, safety) x columns (no burst, burst).

    ``q`` is validated but does not enter the entries; it only weights the
    columns when taking expectations.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1] (got {q!r})")
    c = reserve_cost(policy, costs)
    v = costs.burst_loss
    return np.array([[0.0, v], [c, c + v]])


def expected_cost(strategy: Mode, costs: CostParams, policy: ReservePolicy, q: float) -> float:
    """Row expectation of the cost matrix at burst probability ``q``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1] (got {q!r})")
    if Mode(strategy) is Mode.REGULAR:
        return costs.burst_loss * q
    return reserve_cost(policy, costs) + costs.burst_loss * q


def total_cost(
    costs: CostParams,
    policy: ReservePolicy,
    q0: float,
    q1: float,
    p_below: float,
) -> StrategyCosts:
    """Blend both strategies by the probability of a timely pre-warning.

    With probability ``p_below`` the reserve can be committed in time and the
    safety cost applies; otherwise the attack was too fast and the regular
    exposure is incurred.
    """
    for name, value in (("q0", q0), ("q1", q1), ("p_below", p_below)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1] (got {value!r})")
    c = reserve_cost(policy, costs)
    regular = expected_cost(Mode.REGULAR, costs, policy, q0)
    safety = expected_cost(Mode.SAFETY, costs, policy, q1)
    total = safety * p_below + regular * (1.0 - p_below)
    return StrategyCosts(
        regular_expected=regular,
        safety_expected=safety,
        total=total,
        q0=q0,
        q1=q1,
        p_below=p_below,
        reserve_count=policy.reserve_count,
        availability=policy.availability,
        reserve_cost=c,
    )


def feasibility(
    reserve_count: int, costs: CostParams, q0: float, availability: float = 1.0
) -> bool:
    """Payback constraint on a reserve of ``reserve_count`` nodes.

    The reserve must be affordable out of the regular-play exposure it
    displaces: infeasible whenever the exposure does not exceed the reserve
    cost, otherwise requires ``n >= c / (V*q0 - c)``. A free reserve
    (``c == 0``) is always feasible.
    """
    policy = ReservePolicy(reserve_count=reserve_count, availability=availability)
    c = reserve_cost(policy, costs)
    if c == 0.0:
        return True
    exposure = costs.burst_loss * q0
    if exposure <= c:
        return False
    return reserve_count >= c / (exposure - c)


def optimize(
    params: GameParams,
    costs: CostParams,
    grid: SearchGrid,
    mc: McConfig,
    *,
    q_source: str = "mc",
    truncation: int = DEFAULT_TRUNCATION,
) -> OptimizationResult:
    """Search the grid for the cheapest feasible reserve configuration.

    The regular-play burst probability and the pre-warning probability are
    estimated once (they do not depend on the policy); the safety-mode burst
    probability is evaluated per grid point. With ``q_source="mc"`` all
    probabilities are Monte Carlo estimates sharing the seed in ``mc``, so
    grid points are compared under common random numbers; with
    ``q_source="oracle"`` they are exact lattice values and the returned
    argmin is deterministic. Ties resolve to the smallest n, then smallest
    rho.
    """
    if q_source not in ("mc", "oracle"):
        raise ValueError(f"q_source must be 'mc' or 'oracle' (got {q_source!r})")

    if q_source == "oracle":
        q0 = oracle_burst_probability(params, Mode.REGULAR, truncation=truncation)
        q0_ci = (q0, q0)
        _, p_below = oracle_pre_exit_distribution(params, truncation)
        fixed_cache: dict[int, float] = {0: q0}

        def q1_point(policy: ReservePolicy) -> tuple[float, float, float]:
            value = 0.0
            for b in range(policy.reserve_count + 1):
                if b not in fixed_cache:
                    fixed_cache[b] = oracle_burst_probability(
                        params, Mode.SAFETY, reserve=b, truncation=truncation
                    )
                weight = (
                    math.comb(policy.reserve_count, b)
                    * policy.availability**b
                    * (1.0 - policy.availability) ** (policy.reserve_count - b)
                )
                value += weight * fixed_cache[b]
            return value, value, value

    else:
        regular = estimate_burst_probability(params, Mode.REGULAR, None, mc)
        q0 = regular.q_hat
        q0_ci = (regular.ci_low, regular.ci_high)
        p_below = estimate_pre_exit_distribution(params, mc).p_below

        def q1_point(policy: ReservePolicy) -> tuple[float, float, float]:
            est = estimate_burst_probability(params, Mode.SAFETY, policy, mc)
            return est.q_hat, est.ci_low, est.ci_high

    rows: list[SurfaceRow] = []
    best: Optional[tuple[int, float]] = None
    best_row: Optional[SurfaceRow] = None
    frontier: Optional[tuple[int, float]] = None
    for n in grid.n_values():
        for rho in grid.rho_values():
            policy = ReservePolicy(reserve_count=n, availability=rho)
            q1, q1_low, q1_high = q1_point(policy)
            strat = total_cost(costs, policy, q0, q1, p_below)
            feasible = feasibility(n, costs, q0, availability=rho)
            row = SurfaceRow(
                n=n,
                rho=rho,
                q1_hat=q1,
                q1_ci_low=q1_low,
                q1_ci_high=q1_high,
                total_cost=strat.total,
                feasible=feasible,
            )
            rows.append(row)
            if frontier is None and strat.safety_expected <= strat.regular_expected:
                frontier = (n, rho)
            if feasible and (best_row is None or strat.total < best_row.total_cost):
                best = (n, rho)
                best_row = row

    ambiguous: list[tuple[int, float]] = []
    if best_row is not None:
        best_policy = ReservePolicy(best_row.n, best_row.rho)
        best_interval = _total_interval(costs, best_policy, q0, p_below, best_row)
        for row in rows:
            if not row.feasible or (row.n, row.rho) == best:
                continue
            interval = _total_interval(costs, ReservePolicy(row.n, row.rho), q0, p_below, row)
            if interval[0] <= best_interval[1] and best_interval[0] <= interval[1]:
                ambiguous.append((row.n, row.rho))

    infeasible = sum(1 for row in rows if not row.feasible)
    if best_row is None:
        note = "no feasible point: the payback constraint excludes the whole grid"
    elif infeasible:
        note = f"{infeasible} of {len(rows)} grid points infeasible under the payback constraint"
    else:
        note = "all grid points feasible"

    return OptimizationResult(
        best=best,
        best_cost=None if best_row is None else best_row.total_cost,
        surface=tuple(rows),
        frontier=frontier,
        ambiguous=tuple(ambiguous),
        q0=q0,
        q0_ci=q0_ci,
        p_below=p_below,
        feasibility_note=note,
    )


def _total_interval(
    costs: CostParams,
    policy: ReservePolicy,
    q0: float,
    p_below: float,
    row: SurfaceRow,
) -> tuple[float, float]:
    # Total cost is monotone increasing in q1, so the interval maps through.
    low = total_cost(costs, policy, q0, row.q1_ci_low, p_below).total
    high = total_cost(costs, policy, q0, row.q1_ci_high, p_below).total
    return low, high

"""Exact absorption probabilities for the block-accrual race.

The observed pair of cumulative counts is a homogeneous Markov chain on the
integer lattice: per epoch the total increment ``s = x + y`` is geometric
with success ``d / (la + lh + d)`` and, given ``s``, the attacker share is
``Binomial(s, la / (la + lh))``. This module solves the resulting absorbing
chain exactly on the truncated lattice, as an oracle that is independent of
the Monte Carlo path.

Two solvers are provided and must agree: a direct pass in topological order
(jumps never decrease either count, so states can be eliminated exactly from
the high corner down) and plain value iteration.
"""

from __future__ import annotations

import math
import warnings
from typing import Optional

import numpy as np

from .process import GameParams, Mode, ReservePolicy

__all__ = [
    "oracle_burst_probability",
    "oracle_pre_exit_distribution",
    "oracle_joint_functional",
    "increment_pmf_clipped",
    "STATE_CAP",
    "DEFAULT_TRUNCATION",
]

STATE_CAP = 10_000
DEFAULT_TRUNCATION = 512
_MASS_TOL = 1e-12
_RESIDUAL_REPORT = 1e-9
_VI_TOL = 1e-13
_VI_MAX_SWEEPS = 200_000


def _total_pmf(total_rate: float, observation_rate: float, truncation: int) -> np.ndarray:
    """Geometric law of the per-epoch total increment, truncated adaptively."""
    success = observation_rate / (total_rate + observation_rate)
    ratio = total_rate / (total_rate + observation_rate)
    probs = [success]
    while len(probs) < truncation + 1 and 1.0 - math.fsum(probs) > _MASS_TOL:
        probs.append(probs[-1] * ratio)
    return np.asarray(probs)


def _binom_pmf(n: int, p: float, k: np.ndarray) -> np.ndarray:
    if p == 0.0:
        return (k == 0).astype(float)
    if p == 1.0:
        return (k == n).astype(float)
    log_comb = math.lgamma(n + 1) - np.array(
        [math.lgamma(v + 1) + math.lgamma(n - v + 1) for v in k]
    )
    return np.exp(log_comb + k * math.log(p) + (n - k) * math.log(1.0 - p))


def increment_pmf_clipped(
    attacker_rate: float,
    defender_rate: float,
    observation_rate: float,
    clip_attacker: int,
    clip_defender: int,
    truncation: int = DEFAULT_TRUNCATION,
) -> tuple[np.ndarray, float]:
    """Joint per-epoch increment pmf with both coordinates clipped.

    Cell ``(i, j)`` with ``i < clip_attacker`` and ``j < clip_defender`` is
    the exact probability of increment ``(i, j)``; boundary cells aggregate
    the clipped tails (``i >= clip_attacker`` and/or ``j >= clip_defender``).
    Returns ``(pmf, residual)`` where ``residual`` is the truncated tail of
    the total-increment law, not yet assigned to any cell.
    """
    pm = np.zeros((clip_attacker + 1, clip_defender + 1))
    total_rate = attacker_rate + defender_rate
    if total_rate == 0.0:
        pm[0, 0] = 1.0
        return pm, 0.0
    totals = _total_pmf(total_rate, observation_rate, truncation)
    share = attacker_rate / total_rate
    for s, ps in enumerate(totals):
        i = np.arange(s + 1)
        split = _binom_pmf(s, share, i)
        rows = np.minimum(i, clip_attacker)
        cols = np.minimum(s - i, clip_defender)
        np.add.at(pm, (rows, cols), ps * split)
    residual = max(0.0, 1.0 - float(totals.sum()))
    return pm, residual


def _initial_verdict(params: GameParams, threshold_attacker: int) -> Optional[float]:
    """Absorption decided before any epoch, or by degenerate rates."""
    if params.initial_defender >= params.regular_threshold:
        return 0.0  # simultaneous crossing counts for the defender
    if params.initial_attacker >= threshold_attacker:
        return 1.0
    if params.attacker_rate == 0.0:
        return 0.0
    if params.defender_rate == 0.0:
        return 1.0  # attacker absorbs almost surely, defender never moves
    return None


def _check_state_cap(threshold_attacker: int, threshold_defender: int) -> None:
    states = threshold_attacker * threshold_defender
    if states > STATE_CAP:
        raise ValueError(
            f"state space {threshold_attacker} x {threshold_defender} = {states} "
            f"exceeds the oracle cap of {STATE_CAP}"
        )


def _report_residual(residual: float) -> None:
    if residual > _RESIDUAL_REPORT:
        warnings.warn(
            f"truncated increment law leaves tail mass {residual:.3e}; "
            "the burst probability is conservatively rounded up",
            stacklevel=3,
        )


def _burst_weights(pm: np.ndarray, residual: float, ta: int, th: int) -> np.ndarray:
    """One-step attacker-win probability from every transient state.

    From ``(a, h)`` the attacker wins outright when the jump lands at
    ``a + i >= ta`` while ``h + j < th``; the truncation residual is charged
    to the attacker (conservative).
    """
    col_cum = np.cumsum(pm, axis=1)
    row_suffix = np.cumsum(col_cum[::-1], axis=0)[::-1]  # [i0, j0] = P{i >= i0, j <= j0}
    w = np.empty((ta, th))
    for a in range(ta):
        for h in range(th):
            w[a, h] = row_suffix[ta - a, th - h - 1] + residual
    return w


def _solve_direct(
    pm: np.ndarray, absorb: np.ndarray, ta: int, th: int, discount: float
) -> np.ndarray:
    """Exact elimination in topological order (high corner first)."""
    u = np.zeros((ta, th))
    hold = pm[0, 0]
    for a in range(ta - 1, -1, -1):
        for h in range(th - 1, -1, -1):
            # u[a, h] is still zero, so the self-loop term drops out of the sum.
            flow = float(np.sum(pm[: ta - a, : th - h] * u[a:, h:]))
            u[a, h] = discount * (absorb[a, h] + flow) / (1.0 - discount * hold)
    return u


def _solve_value_iteration(
    pm: np.ndarray, absorb: np.ndarray, ta: int, th: int, discount: float
) -> np.ndarray:
    u = np.zeros((ta, th))
    delta = math.inf
    for _ in range(_VI_MAX_SWEEPS):
        nxt = np.empty_like(u)
        for a in range(ta):
            for h in range(th):
                flow = float(np.sum(pm[: ta - a, : th - h] * u[a:, h:]))
                nxt[a, h] = discount * (absorb[a, h] + flow)
        delta = float(np.max(np.abs(nxt - u)))
        u = nxt
        if delta < _VI_TOL:
            return u
    warnings.warn(f"value iteration stopped at sweep cap with delta {delta:.3e}", stacklevel=3)
    return u


def _burst_probability_fixed(
    params: GameParams, reserve: int, truncation: int, method: str
) -> float:
    threshold_attacker = params.regular_threshold + reserve
    verdict = _initial_verdict(params, threshold_attacker)
    if verdict is not None:
        return verdict
    ta, th = threshold_attacker, params.regular_threshold
    _check_state_cap(ta, th)
    pm, residual = increment_pmf_clipped(
        params.attacker_rate, params.defender_rate, params.observation_rate, ta, th, truncation
    )
    _report_residual(residual)
    absorb = _burst_weights(pm, residual, ta, th)
    if method == "direct":
        u = _solve_direct(pm, absorb, ta, th, discount=1.0)
    elif method == "value_iteration":
        u = _solve_value_iteration(pm, absorb, ta, th, discount=1.0)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(u[params.initial_attacker, params.initial_defender])


def _reserve_pmf(policy: ReservePolicy) -> list[tuple[int, float]]:
    n, rho = policy.reserve_count, policy.availability
    return [(b, math.comb(n, b) * rho**b * (1.0 - rho) ** (n - b)) for b in range(n + 1)]


def oracle_burst_probability(
    params: GameParams,
    mode: Mode = Mode.REGULAR,
    policy: Optional[ReservePolicy] = None,
    reserve: Optional[int] = None,
    truncation: int = DEFAULT_TRUNCATION,
    method: str = "direct",
) -> float:
    """Exact probability that the attacker absorbs strictly first.

    Under ``Mode.SAFETY`` pass either a fixed ``reserve`` (the conditional
    value given ``B``) or a ``policy`` (averages over ``B ~ Binomial(n,
    rho)``). Simultaneous absorption counts for the defender. Raises
    ``ValueError`` when the truncated state space exceeds ``STATE_CAP``.
    """
    mode = Mode(mode)
    if mode is Mode.REGULAR:
        return _burst_probability_fixed(params, 0, truncation, method)
    if reserve is not None:
        return _burst_probability_fixed(params, int(reserve), truncation, method)
    if policy is None:
        raise ValueError("safety mode requires a reserve policy or a fixed reserve")
    return sum(
        weight * _burst_probability_fixed(params, b, truncation, method)
        for b, weight in _reserve_pmf(policy)
        if weight > 0.0
    )


def oracle_pre_exit_distribution(
    params: GameParams, truncation: int = DEFAULT_TRUNCATION
) -> tuple[np.ndarray, float]:
    """Exact law of the attacker count one epoch before attacker absorption.

    Matches the Monte Carlo estimator: paths stop at the first crossing by
    either side, and the law conditions on the attacker crossing at the
    stopping epoch (ties included) at an epoch >= 1. Returns
    ``(pmf over 0..total_nodes, mass at or below floor(M/2))``.
    """
    ta = params.regular_threshold
    th = params.regular_threshold
    if params.initial_attacker >= ta or params.initial_defender >= th:
        raise ValueError("no pre-exit epoch exists: a threshold is crossed at epoch 0")
    if params.attacker_rate == 0.0:
        raise ValueError("attacker never absorbs: pre-exit law undefined")
    _check_state_cap(ta, th)
    pm, residual = increment_pmf_clipped(
        params.attacker_rate, params.defender_rate, params.observation_rate, ta, th, truncation
    )
    _report_residual(residual)

    # Expected visit counts solve the transposed balance equations; forward
    # topological order works because jumps never decrease a coordinate.
    visits = np.zeros((ta, th))
    hold = pm[0, 0]
    for a in range(ta):
        for h in range(th):
            inflow = 1.0 if (a == params.initial_attacker and h == params.initial_defender) else 0.0
            # visits[a - i, h - j] paired with pm[i, j]; the self-loop term is
            # zero because visits[a, h] has not been assigned yet.
            inflow += float(np.sum(pm[: a + 1, : h + 1] * visits[a::-1, h::-1]))
            visits[a, h] = inflow / (1.0 - hold)

    # Attacker-crossing weight regardless of the defender coordinate: the
    # stopped path records an attacker exit even on ties.
    row_tail = np.cumsum(pm.sum(axis=1)[::-1])[::-1]  # [i0] = P{i >= i0}
    pmf = np.zeros(params.total_nodes + 1)
    for a in range(ta):
        pmf[a] = float(np.sum(visits[a, :])) * (row_tail[ta - a] + residual)
    total = pmf.sum()
    if total <= 0.0:
        raise ValueError("attacker absorption has probability zero; pre-exit law undefined")
    pmf /= total
    p_below = float(pmf[: params.total_nodes // 2 + 1].sum())
    return pmf, p_below


def oracle_joint_functional(
    params: GameParams,
    zeta: float,
    g0: float = 1.0,
    g1: float = 1.0,
    z0: float = 1.0,
    z1: float = 1.0,
    mode: Mode = Mode.REGULAR,
    policy: Optional[ReservePolicy] = None,
    reserve: Optional[int] = None,
    truncation: int = DEFAULT_TRUNCATION,
) -> float:
    """Exact transform of the attacker-win event.

    Expectation of ``zeta**nu * g0**A_pre * g1**A_exit * z0**H_pre *
    z1**H_exit`` on the event that the attacker absorbs strictly first, all
    arguments in ``(0, 1]``. At the all-ones point this equals the burst
    probability.
    """
    for name, value in (("zeta", zeta), ("g0", g0), ("g1", g1), ("z0", z0), ("z1", z1)):
        if not 0.0 < value <= 1.0:
            raise ValueError(f"{name} must lie in (0, 1] (got {value!r})")
    mode = Mode(mode)
    if mode is Mode.REGULAR:
        reserves = [(0, 1.0)]
    elif reserve is not None:
        reserves = [(int(reserve), 1.0)]
    elif policy is not None:
        reserves = _reserve_pmf(policy)
    else:
        raise ValueError("safety mode requires a reserve policy or a fixed reserve")
    return sum(
        weight * _joint_functional_fixed(params, zeta, g0, g1, z0, z1, b, truncation)
        for b, weight in reserves
        if weight > 0.0
    )


def _joint_functional_fixed(
    params: GameParams,
    zeta: float,
    g0: float,
    g1: float,
    z0: float,
    z1: float,
    reserve: int,
    truncation: int,
) -> float:
    ta = params.regular_threshold + reserve
    th = params.regular_threshold
    a0, h0 = params.initial_attacker, params.initial_defender
    if h0 >= th:
        return 0.0
    if a0 >= ta:
        # Absorbed at epoch 0; the pre-exit factors use the initial counts.
        return g0**a0 * g1**a0 * z0**h0 * z1**h0
    if params.attacker_rate == 0.0:
        return 0.0
    _check_state_cap(ta, th)
    pm, residual = increment_pmf_clipped(
        params.attacker_rate, params.defender_rate, params.observation_rate, ta, th, truncation
    )
    _report_residual(residual)

    total_rate = params.attacker_rate + params.defender_rate
    totals = _total_pmf(total_rate, params.observation_rate, truncation)
    share = params.attacker_rate / total_rate

    # Absorption weights need unclipped jumps because g1 and z1 apply to the
    # landing counts; transient flow only touches exact (unclipped) cells.
    absorb = np.zeros((ta, th))
    for a in range(ta):
        for h in range(th):
            acc = residual  # conservative: landing factors 1 on the tail
            for s, ps in enumerate(totals):
                i_min = ta - a
                if s < i_min:
                    continue
                i = np.arange(i_min, s + 1)
                j = s - i
                keep = h + j < th
                if not np.any(keep):
                    continue
                split = _binom_pmf(s, share, i[keep])
                acc += ps * float(np.sum(split * g1 ** (a + i[keep]) * z1 ** (h + j[keep])))
            absorb[a, h] = acc * g0**a * z0**h
    u = _solve_direct(pm, absorb, ta, th, discount=zeta)
    return float(u[a0, h0])

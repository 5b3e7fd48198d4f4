"""Lattice oracle: hand-checked golden value, solver agreement, edge cases."""

import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from blockgame import (
    GameParams,
    Mode,
    ReservePolicy,
    oracle_burst_probability,
    oracle_joint_functional,
    oracle_pre_exit_distribution,
)
from blockgame.oracle import increment_pmf_clipped

GOLDEN = json.loads((Path(__file__).parent / "golden" / "m4_symmetric.json").read_text())

M4 = GameParams(total_nodes=4, attacker_rate=1.0, defender_rate=1.0, observation_rate=1.0)


def exact_symmetric_burst(threshold: int) -> Fraction:
    """Independent rational solve for unit symmetric rates.

    Per epoch P{x=i, y=j} = C(i+j, i)/3**(i+j+1); the y-marginal is
    P{y=k} = (1/2)**(k+1). Transient states are eliminated exactly from the
    high corner down, entirely in rational arithmetic.
    """

    def joint(i, j):
        return Fraction(math.comb(i + j, i), 3 ** (i + j + 1))

    def defender_below(h_room):  # P{j < h_room}
        return 1 - Fraction(1, 2**h_room)

    def win(a, h):  # P{i >= threshold - a, j < threshold - h}
        a_room, h_room = threshold - a, threshold - h
        box = sum(joint(i, j) for i in range(a_room) for j in range(h_room))
        return defender_below(h_room) - box

    u = {}
    for a in reversed(range(threshold)):
        for h in reversed(range(threshold)):
            acc = win(a, h)
            for i in range(threshold - a):
                for j in range(threshold - h):
                    if (i, j) != (0, 0):
                        acc += joint(i, j) * u[(a + i, h + j)]
            u[(a, h)] = acc / (1 - joint(0, 0))
    return u[(0, 0)]


class TestGoldenValue:
    def test_hand_check_reproduces_golden(self):
        exact = exact_symmetric_burst(M4.regular_threshold)
        assert exact == Fraction(GOLDEN["q0_fraction"])
        assert float(exact) == GOLDEN["q0"]

    def test_direct_solver_hits_golden(self):
        assert oracle_burst_probability(M4) == pytest.approx(GOLDEN["q0"], abs=1e-10)

    def test_value_iteration_agrees_with_direct(self):
        for params in [
            M4,
            GameParams(6, 0.5, 2.0),
            GameParams(5, 2.0, 0.5, observation_rate=2.0),
            GameParams(8, 1.3, 1.1, initial_attacker=1, initial_defender=2),
        ]:
            direct = oracle_burst_probability(params, method="direct")
            iterated = oracle_burst_probability(params, method="value_iteration")
            assert abs(direct - iterated) < 1e-10


class TestEdgeCases:
    def test_attacker_rate_zero(self):
        assert oracle_burst_probability(GameParams(4, 0.0, 1.0)) == 0.0

    def test_defender_rate_zero(self):
        assert oracle_burst_probability(GameParams(4, 1.0, 0.0)) == 1.0

    def test_both_rates_zero(self):
        assert oracle_burst_probability(GameParams(4, 0.0, 0.0)) == 0.0

    def test_initial_crossings(self):
        assert oracle_burst_probability(GameParams(4, 1.0, 1.0, initial_attacker=3)) == 1.0
        assert oracle_burst_probability(GameParams(4, 1.0, 1.0, initial_defender=3)) == 0.0
        # simultaneous initial crossing is a tie: defender survives
        assert (
            oracle_burst_probability(GameParams(4, 1.0, 1.0, initial_attacker=3, initial_defender=3))
            == 0.0
        )

    def test_state_cap_enforced(self):
        with pytest.raises(ValueError, match="state space"):
            oracle_burst_probability(GameParams(400, 1.0, 1.0))

    def test_unknown_method(self):
        with pytest.raises(ValueError, match="method"):
            oracle_burst_probability(M4, method="magic")

    def test_residual_reported(self):
        with pytest.warns(UserWarning, match="tail mass"):
            oracle_burst_probability(GameParams(4, 5.0, 5.0), truncation=10)


class TestSafetyAveraging:
    def test_zero_reserve_matches_regular(self):
        q0 = oracle_burst_probability(M4)
        assert oracle_burst_probability(M4, Mode.SAFETY, reserve=0) == q0
        assert oracle_burst_probability(M4, Mode.SAFETY, policy=ReservePolicy(0, 0.7)) == q0

    def test_policy_averages_binomial(self):
        policy = ReservePolicy(2, 0.5)
        by_reserve = [
            oracle_burst_probability(M4, Mode.SAFETY, reserve=b) for b in range(3)
        ]
        expected = 0.25 * by_reserve[0] + 0.5 * by_reserve[1] + 0.25 * by_reserve[2]
        actual = oracle_burst_probability(M4, Mode.SAFETY, policy=policy)
        assert actual == pytest.approx(expected, abs=1e-14)

    def test_monotone_in_reserve(self):
        values = [oracle_burst_probability(M4, Mode.SAFETY, reserve=b) for b in range(5)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_safety_needs_policy_or_reserve(self):
        with pytest.raises(ValueError):
            oracle_burst_probability(M4, Mode.SAFETY)


class TestIncrementPmf:
    def test_clipped_cells_absorb_tails(self):
        pm, residual = increment_pmf_clipped(1.0, 1.0, 1.0, 3, 3)
        assert pm.shape == (4, 4)
        assert pm.sum() + residual == pytest.approx(1.0, abs=1e-12)
        assert residual < 1e-11
        assert pm[0, 0] == pytest.approx(1 / 3, abs=1e-12)
        assert pm[1, 1] == pytest.approx(2 / 27, abs=1e-12)

    def test_zero_rates_hold_still(self):
        pm, residual = increment_pmf_clipped(0.0, 0.0, 1.0, 2, 2)
        assert pm[0, 0] == 1.0 and residual == 0.0


class TestPreExit:
    def test_normalized_and_supported_below_threshold(self):
        pmf, p_below = oracle_pre_exit_distribution(M4)
        assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
        threshold = M4.regular_threshold
        assert np.all(pmf[threshold:] == 0.0)
        # under regular play the pre-exit count is always below threshold,
        # hence within 0..floor(M/2): the timely-warning mass is one
        assert p_below == pytest.approx(1.0, abs=1e-12)

    def test_heavier_defender_shifts_mass_down(self):
        light = oracle_pre_exit_distribution(GameParams(6, 1.0, 0.2))[0]
        heavy = oracle_pre_exit_distribution(GameParams(6, 0.2, 1.0))[0]
        assert heavy[0] > light[0]

    def test_degenerate_parameters_rejected(self):
        with pytest.raises(ValueError):
            oracle_pre_exit_distribution(GameParams(4, 0.0, 1.0))
        with pytest.raises(ValueError):
            oracle_pre_exit_distribution(GameParams(4, 1.0, 1.0, initial_attacker=3))


class TestJointFunctional:
    def test_unit_point_equals_burst_probability(self):
        for params in [M4, GameParams(6, 1.5, 0.8)]:
            assert oracle_joint_functional(params, 1.0) == pytest.approx(
                oracle_burst_probability(params), abs=1e-12
            )

    def test_decreasing_in_zeta(self):
        values = [oracle_joint_functional(M4, z) for z in (0.5, 0.7, 0.9, 1.0)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_discount_bounds(self):
        # each path has nu >= 1, so the transform is at most zeta * q0
        q0 = oracle_burst_probability(M4)
        value = oracle_joint_functional(M4, 0.25)
        assert 0.0 < value <= 0.25 * q0 + 1e-12

    def test_arguments_validated(self):
        with pytest.raises(ValueError):
            oracle_joint_functional(M4, 0.0)
        with pytest.raises(ValueError):
            oracle_joint_functional(M4, 0.9, g0=1.2)

    def test_safety_averaging(self):
        policy = ReservePolicy(2, 0.5)
        per_reserve = [
            oracle_joint_functional(M4, 0.9, mode=Mode.SAFETY, reserve=b) for b in range(3)
        ]
        expected = 0.25 * per_reserve[0] + 0.5 * per_reserve[1] + 0.25 * per_reserve[2]
        assert oracle_joint_functional(M4, 0.9, mode=Mode.SAFETY, policy=policy) == pytest.approx(
            expected, abs=1e-14
        )

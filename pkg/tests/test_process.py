"""Core race process: increment law, trajectories, exit indices."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockgame import (
    GameParams,
    GameTrajectory,
    Mode,
    ReservePolicy,
    Thresholds,
    exit_indices,
    first_crossing,
    safety_trigger_epoch,
    sample_increment_pair,
    sample_reserve,
    sample_trajectory,
)
from blockgame.rng import substream


def make_trajectory(attacker, defender, times=None):
    attacker = np.asarray(attacker, dtype=np.int64)
    defender = np.asarray(defender, dtype=np.int64)
    if times is None:
        times = np.arange(len(attacker), dtype=float)
    return GameTrajectory(
        times=np.asarray(times, dtype=float),
        attacker_counts=attacker,
        defender_counts=defender,
        attacker_exit=None,
        defender_exit=None,
        realized_reserve=0,
        cap_hit=False,
    )


class TestParams:
    def test_threshold_is_strict_majority(self):
        for m, expected in [(2, 2), (3, 2), (4, 3), (5, 3), (6, 4), (7, 4), (10, 6)]:
            assert GameParams(m, 1.0, 1.0).regular_threshold == expected

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"total_nodes": 1},
            {"attacker_rate": -0.1},
            {"attacker_rate": math.inf},
            {"observation_rate": 0.0},
            {"initial_attacker": 5},
            {"initial_defender": -1},
            {"max_epochs": 0},
        ],
    )
    def test_invalid_params_rejected(self, kwargs):
        base = dict(total_nodes=4, attacker_rate=1.0, defender_rate=1.0)
        base.update(kwargs)
        with pytest.raises(ValueError):
            GameParams(**base)

    def test_invalid_policy_rejected(self):
        with pytest.raises(ValueError):
            ReservePolicy(-1, 0.5)
        with pytest.raises(ValueError):
            ReservePolicy(2, 1.5)

    def test_thresholds(self):
        params = GameParams(4, 1.0, 1.0)
        t = Thresholds.for_game(params, reserve=2)
        assert (t.regular_threshold, t.safety_threshold) == (3, 5)
        with pytest.raises(ValueError):
            Thresholds(regular_threshold=3, safety_threshold=2)


class TestIncrementLaw:
    def test_zero_rate_never_counts(self):
        rng = substream(1, 0)
        for _ in range(200):
            x, _, _ = sample_increment_pair(0.0, 1.0, 1.0, rng)
            assert x == 0

    def test_gap_is_positive(self):
        rng = substream(2, 0)
        for _ in range(200):
            *_, dt = sample_increment_pair(1.0, 1.0, 2.0, rng)
            assert dt > 0

    def test_marginal_is_geometric(self):
        # For rate = observation rate = 1 the marginal is P{x=k} = (1/2)^(k+1).
        rng = substream(3, 0)
        n = 1_000_000
        dt = rng.exponential(1.0, n)
        x = rng.poisson(1.0 * dt)
        for k in range(8):
            expected = 0.5 ** (k + 1)
            observed = np.mean(x == k)
            sigma = math.sqrt(expected * (1 - expected) / n)
            assert abs(observed - expected) < 4 * sigma, f"bin {k}"

    def test_joint_law_matches_closed_form(self):
        # Symmetric unit rates: P{x=i, y=j} = C(i+j, i) / 3^(i+j+1).
        rng = substream(4, 0)
        n = 1_000_000
        dt = rng.exponential(1.0, n)
        x = rng.poisson(dt)
        y = rng.poisson(dt)
        for i in range(4):
            for j in range(4):
                expected = math.comb(i + j, i) / 3 ** (i + j + 1)
                observed = np.mean((x == i) & (y == j))
                sigma = math.sqrt(expected * (1 - expected) / n)
                assert abs(observed - expected) < 4 * sigma, f"bin ({i},{j})"

    def test_scalar_draws_follow_same_law(self):
        rng = substream(5, 0)
        draws = [sample_increment_pair(1.0, 1.0, 1.0, rng) for _ in range(50_000)]
        p00 = np.mean([(x, y) == (0, 0) for x, y, _ in draws])
        assert abs(p00 - 1 / 3) < 4 * math.sqrt((1 / 3) * (2 / 3) / len(draws))


class TestReserve:
    def test_degenerate_policies(self):
        rng = substream(6, 0)
        assert sample_reserve(ReservePolicy(0, 0.7), rng) == 0
        assert sample_reserve(ReservePolicy(5, 0.0), rng) == 0
        for _ in range(50):
            assert sample_reserve(ReservePolicy(3, 1.0), rng) == 3

    def test_binomial_frequencies(self):
        rng = substream(7, 0)
        n = 200_000
        counts = np.bincount(
            [sample_reserve(ReservePolicy(2, 0.5), rng) for _ in range(n)], minlength=3
        )
        for b, expected in enumerate([0.25, 0.5, 0.25]):
            sigma = math.sqrt(expected * (1 - expected) / n)
            assert abs(counts[b] / n - expected) < 4 * sigma


class TestTrajectory:
    def test_attacker_already_at_threshold(self):
        params = GameParams(4, 1.0, 1.0, initial_attacker=3)
        trajectory = sample_trajectory(params, None, Mode.REGULAR, seed=0)
        assert trajectory.attacker_exit == 0

    def test_defender_frozen_attacker_absorbs(self):
        params = GameParams(4, 1.0, 0.0)
        for seed in range(20):
            trajectory = sample_trajectory(params, None, Mode.REGULAR, seed=seed)
            assert trajectory.defender_exit is None
            assert trajectory.attacker_exit is not None

    def test_certain_reserve_is_degenerate(self):
        params = GameParams(4, 1.0, 1.0)
        for seed in range(20):
            trajectory = sample_trajectory(params, ReservePolicy(3, 1.0), Mode.SAFETY, seed=seed)
            assert trajectory.realized_reserve == 3

    def test_safety_requires_policy(self):
        params = GameParams(4, 1.0, 1.0)
        with pytest.raises(ValueError):
            sample_trajectory(params, None, Mode.SAFETY, seed=0)

    @given(seed=st.integers(0, 2**63 - 1))
    @settings(max_examples=40, deadline=None)
    def test_determinism(self, seed):
        params = GameParams(6, 1.2, 0.9)
        a = sample_trajectory(params, None, Mode.REGULAR, seed)
        b = sample_trajectory(params, None, Mode.REGULAR, seed)
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.attacker_counts, b.attacker_counts)
        assert np.array_equal(a.defender_counts, b.defender_counts)
        assert (a.attacker_exit, a.defender_exit) == (b.attacker_exit, b.defender_exit)

    @given(
        seed=st.integers(0, 2**32),
        m=st.sampled_from([2, 4, 5, 8]),
        la=st.sampled_from([0.4, 1.0, 2.5]),
        lh=st.sampled_from([0.4, 1.0, 2.5]),
    )
    @settings(max_examples=60, deadline=None)
    def test_path_invariants(self, seed, m, la, lh):
        params = GameParams(m, la, lh)
        trajectory = sample_trajectory(params, None, Mode.REGULAR, seed)
        assert np.all(np.diff(trajectory.times) > 0)
        assert np.all(np.diff(trajectory.attacker_counts) >= 0)
        assert np.all(np.diff(trajectory.defender_counts) >= 0)
        assert trajectory.attacker_counts[0] == params.initial_attacker
        assert trajectory.defender_counts[0] == params.initial_defender
        threshold = params.regular_threshold
        nu = trajectory.attacker_exit
        if nu is not None and nu >= 1:
            assert trajectory.attacker_counts[nu - 1] < threshold <= trajectory.attacker_counts[nu]
        mu = trajectory.defender_exit
        if mu is not None and mu >= 1:
            assert trajectory.defender_counts[mu - 1] < threshold <= trajectory.defender_counts[mu]
        # the path stops at the first crossing
        assert nu is not None or mu is not None or trajectory.cap_hit

    @given(seed=st.integers(0, 2**32), reserve=st.integers(0, 4))
    @settings(max_examples=60, deadline=None)
    def test_threshold_dominance_on_shared_randomness(self, seed, reserve):
        params = GameParams(6, 1.5, 1.0)
        regular = sample_trajectory(params, None, Mode.REGULAR, seed)
        safety = sample_trajectory(params, ReservePolicy(reserve, 1.0), Mode.SAFETY, seed)
        if regular.attacker_exit is not None and safety.attacker_exit is not None:
            assert safety.attacker_exit >= regular.attacker_exit
        # shared increment stream: common prefix of counts coincides
        k = min(len(regular.times), len(safety.times))
        assert np.array_equal(regular.attacker_counts[:k], safety.attacker_counts[:k])
        assert np.array_equal(regular.defender_counts[:k], safety.defender_counts[:k])

    def test_cap_hit_flagged(self):
        params = GameParams(4, 0.0, 0.0, max_epochs=5)
        trajectory = sample_trajectory(params, None, Mode.REGULAR, seed=0)
        assert trajectory.cap_hit
        assert trajectory.attacker_exit is None and trajectory.defender_exit is None
        assert len(trajectory.times) == 6


class TestExitIndices:
    def test_documented_cases(self):
        t = make_trajectory([0, 1, 3, 6], [0, 0, 0, 0])
        nu, _ = exit_indices(t, Thresholds(regular_threshold=5, safety_threshold=5))
        assert nu == 3

        t = make_trajectory([0, 0, 0], [0, 0, 2])
        _, mu = exit_indices(t, Thresholds(regular_threshold=3, safety_threshold=3))
        assert mu is None

        t = make_trajectory([5], [0])
        nu, _ = exit_indices(t, Thresholds(regular_threshold=5, safety_threshold=5))
        assert nu == 0

    def test_first_crossing_boundary(self):
        assert first_crossing([0, 2, 4], 4) == 2
        assert first_crossing([0, 2, 4], 5) is None
        assert first_crossing([7], 7) == 0


class TestSafetyTrigger:
    def test_times_one_epoch_before_exit(self):
        t = make_trajectory([0, 1, 5], [0, 0, 0], times=[0.0, 1.2, 2.5])
        t = GameTrajectory(
            times=t.times,
            attacker_counts=t.attacker_counts,
            defender_counts=t.defender_counts,
            attacker_exit=2,
            defender_exit=None,
            realized_reserve=0,
            cap_hit=False,
        )
        assert safety_trigger_epoch(t) == 1.2

    def test_no_prior_epoch(self):
        t = make_trajectory([5], [0], times=[0.0])
        t = GameTrajectory(
            times=t.times,
            attacker_counts=t.attacker_counts,
            defender_counts=t.defender_counts,
            attacker_exit=0,
            defender_exit=None,
            realized_reserve=0,
            cap_hit=False,
        )
        assert safety_trigger_epoch(t) is None

    def test_no_exit(self):
        t = make_trajectory([0, 1], [0, 0])
        assert safety_trigger_epoch(t) is None

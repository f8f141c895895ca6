import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from papcascade.calibration import (
    Objective,
    ThresholdCalibration,
    apply_threshold,
    candidate_thresholds,
    evaluate_threshold,
    sweep_threshold,
)
from papcascade.errors import DataError
from papcascade.tables import Stage

from oracles import oracle_best_threshold, oracle_binary_objective


class TestSweepBasics:
    def test_perfectly_separable_returns_midpoint(self):
        cal = sweep_threshold([0.1, 0.9], [False, True], Objective.F1_POSITIVE)
        assert cal.threshold == 0.5
        assert cal.achieved_score == 100.0

    def test_all_equal_probs_degenerate_candidates(self):
        # only decisions are all-positive (t=0) and all-negative (t=1)
        cal = sweep_threshold([0.7] * 5, [True, True, True, False, False])
        assert cal.threshold in (0.0, 1.0)
        # all-positive F1 = 2*3/(6+2) = 0.75 beats all-negative (0)
        assert cal.threshold == 0.0
        assert cal.achieved_score == pytest.approx(75.0, abs=1e-9)

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            sweep_threshold([0.2, 0.4], [True, True])

    def test_probabilities_outside_unit_interval_rejected(self):
        with pytest.raises(DataError):
            sweep_threshold([0.2, 1.4], [True, False])

    def test_candidates_are_zero_midpoints_one(self):
        cands = candidate_thresholds([0.2, 0.2, 0.6, 0.9])
        assert cands.tolist() == [0.0, 0.4, 0.75, 1.0]


class TestSweepOptimality:
    @pytest.mark.parametrize("objective", list(Objective))
    def test_matches_exhaustive_oracle(self, objective):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(2, 120))
            probs = np.round(rng.random(n), 2)
            truth = rng.integers(0, 2, size=n).astype(bool)
            truth[0], truth[1 % n] = True, False
            cal = sweep_threshold(probs, truth, objective)
            _, best = oracle_best_threshold(
                probs.tolist(), truth.tolist(), objective.value
            )
            assert cal.achieved_score / 100 == pytest.approx(best, abs=1e-12)
            # returned threshold actually achieves the maximum
            achieved = oracle_binary_objective(
                probs.tolist(), truth.tolist(), cal.threshold, objective.value
            )
            assert achieved == pytest.approx(best, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.floats(0, 1).map(lambda x: round(x, 2)),  # rounded: many ties
                st.booleans(),
            ),
            min_size=2,
            max_size=60,
        )
    )
    def test_hypothesis_sweep_never_beaten_by_oracle(self, pairs):
        probs = [p for p, _ in pairs]
        truth = [y for _, y in pairs]
        if all(truth) or not any(truth):
            return
        cal = sweep_threshold(probs, truth, Objective.F1_POSITIVE)
        _, best = oracle_best_threshold(probs, truth, "f1_positive")
        assert cal.achieved_score == 100 * best

    def test_smallest_maximizer_wins_ties(self):
        # macro-F1 of [p >= t] on anti-correlated pair ties at t=0 and t=1
        cal = sweep_threshold([0.2, 0.8], [True, False], Objective.MACRO_F1)
        assert cal.threshold == 0.0
        assert cal.achieved_score == pytest.approx(100 / 3, abs=1e-9)

    def test_score_at_least_every_candidate(self):
        rng = np.random.default_rng(23)
        probs = rng.random(60)
        truth = rng.integers(0, 2, size=60).astype(bool)
        truth[0], truth[1] = True, False
        cal = sweep_threshold(probs, truth, Objective.MACRO_F1)
        for t in candidate_thresholds(probs):
            assert cal.achieved_score >= evaluate_threshold(
                probs, truth, t, Objective.MACRO_F1
            ) - 1e-12


class TestSweepProperties:
    def test_self_consistency(self):
        rng = np.random.default_rng(29)
        for _ in range(50):
            n = int(rng.integers(2, 80))
            probs = rng.random(n)
            truth = rng.integers(0, 2, size=n).astype(bool)
            truth[0], truth[1 % n] = True, False
            for objective in Objective:
                cal = sweep_threshold(probs, truth, objective)
                again = evaluate_threshold(probs, truth, cal.threshold, objective)
                assert again == cal.achieved_score

    def test_deterministic(self):
        rng = np.random.default_rng(31)
        probs = rng.random(40)
        truth = rng.integers(0, 2, size=40).astype(bool)
        truth[:2] = [True, False]
        a = sweep_threshold(probs, truth)
        b = sweep_threshold(probs.copy(), truth.copy())
        assert a == b

    def test_monotone_relabeling_preserves_partition_and_score(self):
        rng = np.random.default_rng(37)
        probs = rng.random(50)
        truth = rng.integers(0, 2, size=50).astype(bool)
        truth[:2] = [True, False]
        cal = sweep_threshold(probs, truth, Objective.F1_POSITIVE)
        mapped = probs**3  # strictly increasing [0,1] -> [0,1]
        cal2 = sweep_threshold(mapped, truth, Objective.F1_POSITIVE)
        assert cal2.achieved_score == cal.achieved_score
        assert np.array_equal(mapped >= cal2.threshold, probs >= cal.threshold)


class TestApplyThreshold:
    def cal(self, t):
        return ThresholdCalibration(1, Stage.STAGE1, t, 50.0, Objective.F1_POSITIVE)

    def test_equality_is_positive(self):
        assert apply_threshold(0.5, self.cal(0.5)) is True

    def test_zero_zero_boundary(self):
        assert apply_threshold(0.0, self.cal(0.0)) is True

    def test_below_threshold_is_negative(self):
        assert apply_threshold(0.49, self.cal(0.5)) is False


class TestCalibrationRecord:
    def test_threshold_range_validated(self):
        with pytest.raises(DataError):
            ThresholdCalibration(1, Stage.STAGE1, 1.5, 50.0, Objective.F1_POSITIVE)
        with pytest.raises(DataError):
            ThresholdCalibration(1, Stage.STAGE1, 0.5, 120.0, Objective.F1_POSITIVE)

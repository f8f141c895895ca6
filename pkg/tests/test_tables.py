import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from papcascade.errors import DataError
from papcascade.labels import RawLabel
from papcascade.tables import (
    LabelTable,
    PredictionRecord,
    PredictionTable,
    Stage,
    logits_to_probabilities,
)


class TestSigmoid:
    def test_zero_maps_to_half(self):
        assert logits_to_probabilities([0.0])[0] == 0.5

    def test_value_matches_high_precision_evaluator(self):
        # mpmath oracle: 1/(1+exp(-2)) to 25 digits, rounded to binary64
        import mpmath

        expected = float(1 / (1 + mpmath.exp(-2)))
        assert expected == 0.8807970779778823
        assert logits_to_probabilities([2.0])[0] == pytest.approx(expected, abs=1e-15)

    @given(st.floats(-30, 30))
    def test_symmetry(self, z):
        p, q = logits_to_probabilities([z, -z])
        assert q == pytest.approx(1.0 - p, abs=1e-15)

    @given(st.lists(st.floats(-30, 30), min_size=2, max_size=20))
    def test_monotone_and_in_open_interval(self, zs):
        ps = logits_to_probabilities(zs)
        assert np.all(ps > 0) and np.all(ps < 1)
        order = np.argsort(zs)
        assert np.all(np.diff(ps[order]) >= 0)

    def test_non_finite_rejected(self):
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(DataError):
                logits_to_probabilities([bad])


class TestPredictionRecord:
    def test_stage1_needs_one_probability(self):
        rec = PredictionRecord("img", "m", 1, Stage.STAGE1, (0.93,))
        assert rec.p == (0.93,)
        with pytest.raises(DataError):
            PredictionRecord("img", "m", 1, Stage.STAGE1, (0.9, 0.1))

    def test_stage2_needs_two_probabilities(self):
        rec = PredictionRecord("img", "m", 1, Stage.STAGE2, (0.2, 0.9))
        assert rec.p == (0.2, 0.9)
        with pytest.raises(DataError):
            PredictionRecord("img", "m", 1, Stage.STAGE2, (0.2,))

    def test_range_enforced(self):
        with pytest.raises(DataError):
            PredictionRecord("img", "m", 1, Stage.STAGE1, (1.2,))
        with pytest.raises(DataError):
            PredictionRecord("img", "m", 1, Stage.STAGE1, (float("nan"),))

    def test_stage2_probabilities_need_not_sum_to_one(self):
        # two independent sigmoid heads
        rec = PredictionRecord("img", "m", 1, Stage.STAGE2, (0.9, 0.8))
        assert sum(rec.p) > 1.0


class TestPredictionTable:
    def _records(self):
        return [
            PredictionRecord("a", "m1", 1, Stage.STAGE1, (0.1,)),
            PredictionRecord("a", "m2", 1, Stage.STAGE1, (0.3,)),
            PredictionRecord("b", "m1", 1, Stage.STAGE1, (0.9,)),
            PredictionRecord("a", "m1", 1, Stage.STAGE2, (0.5, 0.6)),
        ]

    def test_round_trips_records(self):
        table = PredictionTable.from_records(self._records())
        assert list(table.records()) == self._records()

    def test_duplicate_key_rejected(self):
        records = self._records() + [
            PredictionRecord("a", "m1", 1, Stage.STAGE1, (0.7,))
        ]
        with pytest.raises(DataError, match="duplicate"):
            PredictionTable.from_records(records)

    def test_same_key_different_stage_or_fold_ok(self):
        records = self._records() + [
            PredictionRecord("a", "m1", 2, Stage.STAGE1, (0.7,))
        ]
        table = PredictionTable.from_records(records)
        assert len(table) == 5
        assert table.fold_ids() == [1, 2]

    def test_selectors(self):
        table = PredictionTable.from_records(self._records())
        stage1 = table.select(stage=Stage.STAGE1)
        assert len(stage1) == 3
        assert stage1.model_names() == ["m1", "m2"]
        only_a = table.select(image_ids=["a"])
        assert only_a.unique_image_ids() == ["a"]


class TestLabelTable:
    def test_empty_rejected(self):
        with pytest.raises(DataError):
            LabelTable({})

    def test_counts(self):
        table = LabelTable({"a": RawLabel.RUBBISH, "b": RawLabel.BOTH})
        counts = table.counts()
        assert counts[RawLabel.RUBBISH] == 1
        assert counts[RawLabel.BOTH] == 1
        assert counts[RawLabel.HEALTHY] == 0

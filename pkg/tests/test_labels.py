import pytest

from papcascade.errors import DataError
from papcascade.labels import (
    FINAL_CLASSES,
    FinalLabel,
    RawLabel,
    Stage1Label,
    Stage2Target,
    final_label_from_raw,
    map_stage1_label,
    map_stage2_target,
)


class TestStage1Mapping:
    def test_rubbish_stays_rubbish(self):
        assert map_stage1_label(RawLabel.RUBBISH) is Stage1Label.RUBBISH

    def test_both_is_suitable(self):
        assert map_stage1_label(RawLabel.BOTH) is Stage1Label.SUITABLE

    def test_healthy_is_suitable(self):
        assert map_stage1_label(RawLabel.HEALTHY) is Stage1Label.SUITABLE

    def test_total_over_all_raw_labels(self):
        for raw in RawLabel:
            assert map_stage1_label(raw) in (Stage1Label.RUBBISH, Stage1Label.SUITABLE)


class TestStage2Mapping:
    def test_both_sets_both_flags(self):
        assert map_stage2_target(RawLabel.BOTH) == Stage2Target(True, True)

    def test_healthy(self):
        assert map_stage2_target(RawLabel.HEALTHY) == Stage2Target(True, False)

    def test_unhealthy(self):
        assert map_stage2_target(RawLabel.UNHEALTHY) == Stage2Target(False, True)

    def test_rubbish_rejected(self):
        with pytest.raises(DataError):
            map_stage2_target(RawLabel.RUBBISH)

    def test_total_exactly_on_non_rubbish(self):
        for raw in RawLabel:
            if raw is RawLabel.RUBBISH:
                continue
            target = map_stage2_target(raw)
            assert target.healthy or target.unhealthy


def test_stage2_target_requires_a_flag():
    with pytest.raises(DataError):
        Stage2Target(False, False)


def test_final_label_excludes_both():
    assert final_label_from_raw(RawLabel.HEALTHY) is FinalLabel.HEALTHY
    assert final_label_from_raw(RawLabel.RUBBISH) is FinalLabel.RUBBISH
    with pytest.raises(DataError):
        final_label_from_raw(RawLabel.BOTH)


def test_final_class_order_is_fixed():
    assert FINAL_CLASSES == (FinalLabel.RUBBISH, FinalLabel.HEALTHY, FinalLabel.UNHEALTHY)

import numpy as np
import pytest

from papcascade.errors import DataError
from papcascade.labels import FINAL_CLASSES, FinalLabel
from papcascade.metrics import (
    ConfusionMatrix,
    aggregate_folds,
    aggregate_values,
    auroc_binary,
    auroc_macro_ovr,
    confusion_matrix,
    fold_metrics,
    macro_metrics,
    per_class_f1,
    weighted_f1,
)

from oracles import (
    oracle_accuracy,
    oracle_auroc_pairs,
    oracle_confusion,
    oracle_macro_f1,
    oracle_macro_precision,
    oracle_macro_recall,
    oracle_prf,
    oracle_weighted_f1,
)

R, H, U = FinalLabel.RUBBISH, FinalLabel.HEALTHY, FinalLabel.UNHEALTHY


def cm_from_counts(counts, classes=FINAL_CLASSES):
    return ConfusionMatrix(classes=classes, counts=np.array(counts))


class TestConfusionMatrix:
    def test_perfect_prediction_is_diagonal(self):
        cm = confusion_matrix([H, H, U], [H, H, U])
        assert cm.counts[1, 1] == 2 and cm.counts[2, 2] == 1
        assert cm.counts.sum() == np.trace(cm.counts)

    def test_total_confusion_has_zero_diagonal(self):
        cm = confusion_matrix([R, H], [H, R])
        assert np.trace(cm.counts) == 0
        assert cm.total == 2

    def test_cells_sum_to_sample_count(self):
        rng = np.random.default_rng(1)
        truth = [FINAL_CLASSES[i] for i in rng.integers(0, 3, 20)]
        pred = [FINAL_CLASSES[i] for i in rng.integers(0, 3, 20)]
        cm = confusion_matrix(truth, pred)
        assert cm.total == 20
        assert cm.counts.tolist() == oracle_confusion(truth, pred, FINAL_CLASSES)

    def test_length_mismatch_and_empty_rejected(self):
        with pytest.raises(DataError):
            confusion_matrix([R], [R, H])
        with pytest.raises(DataError):
            confusion_matrix([], [])


class TestPerClassF1:
    def test_diagonal_only_means_100_everywhere(self):
        cm = cm_from_counts([[5, 0, 0], [0, 7, 0], [0, 0, 2]])
        assert all(v == 100.0 for v in per_class_f1(cm).values())

    def test_zero_division_resolves_to_zero(self):
        # class U: TP=0, FP=0, FN=5
        cm = cm_from_counts([[4, 0, 0], [0, 3, 0], [5, 0, 0]])
        assert per_class_f1(cm)[U] == 0.0

    def test_definitional_value(self):
        # class R: TP=8, FP=2, FN=4 -> F1 = 2*8 / (16 + 2 + 4) = 72.73
        cm = cm_from_counts([[8, 4, 0], [2, 6, 0], [0, 0, 3]])
        expected = 100 * 2 * 8 / (16 + 2 + 4)
        assert per_class_f1(cm)[R] == pytest.approx(expected, abs=1e-9)
        assert f"{per_class_f1(cm)[R]:.2f}" == "72.73"


class TestMacroMetrics:
    def test_perfect_three_class_matrix(self):
        cm = cm_from_counts([[5, 0, 0], [0, 7, 0], [0, 0, 2]])
        values = macro_metrics(cm)
        assert all(values[k] == 100.0 for k in values)

    def test_two_class_hand_matrix(self):
        # [[5,1],[2,4]]: accuracy 9/12; macro F1 = (10/13 + 8/11) / 2
        cm = cm_from_counts([[5, 1], [2, 4]], classes=(R, H))
        values = macro_metrics(cm)
        assert values["accuracy"] == pytest.approx(75.0, abs=1e-12)
        expected_macro = 100 * (10 / 13 + 8 / 11) / 2
        assert values["macro_f1"] == pytest.approx(expected_macro, abs=1e-9)
        assert f"{values['macro_f1']:.2f}" == "74.83"

    def test_uniform_random_predictions_have_accuracy_one_third(self):
        # any truth distribution; prediction uniform over the 3 classes
        rng = np.random.default_rng(42)
        n = 100000
        truth_idx = rng.choice(3, size=n, p=[0.5, 0.4, 0.1])
        pred_idx = rng.integers(0, 3, size=n)
        truth = [FINAL_CLASSES[i] for i in truth_idx]
        pred = [FINAL_CLASSES[i] for i in pred_idx]
        acc = macro_metrics(confusion_matrix(truth, pred))["accuracy"]
        assert acc == pytest.approx(33.3, abs=1.0)


class TestWeightedF1:
    def test_equal_supports_match_macro(self):
        cm = cm_from_counts([[6, 2, 2], [1, 7, 2], [3, 3, 4]])
        assert weighted_f1(cm) == pytest.approx(
            macro_metrics(cm)["macro_f1"], abs=1e-9
        )

    def test_single_class_truth(self):
        cm = cm_from_counts([[7, 3, 0], [0, 0, 0], [0, 0, 0]])
        assert weighted_f1(cm) == pytest.approx(per_class_f1(cm)[R], abs=1e-12)

    def test_support_weighting_rule(self):
        cm = cm_from_counts([[80, 10, 0], [4, 6, 0], [0, 0, 0]], classes=(R, H, U))
        f1 = per_class_f1(cm)
        expected = 0.9 * f1[R] + 0.1 * f1[H]  # supports 90 / 10 / 0
        assert weighted_f1(cm) == pytest.approx(expected, abs=1e-9)


class TestAurocBinary:
    def test_perfect_ranking(self):
        assert auroc_binary([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 100.0

    def test_all_ties_give_half(self):
        assert auroc_binary([0.5] * 6, [1, 0, 1, 0, 1, 0]) == 50.0

    def test_pairwise_example(self):
        # positives {0.9, 0.7, 0.6} vs negatives {0.8, 0.4}: 4 wins of 6 pairs
        value = auroc_binary([0.9, 0.8, 0.7, 0.6, 0.4], [1, 0, 1, 1, 0])
        assert value == pytest.approx(100 * 4 / 6, abs=1e-12)

    def test_matches_pair_counting_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            n = int(rng.integers(2, 40))
            scores = rng.choice([0.1, 0.25, 0.25, 0.5, 0.7, 0.9], size=n)
            labels = rng.integers(0, 2, size=n).astype(bool)
            if labels.all() or not labels.any():
                continue
            expected = oracle_auroc_pairs(scores.tolist(), labels.tolist())
            assert auroc_binary(scores, labels) / 100 == pytest.approx(
                expected, abs=1e-9
            )

    def test_complement_identity_is_exact(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            n = int(rng.integers(2, 60))
            scores = np.round(rng.random(n), 2)
            labels = rng.integers(0, 2, size=n).astype(bool)
            if labels.all() or not labels.any():
                continue
            assert auroc_binary(scores, labels) + auroc_binary(scores, ~labels) == 100.0

    def test_invariant_under_strictly_increasing_transform(self):
        rng = np.random.default_rng(5)
        scores = rng.random(50)
        labels = rng.integers(0, 2, size=50).astype(bool)
        labels[0], labels[1] = True, False
        raw = auroc_binary(scores, labels)
        squashed = auroc_binary((scores**2) * 7 + 1, labels)
        assert raw == squashed

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            auroc_binary([0.1, 0.9], [1, 1])


class TestAurocMacroOvr:
    def test_perfectly_separating_scores(self):
        truth = [R, H, U, R, H, U]
        scores = np.array(
            [
                [0.9, 0.05, 0.05],
                [0.1, 0.8, 0.1],
                [0.1, 0.1, 0.8],
                [0.7, 0.2, 0.1],
                [0.2, 0.7, 0.1],
                [0.05, 0.05, 0.9],
            ]
        )
        assert auroc_macro_ovr(scores, truth) == 100.0

    def test_random_scores_near_fifty(self):
        rng = np.random.default_rng(6)
        n = 100000
        truth = [FINAL_CLASSES[i] for i in rng.choice(3, size=n, p=[0.45, 0.45, 0.1])]
        raw = rng.random((n, 3))
        scores = raw / raw.sum(axis=1, keepdims=True)
        assert auroc_macro_ovr(scores, truth) == pytest.approx(50.0, abs=1.0)

    def test_hand_built_case_matches_pair_oracle(self):
        rng = np.random.default_rng(7)
        truth = [R, R, R, R, H, H, H, H, U, U, U, U]
        scores = rng.random((12, 3))
        expected = np.mean(
            [
                oracle_auroc_pairs(
                    scores[:, j].tolist(), [t is c for t in truth]
                )
                for j, c in enumerate(FINAL_CLASSES)
            ]
        )
        assert auroc_macro_ovr(scores, truth) / 100 == pytest.approx(expected, abs=1e-9)

    def test_missing_class_rejected(self):
        with pytest.raises(DataError):
            auroc_macro_ovr(np.random.default_rng(0).random((4, 3)), [R, R, H, H])


class TestAggregate:
    def test_identical_folds_have_zero_std(self):
        agg = aggregate_values([80.0, 80.0, 80.0])
        assert agg.mean == 80.0 and agg.std == 0.0

    def test_two_point_sample_std(self):
        agg = aggregate_values([75.0, 77.0])
        assert agg.mean == 76.0
        assert agg.std == pytest.approx(2**0.5, abs=1e-12)

    def test_formatting_matches_table_style(self):
        from papcascade.metrics import Aggregate

        assert Aggregate(78.456, 1.168).format() == "78.46 ± 1.17"

    def test_fewer_than_two_folds_rejected(self):
        with pytest.raises(DataError):
            aggregate_values([75.0])

    def test_aggregate_folds_maps_all_keys(self):
        per_fold = {1: {"a": 10.0, "b": 20.0}, 2: {"a": 30.0, "b": 40.0}}
        agg = aggregate_folds(per_fold)
        assert agg["a"].mean == 20.0 and agg["b"].mean == 30.0


class TestOracleSuite:
    def test_all_metrics_match_definitional_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            n = int(rng.integers(3, 50))
            truth_idx = rng.integers(0, 3, size=n)
            # make sure every class appears so AUROC is defined
            truth_idx[:3] = [0, 1, 2]
            pred_idx = rng.integers(0, 3, size=n)
            truth = [FINAL_CLASSES[i] for i in truth_idx]
            pred = [FINAL_CLASSES[i] for i in pred_idx]
            raw = rng.random((n, 3))
            scores = raw / raw.sum(axis=1, keepdims=True)

            fm = fold_metrics(truth, pred, scores)
            counts = oracle_confusion(truth, pred, FINAL_CLASSES)
            assert fm.macro_f1 / 100 == pytest.approx(oracle_macro_f1(counts), abs=1e-9)
            assert fm.weighted_f1 / 100 == pytest.approx(
                oracle_weighted_f1(counts), abs=1e-9
            )
            assert fm.precision / 100 == pytest.approx(
                oracle_macro_precision(counts), abs=1e-9
            )
            assert fm.recall / 100 == pytest.approx(oracle_macro_recall(counts), abs=1e-9)
            assert fm.accuracy / 100 == pytest.approx(oracle_accuracy(counts), abs=1e-9)
            prf = oracle_prf(counts)
            for j, c in enumerate(FINAL_CLASSES):
                assert fm.per_class_f1[c] / 100 == pytest.approx(prf[j][2], abs=1e-9)
            expected_auroc = np.mean(
                [
                    oracle_auroc_pairs(scores[:, j].tolist(), [t is c for t in truth])
                    for j, c in enumerate(FINAL_CLASSES)
                ]
            )
            assert fm.auroc / 100 == pytest.approx(expected_auroc, abs=1e-9)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(13)
        n = 40
        truth_idx = rng.integers(0, 3, size=n)
        truth_idx[:3] = [0, 1, 2]
        pred_idx = rng.integers(0, 3, size=n)
        raw = rng.random((n, 3))
        perm = rng.permutation(n)

        fm1 = fold_metrics(
            [FINAL_CLASSES[i] for i in truth_idx],
            [FINAL_CLASSES[i] for i in pred_idx],
            raw,
        )
        fm2 = fold_metrics(
            [FINAL_CLASSES[i] for i in truth_idx[perm]],
            [FINAL_CLASSES[i] for i in pred_idx[perm]],
            raw[perm],
        )
        assert fm1.scalar_values() == fm2.scalar_values()

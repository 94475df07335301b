import collections
import json

import numpy as np
import pytest

from tinyadv.attack import AttackResult, IterationRecord
from tinyadv.base import DataError, MetricError, PreconditionError
from tinyadv.metrics import *


def brute_accuracy(y_true, y_pred, excluded=()):
    kept = [(t, p) for t, p in zip(y_true, y_pred) if t not in excluded]
    if not kept:
        return None
    return sum(1 for t, p in kept if t == p) / float(len(kept))


def brute_macro_f1(y_true, y_pred):
    scores = []
    for c in sorted(set(y_true) | set(y_pred)):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        precision = tp / float(tp + fp) if tp + fp else 0.0
        recall = tp / float(tp + fn) if tp + fn else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall else 0.0)
        scores.append(f1)
    return sum(scores) / len(scores)


Timing = collections.namedtuple('Timing', 'generated elapsed')


class TestConfusionCounts(object):

    def TestConfusionCounts_SmallCase_OneVsRestCounts(self):
        counts = confusion_counts([0, 0, 1, 1], [0, 1, 1, 1])
        assert counts[0] == ConfusionCounts(tp=1, fp=0, fn=1, tn=2)
        assert counts[1] == ConfusionCounts(tp=2, fp=1, fn=0, tn=1)

    def TestConfusionCounts_PredictedOnlyClass_Included(self):
        counts = confusion_counts([0, 0], [0, 2])
        assert list(counts) == [0, 2]
        assert counts[2] == ConfusionCounts(tp=0, fp=1, fn=0, tn=1)


class TestAccuracy(object):

    def TestAccuracy_NoExclusion_PlainAccuracy(self):
        assert accuracy([0, 1, 1, 2], [0, 1, 0, 0]) == 0.5

    def TestAccuracy_ExcludedClass_IgnoreItsSamples(self):
        assert accuracy([0, 1, 1, 2], [0, 1, 0, 0], excluded=[0]) == 1 / 3.0

    def TestAccuracy_EverySampleExcluded_RaiseMetricError(self):
        with pytest.raises(MetricError):
            accuracy([0, 0], [0, 1], excluded=[0])

    def TestAccuracy_LengthMismatch_RaisePreconditionError(self):
        with pytest.raises(PreconditionError):
            accuracy([0, 1], [0])


class TestMacroF1(object):

    def TestMacroF1_HandCase_ElevenFifteenths(self):
        assert abs(macro_f1([0, 0, 1, 1], [0, 1, 1, 1]) - 11 / 15.0) < 1e-12

    def TestMacroF1_PerfectPredictions_One(self):
        assert macro_f1([2, 0, 1], [2, 0, 1]) == 1.0

    def TestMacroF1_PredictedOnlyClass_CountsAsZero(self):
        # class 0: f1 = 2/3, class 1: f1 = 0
        assert abs(macro_f1([0, 0], [0, 1]) - 1 / 3.0) < 1e-12

    def TestMacroF1_RelabeledClasses_SameScore(self):
        rng = np.random.default_rng(3)
        y_true, y_pred = rng.integers(0, 4, 50), rng.integers(0, 4, 50)
        permutation = np.array([2, 0, 3, 1])
        assert abs(macro_f1(y_true, y_pred) -
                   macro_f1(permutation[y_true], permutation[y_pred])) < 1e-12

    def TestMacroF1_Empty_RaisePreconditionError(self):
        with pytest.raises(PreconditionError):
            macro_f1([], [])


class TestAgainstBruteForce(object):

    def TestMetrics_RandomPairs_MatchBruteForce(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n = int(rng.integers(1, 30))
            k = int(rng.integers(1, 5))
            y_true = rng.integers(0, k, n).tolist()
            y_pred = rng.integers(0, k, n).tolist()
            excluded = [int(c) for c in range(k) if rng.random() < 0.3]

            assert abs(accuracy(y_true, y_pred) -
                       brute_accuracy(y_true, y_pred)) < 1e-12
            assert abs(macro_f1(y_true, y_pred) -
                       brute_macro_f1(y_true, y_pred)) < 1e-12
            expected = brute_accuracy(y_true, y_pred, excluded)
            if expected is None:
                with pytest.raises(MetricError):
                    accuracy(y_true, y_pred, excluded)
            else:
                assert abs(accuracy(y_true, y_pred, excluded) - expected) < 1e-12


class TestEvaluate(object):

    def TestEvaluate_ClassNames_ReportPerClassByName(self):
        report = evaluate([0, 0, 1, 1], [0, 1, 1, 1], excluded=[0],
                          class_names=['Benign', 'DoS'])
        assert report.accuracy == 1.0
        assert abs(report.macro_f1 - 11 / 15.0) < 1e-12
        assert [s.label for s in report.per_class] == ['Benign', 'DoS']
        assert report.per_class[1].support == 2
        assert report.excluded == ['Benign']
        assert report.to_dict()['sample_count'] == 4


class TestTimingRate(object):

    def TestTimingRate_Records_ExamplesPerMillisecond(self):
        records = [Timing(10, 0.001), Timing(10, 0.003)]
        assert timing_rate(records) == pytest.approx(5.0)

    def TestTimingRate_ZeroElapsed_UseFloor(self):
        assert timing_rate([Timing(4, 0.0)]) == 4 / 0.001

    def TestTimingRate_NothingGenerated_RaiseMetricError(self):
        with pytest.raises(MetricError):
            timing_rate([Timing(0, 0.5)])


def small_result():
    original = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    adversarial = np.array([[1.5, 2.0], [3.0, 4.0], [5.5, 6.5]])
    records = [IterationRecord(0, 2, 2, 1, 1, 0.002, 0.01),
               IterationRecord(1, 1, 1, 1, 2, 0.001, 0.01)]
    return AttackResult(adversarial, original, np.array([True, False, True]),
                        2, 'exhausted', records)


class TestRenderReport(object):

    def TestRenderReport_Result_RecordFields(self):
        text, record = render_report(small_result())
        assert record['iterations_run'] == 2
        assert record['stop_reason'] == 'exhausted'
        assert record['success_count'] == 2
        assert record['perturbable_count'] == 2
        assert record['timing_rate'] == pytest.approx(1.0)
        assert record['modified_features_mean'] == 1.5
        assert [r['new_successes'] for r in record['per_iteration']] == [1, 1]
        assert record['metrics'] is None
        assert 'iterations run: 2 (exhausted)' in text

    def TestRenderReport_Metrics_IncludedInRecordAndText(self):
        report = evaluate([0, 1], [0, 0])
        text, record = render_report(small_result(), report)
        assert record['metrics']['accuracy'] == 0.5
        assert 'accuracy: 0.5000' in text

    def TestWriteReport_Record_JsonDocument(self, tmp_path):
        _, record = render_report(small_result())
        path = tmp_path / 'report.json'
        write_report(record, str(path))
        assert json.loads(path.read_text(encoding='utf-8')) == record

    def TestWriteReport_MissingDirectory_RaiseDataError(self, tmp_path):
        _, record = render_report(small_result())
        with pytest.raises(DataError):
            write_report(record, str(tmp_path / 'missing' / 'report.json'))

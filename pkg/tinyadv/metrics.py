"""classification metrics, generation rates and attack reports"""

import collections
import io
import json

import numpy as np
from sklearn.metrics import (multilabel_confusion_matrix,
                             precision_recall_fscore_support)

from tinyadv.base import DataError, MetricError, PreconditionError

__all__ = ['ConfusionCounts', 'ClassScore', 'MetricReport', 'confusion_counts',
           'accuracy', 'macro_f1', 'evaluate', 'timing_rate', 'render_report',
           'write_report']

# Smallest elapsed time a rate is computed over, in milliseconds
MIN_ELAPSED_MS = 0.001

ConfusionCounts = collections.namedtuple('ConfusionCounts', 'tp fp fn tn')
ClassScore = collections.namedtuple('ClassScore',
                                    'label precision recall f1 support')


def _label_vectors(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=np.intp).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.intp).reshape(-1)
    if len(y_true) != len(y_pred):
        raise PreconditionError('%d true labels but %d predictions'
                                % (len(y_true), len(y_pred)))
    return y_true, y_pred


def confusion_counts(y_true, y_pred, labels=None):
    """Return one-vs-rest counts for every class.

    :param labels: Classes to count, defaulting to every class present
                   in either vector.
    :returns: An ordered mapping of class index to `ConfusionCounts`.
    """
    y_true, y_pred = _label_vectors(y_true, y_pred)
    if labels is None:
        labels = np.union1d(y_true, y_pred)
    counts = collections.OrderedDict()
    if not len(labels):
        return counts
    matrices = multilabel_confusion_matrix(y_true, y_pred, labels=labels)
    for label, ((tn, fp), (fn, tp)) in zip(labels, matrices):
        counts[int(label)] = ConfusionCounts(int(tp), int(fp), int(fn), int(tn))
    return counts


def accuracy(y_true, y_pred, excluded=()):
    """Return the proportion of correctly classified samples, ignoring
    samples whose true class is in `excluded`.

    :raises MetricError: If every sample is excluded.
    """
    y_true, y_pred = _label_vectors(y_true, y_pred)
    kept = ~np.isin(y_true, list(excluded))
    if not kept.any():
        raise MetricError('accuracy is undefined: no samples left after '
                          'excluding classes %s' % sorted(excluded))
    return np.count_nonzero(y_true[kept] == y_pred[kept]) / float(kept.sum())


def _scores(y_true, y_pred):
    labels = np.union1d(y_true, y_pred)
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average=None, zero_division=0)
    return labels, precision, recall, f1, support


def macro_f1(y_true, y_pred):
    """Return the unweighted mean of the per-class F1 scores.

    Classes predicted but never true count with an F1 of 0, as does any
    class whose precision or recall is undefined.
    """
    y_true, y_pred = _label_vectors(y_true, y_pred)
    if not len(y_true):
        raise PreconditionError('macro F1 needs at least one sample')
    f1 = _scores(y_true, y_pred)[3]
    return float(np.mean(f1))


class MetricReport(object):
    """Classification metrics of one set of predictions.

    :Ivariables:
        per_class : list of `ClassScore`
            Scores of every class present in the labels or predictions.
        excluded : list
            Classes left out of the accuracy.
    """

    def __init__(self, accuracy, macro_f1, per_class, excluded, sample_count):
        self.accuracy = accuracy
        self.macro_f1 = macro_f1
        self.per_class = per_class
        self.excluded = excluded
        self.sample_count = sample_count

    def to_dict(self):
        return {'accuracy': self.accuracy,
                'macro_f1': self.macro_f1,
                'sample_count': self.sample_count,
                'excluded_classes': list(self.excluded),
                'per_class': [s._asdict() for s in self.per_class]}


def evaluate(y_true, y_pred, excluded=(), class_names=None):
    """Compute a `MetricReport`.

    Only the accuracy ignores the `excluded` class indices; the F1 scores
    cover every class.

    :param class_names: Names to report classes by, indexed by label.
    """
    y_true, y_pred = _label_vectors(y_true, y_pred)
    acc = accuracy(y_true, y_pred, excluded)
    labels, precision, recall, f1, support = _scores(y_true, y_pred)

    def name(c):
        return class_names[c] if class_names is not None else int(c)

    per_class = [ClassScore(name(c), float(p), float(r), float(f), int(s))
                 for c, p, r, f, s in zip(labels, precision, recall, f1,
                                          support)]
    return MetricReport(float(acc), float(np.mean(f1)), per_class,
                        [name(c) for c in sorted(excluded)], len(y_true))


def timing_rate(records):
    """Return the examples generated per millisecond over all `records`.

    Each record needs ``generated`` (example count) and ``elapsed``
    (generation seconds, oracle time excluded).

    :raises MetricError: If no examples were generated.
    """
    records = list(records)
    generated = sum(r.generated for r in records)
    if not generated:
        raise MetricError('rate is undefined: no examples were generated')
    elapsed_ms = sum(r.elapsed for r in records) * 1000.0
    return generated / max(elapsed_ms, MIN_ELAPSED_MS)


def render_report(result, report=None):
    """Describe an attack result and optional final metrics.

    :Parameters:
        result : `tinyadv.attack.AttackResult`
            The attack to describe.
        report : `MetricReport` or None
            Metrics of the final predictions.

    :returns: A ``(text, record)`` pair; `record` is a JSON-ready dict.
    """
    try:
        rate = timing_rate(result.per_iteration)
    except MetricError:
        rate = None

    iterations = []
    for r in result.per_iteration:
        iterations.append({
            'iteration': r.iteration,
            'active': r.active,
            'generated': r.generated,
            'new_successes': r.new_successes,
            'total_successes': r.total_successes,
            'elapsed_ms': r.elapsed * 1000.0,
            'oracle_ms': r.oracle_elapsed * 1000.0,
            'metrics': r.metrics.to_dict() if r.metrics else None})

    record = {
        'iterations_run': result.iterations_run,
        'stop_reason': result.stop_reason,
        'sample_count': len(result.success_mask),
        'perturbable_count': result.perturbable_count,
        'success_count': int(np.count_nonzero(result.success_mask)),
        'timing_rate': rate,
        'modified_features_mean': result.modified_features_mean(),
        'per_iteration': iterations,
        'metrics': report.to_dict() if report else None,
    }

    lines = ['iterations run: %d (%s)' % (record['iterations_run'],
                                          record['stop_reason']),
             'successful examples: %d of %d perturbable rows'
             % (record['success_count'], record['perturbable_count'])]
    for it in iterations:
        lines.append('  iteration %3d: %6d active %6d new %6d total'
                     % (it['iteration'], it['active'], it['new_successes'],
                        it['total_successes']))
    if rate is not None:
        lines.append('generation rate: %.3f examples/ms' % rate)
    if record['modified_features_mean'] is not None:
        lines.append('modified features per example: %.2f'
                     % record['modified_features_mean'])
    if report:
        lines.append('accuracy: %.4f  macro F1: %.4f'
                     % (report.accuracy, report.macro_f1))
    return '\n'.join(lines), record


def write_report(record, path):
    """Write a report record as a JSON document.

    :raises DataError: If the file cannot be written.
    """
    try:
        with io.open(path, 'w', encoding='utf-8') as f:
            json.dump(record, f, indent=2)
            f.write('\n')
    except OSError as exc:
        raise DataError('cannot write report %s: %s' % (path, exc))

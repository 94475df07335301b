"""check that adversarial rows remain valid and coherent"""

import collections

import numpy as np

from tinyadv.base import DataError
from tinyadv.pattern import INTERVAL
from tinyadv.schema import Violation, validate_dataset

__all__ = ['check_realism', 'summarize']


def _rejection(sequence, row, column):
    """Return the rule a changed value breaks, or None if some pattern
    that modifies `column` could have produced it.
    """
    patterns = sequence.patterns
    modifiers = [j for j, p in enumerate(patterns) if column in p.features]
    if not modifiers:
        if any(column in getattr(p, 'locked', ()) for p in patterns):
            return 'locked', 'locked feature was modified'
        return 'immutable', 'no pattern modifies this feature'

    for j in modifiers:
        pattern = patterns[j]
        if pattern.kind == INTERVAL:
            if pattern.admits(column, row[column]):
                return None
            continue
        later = set(c for p in patterns[j + 1:] for c in p.features)
        later.discard(column)
        if pattern.matches(row, ignore=later):
            return None

    last = patterns[modifiers[-1]]
    value = float(row[column])
    if last.kind == INTERVAL:
        if column in last.integer and value != round(value):
            return 'integer', 'value %r is not integral' % value
        return 'interval', 'value %r is outside the recorded interval' % value
    return 'combination', 'values match no recorded combination'


def check_realism(adversarial, original, method):
    """Compare adversarial rows with the original rows they came from.

    Structural rules of the schema are checked first. Then every changed
    value must be producible by a pattern of its class's sequence: inside
    a recorded interval (and integral where required), or part of a
    recorded combination that agrees with the row on the columns no later
    pattern modifies. Locked features, features outside every pattern and
    rows of classes without a sequence must not change.

    :Parameters:
        adversarial : `Dataset`
            Generated rows.
        original : `Dataset`
            Original rows, in the same order.
        method : `tinyadv.method.AdaptivePatterns`
            The fitted state the rows were generated with.

    :returns: A list of `Violation` tuples, empty if every row is realistic.
    :raises DataError: If the datasets and state do not line up.
    """
    schema = method.schema
    if adversarial.schema != schema or original.schema != schema:
        raise DataError('datasets do not match the schema of the state')
    if len(adversarial) != len(original):
        raise DataError('%d adversarial rows for %d original rows'
                        % (len(adversarial), len(original)))
    if not np.array_equal(adversarial.labels, original.labels):
        raise DataError('adversarial and original labels differ')

    violations = validate_dataset(adversarial)
    flagged = set((v.row, v.feature) for v in violations)
    changed = adversarial.values != original.values

    for r in np.flatnonzero(changed.any(axis=1)):
        label = adversarial.labels[r]
        sequence = method.sequences.get(label) if label in method.mask else None
        row = adversarial.values[r]
        for column in np.flatnonzero(changed[r]):
            feature = schema.features[column]
            if (r, feature.name) in flagged or (r, feature.group) in flagged:
                continue
            if sequence is None:
                violations.append(Violation(
                    int(r), feature.name, 'excluded',
                    'rows of class %r must not change'
                    % schema.class_names[label]))
                continue
            rejection = _rejection(sequence, row, column)
            if rejection:
                violations.append(Violation(int(r), feature.name, *rejection))

    violations.sort(key=lambda v: (v.row, v.feature))
    return violations


def summarize(violations):
    """Count violations per rule, most frequent first."""
    return collections.Counter(v.rule for v in violations).most_common()

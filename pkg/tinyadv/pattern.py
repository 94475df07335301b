"""perturbation patterns that keep generated values valid and coherent"""

import math

import numpy as np
import pandas as pd

from tinyadv.base import ConfigError, PreconditionError, StateError

__all__ = [
    'INTERVAL', 'COMBINATION', 'MERGE', 'MOMENTUM', 'DEFAULT_PROBABILITY',
    'DEFAULT_MOMENTUM', 'DEFAULT_RATIO_RANGE', 'AbstractPattern',
    'IntervalPattern', 'CombinationPattern', 'PatternSequence',
    'pattern_from_dict']

# Pattern types, as written in configuration and state files
INTERVAL = 'interval'
COMBINATION = 'combination'
# Combination update modes
MERGE = 'merge'
MOMENTUM = 'momentum'

DEFAULT_PROBABILITY = 1.0
DEFAULT_MOMENTUM = 0.99
# Range of the random ratio that scales an interval into a perturbation
DEFAULT_RATIO_RANGE = (0.1, 0.3)


def _indices(columns, what):
    columns = [int(c) for c in columns]
    if any(c < 0 for c in columns):
        raise ConfigError('negative column index in %s' % what)
    if len(set(columns)) != len(columns):
        raise ConfigError('duplicate column index in %s' % what)
    return columns


def _round_half_away(values):
    whole = np.trunc(values)
    return np.where(np.abs(values - whole) >= 0.5, whole + np.sign(values),
                    whole)


class AbstractPattern(object):
    """Abstract perturbation pattern.

    A pattern records characteristics of the original data with `fit`
    and creates perturbations of single rows with `perturb`. All pattern
    classes should derive from this class.

    :Ivariables:
        features : list of int
            Column indices the pattern modifies.
        probability : float
            Probability to be applied, in ``(0, 1]``.
        momentum : float
            Weight of the previously recorded state on refits, in ``[0, 1]``.
        fitted_batches : int
            Number of batches the pattern was fitted on.
    """

    kind = None

    def __init__(self, features, probability=DEFAULT_PROBABILITY,
                 momentum=DEFAULT_MOMENTUM):
        self.features = _indices(features, 'features')
        if not self.features:
            raise ConfigError('a %s pattern needs at least one feature'
                              % self.kind)
        if not 0 < probability <= 1:
            raise ConfigError('probability must be in (0, 1], got %r'
                              % probability)
        if not 0 <= momentum <= 1:
            raise ConfigError('momentum must be in [0, 1], got %r' % momentum)
        self.probability = float(probability)
        self.momentum = float(momentum)
        self.fitted_batches = 0

    @property
    def fitted(self):
        return self.fitted_batches > 0

    @property
    def columns(self):
        """Every column index the pattern reads."""
        return sorted(self.features)

    def fit(self, batch):
        """Record the characteristics of a batch of original rows.

        The first batch sets the recorded state; later batches update it
        according to the momentum.

        :param batch: Full-width rows of one class.
        :type batch: numpy.ndarray
        :returns: The pattern itself.
        :raises PreconditionError: If the batch is empty or too narrow.
        """
        batch = np.asarray(batch, dtype=float)
        if batch.ndim != 2 or not len(batch):
            raise PreconditionError('cannot fit a pattern on an empty batch')
        if max(self.columns) >= batch.shape[1]:
            raise PreconditionError('batch has %d columns, pattern needs %d'
                                    % (batch.shape[1], max(self.columns) + 1))
        self._fit(batch)
        self.fitted_batches += 1
        return self

    def perturb(self, row, rng):
        """Return a perturbed copy of `row`.

        :Parameters:
            row : sequence of float
                A full-width row.
            rng : numpy.random.Generator
                Source of every random draw.

        :raises StateError: If the pattern was never fitted.
        """
        if not self.fitted:
            raise StateError('%s pattern on columns %s is not fitted'
                             % (self.kind, self.features))
        return self._perturb(np.array(row, dtype=float), rng)

    __call__ = perturb

    def _fit(self, batch):
        raise NotImplementedError

    def _perturb(self, row, rng):
        raise NotImplementedError

    def spec(self):
        """Return the unfitted parameters as a JSON-ready dict."""
        return {'type': self.kind, 'features': list(self.features),
                'probability': self.probability, 'momentum': self.momentum}

    def blank(self):
        """Return an unfitted pattern with the same parameters."""
        return pattern_from_dict(self.spec())

    def to_dict(self):
        doc = self.spec()
        doc['fitted_batches'] = self.fitted_batches
        return doc


class IntervalPattern(AbstractPattern):
    """Perturbs uncorrelated numerical features within moving intervals.

    Each feature is perturbed independently: with the pattern's
    probability, a step of ``(M - m) * eps`` is added to or subtracted from
    the value, where ``eps`` is drawn from the ratio range. Values at or
    below the minimum always increase, values at or above the maximum
    always decrease, and results are capped at ``[m, M]``. Integer
    features are then rounded half away from zero and capped at
    ``[ceil(m), floor(M)]``.

    :Ivariables:
        integer : list of int
            Subset of `features` restricted to integer values.
        ratio_range : tuple of float
            Bounds ``(low, high)`` of ``eps``, ``0 < low <= high <= 1``.
        minimum : numpy.ndarray or None
            Current minimum of each feature, aligned with `features`.
        maximum : numpy.ndarray or None
            Current maximum of each feature, aligned with `features`.
    """

    kind = INTERVAL

    def __init__(self, features, integer=(), probability=DEFAULT_PROBABILITY,
                 momentum=DEFAULT_MOMENTUM, ratio_range=DEFAULT_RATIO_RANGE):
        super(IntervalPattern, self).__init__(features, probability, momentum)
        self.integer = _indices(integer, 'integer features')
        stray = sorted(set(self.integer) - set(self.features))
        if stray:
            raise ConfigError('integer columns %s are not modified features'
                              % stray)
        low, high = (float(r) for r in ratio_range)
        if not 0 < low <= high <= 1:
            raise ConfigError('ratio range must satisfy 0 < low <= high <= 1, '
                              'got (%r, %r)' % (low, high))
        self.ratio_range = (low, high)
        self._integer_mask = np.isin(self.features, self.integer)
        self.minimum = None
        self.maximum = None

    def _fit(self, batch):
        x = batch[:, self.features]
        low, high = x.min(axis=0), x.max(axis=0)
        if not self.fitted:
            self.minimum, self.maximum = low, high
            return

        k = self.momentum
        minimum = self.minimum * k + low * (1 - k)
        maximum = self.maximum * k + high * (1 - k)
        # a collapsed interval, e.g. from an edited state file, shrinks to
        # its midpoint
        crossed = minimum > maximum
        if crossed.any():
            middle = (minimum + maximum) / 2
            minimum = np.where(crossed, middle, minimum)
            maximum = np.where(crossed, middle, maximum)
        self.minimum, self.maximum = minimum, maximum

    def _perturb(self, row, rng):
        n = len(self.features)
        x = row[self.features]
        m, M = self.minimum, self.maximum

        applied = rng.random(n) < self.probability
        eps = rng.uniform(self.ratio_range[0], self.ratio_range[1], n)
        coin = rng.random(n) < 0.5

        increase = np.where(x <= m, True, np.where(x >= M, False, coin))
        step = (M - m) * eps
        new = np.clip(np.where(increase, x + step, x - step), m, M)

        ints = self._integer_mask
        if ints.any():
            low, high = np.ceil(m[ints]), np.floor(M[ints])
            rounded = np.clip(_round_half_away(new[ints]), low, high)
            # no integer fits in the interval: keep the original value
            new[ints] = np.where(low > high, x[ints], rounded)

        row[self.features] = np.where(applied, new, x)
        return row

    def admits(self, column, value):
        """Return True if `value` is a valid result for feature `column`."""
        i = self.features.index(column)
        m, M = self.minimum[i], self.maximum[i]
        if self._integer_mask[i]:
            return (value == _round_half_away(value) and
                    math.ceil(m) <= value <= math.floor(M))
        return m <= value <= M

    def spec(self):
        doc = super(IntervalPattern, self).spec()
        doc.update(integer=list(self.integer), ratio_range=list(self.ratio_range))
        return doc

    def to_dict(self):
        doc = super(IntervalPattern, self).to_dict()
        if self.fitted:
            doc.update(minimum=self.minimum.tolist(),
                       maximum=self.maximum.tolist())
        return doc


class CombinationPattern(AbstractPattern):
    """Perturbs correlated features by replacing them with recorded
    combinations.

    A combination is a tuple of values over the locked and modified
    columns, in column order. A perturbation picks a recorded combination
    whose locked values equal the row's and writes its modified values
    into the row. Locked features are never written.

    :Ivariables:
        locked : list of int
            Columns used to find combinations, never modified.
        update_mode : str
            `MERGE` keeps every previous combination on refits; `MOMENTUM`
            keeps only the most recent ``ceil(momentum * n)`` of them.
        combinations : dict or None
            Recorded combinations as keys, least recently seen first.
    """

    kind = COMBINATION

    def __init__(self, features, locked=(), probability=DEFAULT_PROBABILITY,
                 momentum=DEFAULT_MOMENTUM, update_mode=MERGE):
        super(CombinationPattern, self).__init__(features, probability,
                                                 momentum)
        self.locked = _indices(locked, 'locked features')
        both = sorted(set(self.locked) & set(self.features))
        if both:
            raise ConfigError('columns %s are both locked and modified' % both)
        if update_mode not in (MERGE, MOMENTUM):
            raise ConfigError('unknown update mode %r' % update_mode)
        self.update_mode = update_mode
        self.combinations = None
        self._candidates = {}
        self._table = None

        columns = self.columns
        self._modify_pos = [columns.index(c) for c in self.features]
        self._locked_pos = [columns.index(c) for c in self.locked]

    @property
    def columns(self):
        return sorted(self.features + self.locked)

    def _fit(self, batch):
        frame = pd.DataFrame(batch[:, self.columns]).drop_duplicates()
        new = [tuple(t) for t in frame.to_numpy().tolist()]

        if not self.fitted:
            combinations = dict.fromkeys(new)
        else:
            old = list(self.combinations)
            if self.update_mode == MOMENTUM:
                # tolerance keeps e.g. 0.7 * 10 from rounding up to 8
                keep = int(math.ceil(self.momentum * len(old) - 1e-9))
                old = old[len(old) - keep:]
            combinations = dict.fromkeys(old)
            for t in new:
                combinations.pop(t, None)
                combinations[t] = None
        self.combinations = combinations
        self._index()

    def _index(self):
        candidates = {}
        for t in self.combinations:
            key = tuple(t[p] for p in self._locked_pos)
            candidates.setdefault(key, []).append([t[p] for p in self._modify_pos])
        self._candidates = dict((k, np.array(v)) for k, v in candidates.items())
        self._table = np.array(list(self.combinations), dtype=float).reshape(
            -1, len(self.columns))

    def _perturb(self, row, rng):
        if not rng.random() < self.probability:
            return row
        candidates = self._candidates.get(tuple(row[self.locked].tolist()))
        if candidates is None:
            return row
        row[self.features] = candidates[rng.integers(len(candidates))]
        return row

    def matches(self, row, ignore=()):
        """Return True if a recorded combination agrees with `row` on
        every column of the pattern except those in `ignore`.
        """
        if not self.fitted:
            return False
        positions = [p for p, c in enumerate(self.columns) if c not in ignore]
        if not positions:
            return True
        row = np.asarray(row, dtype=float)
        target = row[[self.columns[p] for p in positions]]
        return bool(np.any(np.all(self._table[:, positions] == target, axis=1)))

    def spec(self):
        doc = super(CombinationPattern, self).spec()
        doc.update(locked=list(self.locked), update_mode=self.update_mode)
        return doc

    def to_dict(self):
        doc = super(CombinationPattern, self).to_dict()
        if self.fitted:
            doc['combinations'] = [list(t) for t in self.combinations]
        return doc


_PATTERN_TYPES = {INTERVAL: IntervalPattern, COMBINATION: CombinationPattern}


def pattern_from_dict(doc):
    """Build a pattern from a `spec` or `to_dict` document, restoring any
    fitted state it carries.
    """
    doc = dict(doc)
    kind = doc.pop('type', None)
    if kind not in _PATTERN_TYPES:
        raise ConfigError('unknown pattern type %r' % kind)
    fitted_batches = doc.pop('fitted_batches', 0)
    minimum = doc.pop('minimum', None)
    maximum = doc.pop('maximum', None)
    combinations = doc.pop('combinations', None)
    if 'ratio_range' in doc:
        doc['ratio_range'] = tuple(doc['ratio_range'])
    try:
        pattern = _PATTERN_TYPES[kind](**doc)
    except TypeError as exc:
        raise ConfigError('bad %s pattern parameters: %s' % (kind, exc))

    if fitted_batches:
        if kind == INTERVAL:
            pattern.minimum = np.array(minimum, dtype=float)
            pattern.maximum = np.array(maximum, dtype=float)
        else:
            pattern.combinations = dict.fromkeys(
                tuple(float(v) for v in t) for t in combinations)
            pattern._index()
        pattern.fitted_batches = fitted_batches
    return pattern


class PatternSequence(object):
    """Patterns applied in order, each to the previous one's output.

    Every pattern is fitted on the same original batch, so no pattern
    records another's perturbations.
    """

    def __init__(self, patterns=()):
        self.patterns = list(patterns)
        self.fitted_batches = 0

    @classmethod
    def from_config(cls, base_config):
        """Instantiate unfitted copies of the patterns of `base_config`."""
        return cls(p.blank() for p in base_config)

    def __len__(self):
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    def fit(self, batch):
        """Fit every pattern independently on `batch`.

        :returns: The sequence itself.
        """
        batch = np.asarray(batch, dtype=float)
        if batch.ndim != 2 or not len(batch):
            raise PreconditionError('cannot fit a sequence on an empty batch')
        for pattern in self.patterns:
            pattern.fit(batch)
        self.fitted_batches += 1
        return self

    def perturb(self, row, rng):
        """Apply every pattern cumulatively to a copy of `row`."""
        row = np.array(row, dtype=float)
        for pattern in self.patterns:
            row = pattern.perturb(row, rng)
        return row

    __call__ = perturb

    def to_dict(self):
        return {'fitted_batches': self.fitted_batches,
                'patterns': [p.to_dict() for p in self.patterns]}

    @classmethod
    def from_dict(cls, doc):
        sequence = cls(pattern_from_dict(p) for p in doc['patterns'])
        sequence.fitted_batches = doc.get('fitted_batches', 0)
        return sequence

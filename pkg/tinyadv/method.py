"""assign a pattern sequence to each class and generate realistic rows"""

import io
import json
import logging

import numpy as np

from tinyadv.base import ConfigError, DataError, PreconditionError, StateError
from tinyadv.pattern import (CombinationPattern, IntervalPattern,
                             PatternSequence, pattern_from_dict, INTERVAL)
from tinyadv.schema import (CATEGORICAL, CONTINUOUS, INTEGER, ClassMask,
                            FeatureSchema)

__all__ = ['CASE_STUDY_PROBABILITIES', 'RngStream', 'AdaptivePatterns',
           'case_study_config']

log = logging.getLogger(__name__)

# Probabilities to be applied that favour small numerical changes over
# combined categorical ones
CASE_STUDY_PROBABILITIES = {'interval': 0.6, 'combination': 0.4}

_MAX_SEED = 2 ** 64


class RngStream(object):
    """Deterministic source of per-row random generators.

    The generator for a row depends only on the seed, the row index and
    the iteration, so rows can be perturbed in any order or concurrently
    with identical results.
    """

    def __init__(self, seed=0):
        seed = int(seed)
        if not 0 <= seed < _MAX_SEED:
            raise ConfigError('seed must be an unsigned 64-bit integer, got %r'
                              % seed)
        self.seed = seed

    def __repr__(self):
        return 'RngStream(%d)' % self.seed

    def generator(self, row, iteration=0):
        """Return the generator for `row` at `iteration`.

        :rtype: numpy.random.Generator
        """
        return np.random.default_rng([self.seed, int(iteration), int(row)])


def case_study_config(schema, locked=()):
    """Return the two-pattern base configuration used on flow datasets.

    An interval pattern modifies every numerical feature, with integer
    perturbations for the integer ones, and a combination pattern modifies
    the categorical features except the `locked` column indices.
    """
    numerical = schema.indices(CONTINUOUS, INTEGER)
    config = []
    if numerical:
        config.append(IntervalPattern(
            numerical, integer=schema.indices(INTEGER),
            probability=CASE_STUDY_PROBABILITIES['interval']))
    categorical = [c for c in schema.indices(CATEGORICAL) if c not in locked]
    if categorical:
        config.append(CombinationPattern(
            categorical, locked=locked,
            probability=CASE_STUDY_PROBABILITIES['combination']))
    return config


class AdaptivePatterns(object):
    """Independent pattern sequences for every perturbable class.

    Sequences are created from the base configuration the first time a
    class is seen, and refitted incrementally on later batches.

    :Ivariables:
        schema : `FeatureSchema`
            Schema of every dataset given to `fit` and `perturb`.
        base_config : list of `AbstractPattern`
            Unfitted patterns every sequence is instantiated from.
        excluded : tuple of str
            Names of the classes that are never perturbed.
        mask : `ClassMask`
            Perturbable classes.
        sequences : dict
            Maps class indices to their fitted `PatternSequence`.
    """

    def __init__(self, schema, base_config, excluded=()):
        self.schema = schema
        self.base_config = [p.blank() for p in base_config]
        self.excluded = tuple(excluded)
        self.mask = ClassMask.excluding(schema, self.excluded)
        self.sequences = {}
        self._check_config()

    def _check_config(self):
        width = len(self.schema)
        groups = self.schema.onehot_groups
        for pattern in self.base_config:
            if max(pattern.columns) >= width:
                raise ConfigError('%s pattern uses column %d, schema has %d'
                                  % (pattern.kind, max(pattern.columns), width))
            if pattern.kind == INTERVAL:
                categorical = [self.schema.features[c].name
                               for c in pattern.features
                               if self.schema.features[c].kind == CATEGORICAL]
                if categorical:
                    raise ConfigError('interval pattern cannot modify '
                                      'categorical features: %s'
                                      % ', '.join(categorical))
                continue
            used = set(pattern.columns)
            for group, idx in groups.items():
                if used & set(idx) and not used >= set(idx):
                    raise ConfigError('combination pattern covers only part '
                                      'of one-hot group %r' % group)

    def fitted_classes(self):
        """Return the names of the classes that have a sequence."""
        return [self.schema.class_names[c] for c in sorted(self.sequences)]

    def fit(self, ds):
        """Adapt the sequences of every perturbable class present in `ds`.

        :returns: The method itself.
        :raises PreconditionError: If `ds` does not use this schema.
        """
        if ds.schema != self.schema:
            raise PreconditionError('dataset schema does not match')
        for c in np.unique(ds.labels):
            if c not in self.mask:
                continue
            sequence = self.sequences.get(c)
            if sequence is None:
                log.info('creating pattern sequence for class %r',
                         self.schema.class_names[c])
                sequence = PatternSequence.from_config(self.base_config)
                self.sequences[int(c)] = sequence
            sequence.fit(ds.values[ds.labels == c])
        return self

    def perturb(self, ds, rng=0, iteration=0):
        """Return one perturbed copy of every row of `ds`.

        Rows of excluded classes are returned unchanged.

        :Parameters:
            ds : `Dataset`
                Original rows.
            rng : `RngStream` or int
                Stream, or seed of a stream, for the random draws.
            iteration : int
                Attack iteration the perturbation belongs to.

        :rtype: numpy.ndarray
        """
        if ds.schema != self.schema:
            raise PreconditionError('dataset schema does not match')
        return self.perturb_rows(ds.values, ds.labels, rng, iteration)

    def perturb_rows(self, values, labels, rng=0, iteration=0, row_ids=None):
        """Perturb a matrix of rows, routing each to its class's sequence.

        :param row_ids: Row indices that select the random generators,
                        defaulting to ``0..n-1``.
        :raises StateError: If a perturbable class has no sequence.
        """
        stream = rng if isinstance(rng, RngStream) else RngStream(rng)
        values = np.array(values, dtype=float)
        labels = np.asarray(labels)
        if row_ids is None:
            row_ids = np.arange(len(values))

        missing = [c for c in np.unique(labels)
                   if c in self.mask and c not in self.sequences]
        if missing:
            raise StateError('no pattern sequence fitted for class %s'
                             % ', '.join(repr(self.schema.class_names[c])
                                         for c in missing))

        for i, (label, row_id) in enumerate(zip(labels, row_ids)):
            if label in self.mask:
                values[i] = self.sequences[label].perturb(
                    values[i], stream.generator(row_id, iteration))
        return values

    def to_dict(self):
        names = self.schema.class_names
        return {'schema': self.schema.to_dict(),
                'excluded_classes': list(self.excluded),
                'base_config': [p.spec() for p in self.base_config],
                'sequences': dict((names[c], s.to_dict())
                                  for c, s in sorted(self.sequences.items()))}

    @classmethod
    def from_dict(cls, doc):
        try:
            schema = FeatureSchema.from_dict(doc['schema'])
            method = cls(schema,
                         [pattern_from_dict(p) for p in doc['base_config']],
                         doc.get('excluded_classes', ()))
            for name, sequence in doc.get('sequences', {}).items():
                method.sequences[schema.class_index(name)] = \
                    PatternSequence.from_dict(sequence)
        except (KeyError, TypeError) as exc:
            raise DataError('malformed state document: %s' % exc)
        return method

    def save(self, path):
        """Write the fitted state to a JSON file."""
        try:
            with io.open(path, 'w', encoding='utf-8') as f:
                json.dump(self.to_dict(), f, indent=1)
        except OSError as exc:
            raise DataError('cannot write state file %s: %s' % (path, exc))

    @classmethod
    def load(cls, path):
        """Read a fitted state written by `save`."""
        try:
            with io.open(path, encoding='utf-8') as f:
                return cls.from_dict(json.load(f))
        except (IOError, ValueError) as exc:
            raise DataError('cannot read state file %s: %s' % (path, exc))

"""read flow datasets from CSV and prepare them for attacks"""

import collections
import logging
import math

import numpy as np
import pandas as pd

from tinyadv.base import ConfigError, DataError
from tinyadv.schema import (CATEGORICAL, CONTINUOUS, DEFAULT_LABEL, INTEGER,
                            Dataset, Feature, FeatureSchema, select_rows)

__all__ = ['OTHER', 'DEFAULT_MIN_FREQUENCY', 'DEFAULT_HOLDOUT',
           'PipelineSpec', 'EncodingMap', 'load_csv', 'preprocess',
           'stratified_indices', 'stratified_split', 'write_csv',
           'read_dataset', 'make_demo_table']

log = logging.getLogger(__name__)

# Category that absorbs rare and unseen categorical values
OTHER = 'Other'
# Fraction of rows below which a category is aggregated into OTHER
DEFAULT_MIN_FREQUENCY = 0.01
# Fraction of each class held out for evaluation
DEFAULT_HOLDOUT = 0.30


class PipelineSpec(object):
    """How to turn a raw flow table into a dataset.

    :Ivariables:
        label_column : str
            Column holding the class names.
        drop_columns : list of str
            Identifier columns removed before encoding; each must exist.
        categorical_columns : list of str
            Columns one-hot encoded into a feature group each.
        integer_columns : list of str
            Numerical columns restricted to integer values.
        min_category_frequency : float
            Share of training rows below which a category becomes `OTHER`.
        holdout_fraction : float
            Share of each class held out for evaluation.
        split_seed : int
            Seed of the stratified split.
    """

    def __init__(self, label_column=DEFAULT_LABEL, drop_columns=(),
                 categorical_columns=(), integer_columns=(),
                 min_category_frequency=DEFAULT_MIN_FREQUENCY,
                 holdout_fraction=DEFAULT_HOLDOUT, split_seed=0):
        self.label_column = label_column
        self.drop_columns = list(drop_columns)
        self.categorical_columns = list(categorical_columns)
        self.integer_columns = list(integer_columns)
        self.min_category_frequency = min_category_frequency
        self.holdout_fraction = holdout_fraction
        self.split_seed = split_seed

        lists = [('drop_columns', self.drop_columns),
                 ('categorical_columns', self.categorical_columns),
                 ('integer_columns', self.integer_columns)]
        for name, columns in lists:
            if self.label_column in columns:
                raise ConfigError('label column %r cannot be in %s'
                                  % (self.label_column, name))
        for i, (first, a) in enumerate(lists):
            for second, b in lists[i + 1:]:
                shared = sorted(set(a) & set(b))
                if shared:
                    raise ConfigError('columns %s are in both %s and %s'
                                      % (shared, first, second))
        if not 0 <= self.min_category_frequency < 1:
            raise ConfigError('min_category_frequency must be in [0, 1)')
        if not 0 < self.holdout_fraction < 1:
            raise ConfigError('holdout_fraction must be in (0, 1)')
        if not 0 <= self.split_seed < 2 ** 64:
            raise ConfigError('split_seed must be an unsigned 64-bit integer')

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError('bad pipeline section: %s' % exc)


class EncodingMap(object):
    """One-hot encoding learned from training-side data.

    Each categorical column keeps its sufficiently frequent categories,
    sorted, followed by `OTHER`; any other value, including values never
    seen when fitting, is encoded as `OTHER`.

    :Ivariables:
        categories : OrderedDict
            Maps each categorical column to its retained categories.
    """

    def __init__(self, categories):
        self.categories = collections.OrderedDict(
            (column, list(values)) for column, values in categories.items())

    @classmethod
    def fit(cls, table, columns, min_frequency=DEFAULT_MIN_FREQUENCY):
        """Learn the retained categories of `columns` from `table`."""
        categories = collections.OrderedDict()
        for column in columns:
            frequency = table[column].value_counts(normalize=True)
            retained = sorted(v for v, f in frequency.items()
                              if f >= min_frequency and v != OTHER)
            aggregated = len(frequency) - len(retained)
            if aggregated:
                log.info('column %r: %d categories aggregated into %r',
                         column, aggregated, OTHER)
            categories[column] = retained
        return cls(categories)

    def feature_names(self, column):
        """Names of the one-hot features of `column`, in column order."""
        return ['%s_%s' % (column, v) for v in self.categories[column] + [OTHER]]

    def apply(self, table):
        """Return the one-hot columns for `table` as a float frame."""
        blocks = []
        for column, retained in self.categories.items():
            values = table[column].where(table[column].isin(retained), OTHER)
            block = pd.get_dummies(
                pd.Categorical(values, categories=retained + [OTHER]))
            block.columns = self.feature_names(column)
            block.index = table.index
            blocks.append(block.astype(float))
        if not blocks:
            return pd.DataFrame(index=table.index)
        return pd.concat(blocks, axis=1)

    def to_dict(self):
        return {'other': OTHER, 'categories': dict(self.categories),
                'columns': list(self.categories)}

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(collections.OrderedDict(
                (c, doc['categories'][c]) for c in doc['columns']))
        except (KeyError, TypeError) as exc:
            raise DataError('malformed encoding document: %s' % exc)


def load_csv(path, spec):
    """Read a raw flow table.

    Every column that is not the label, dropped or categorical must hold
    finite numbers; those columns are converted to floats.

    :raises DataError: If the file is unreadable, lacks the label column,
                       or has cells that do not parse.
    :raises ConfigError: If `spec` names columns the file lacks.
    """
    try:
        table = pd.read_csv(path, dtype=str, keep_default_na=False,
                            encoding='utf-8', skipinitialspace=True)
    except (OSError, UnicodeDecodeError, pd.errors.ParserError,
            pd.errors.EmptyDataError) as exc:
        raise DataError('cannot read %s: %s' % (path, exc))
    table.columns = [c.strip() for c in table.columns]

    if spec.label_column not in table.columns:
        raise DataError('%s has no label column %r' % (path, spec.label_column))
    unknown = [c for c in (spec.drop_columns + spec.categorical_columns +
                           spec.integer_columns) if c not in table.columns]
    if unknown:
        raise ConfigError('%s has no column %s' % (path, ', '.join(
            repr(c) for c in unknown)))

    for column in (spec.categorical_columns + [spec.label_column]):
        table[column] = table[column].str.strip()

    skipped = set(spec.drop_columns + spec.categorical_columns +
                  [spec.label_column])
    failures = []
    for column in table.columns:
        if column in skipped:
            continue
        parsed = pd.to_numeric(table[column].str.strip(), errors='coerce')
        for r in np.flatnonzero(~np.isfinite(parsed.to_numpy(dtype=float))):
            failures.append('line %d column %r: %r'
                            % (r + 2, column, table[column].iat[r]))
        table[column] = parsed.astype(float)
    if failures:
        raise DataError('%s: %d cells are not finite numbers: %s%s'
                        % (path, len(failures), '; '.join(failures[:10]),
                           ' ...' if len(failures) > 10 else ''))
    log.info('read %d rows from %s', len(table), path)
    return table


def preprocess(table, spec, encoding=None, schema=None):
    """Turn a raw table into a `Dataset`.

    Dropped columns are removed, numerical columns keep their order and
    one-hot blocks follow, column by column. Labels are numbered in order
    of first appearance unless an existing `schema` is given.

    :Parameters:
        table : pandas.DataFrame
            A table from `load_csv`.
        spec : `PipelineSpec`
            Column roles.
        encoding : `EncodingMap` or None
            Encoding to apply; learned from `table` when omitted.
        schema : `FeatureSchema` or None
            Schema the result must match, e.g. the training schema when
            encoding held-out rows.

    :returns: ``(dataset, encoding, schema)``
    """
    label = spec.label_column
    missing = [c for c in spec.categorical_columns + spec.integer_columns
               if c not in table.columns]
    if missing:
        raise ConfigError('table has no column %s'
                          % ', '.join(repr(c) for c in missing))
    table = table.drop(columns=[c for c in spec.drop_columns
                                if c in table.columns])
    categorical = [c for c in table.columns if c in spec.categorical_columns]
    numeric = [c for c in table.columns
               if c != label and c not in spec.categorical_columns]

    if encoding is None:
        encoding = EncodingMap.fit(table, categorical,
                                   spec.min_category_frequency)
    features = [Feature(c, INTEGER if c in spec.integer_columns else CONTINUOUS)
                for c in numeric]
    for column in encoding.categories:
        features.extend(Feature(name, CATEGORICAL, column)
                        for name in encoding.feature_names(column))

    if schema is None:
        schema = FeatureSchema(features, list(pd.unique(table[label])), label)
    elif FeatureSchema(features, schema.class_names, label) != schema:
        raise DataError('table does not encode to the expected schema')

    index = dict((name, i) for i, name in enumerate(schema.class_names))
    unknown = sorted(set(table[label]) - set(index))
    if unknown:
        raise DataError('unknown class labels: %s' % ', '.join(unknown))
    labels = table[label].map(index).to_numpy(dtype=np.intp)

    values = np.hstack([table[numeric].to_numpy(dtype=float),
                        encoding.apply(table).to_numpy(dtype=float)])
    if spec.integer_columns:
        block = table[spec.integer_columns].to_numpy(dtype=float)
        if np.any(block != np.round(block)):
            rows, cols = np.nonzero(block != np.round(block))
            raise DataError('integer column %r has non-integral value %r'
                            % (spec.integer_columns[cols[0]],
                               block[rows[0], cols[0]]))
    return Dataset(schema, values, labels), encoding, schema


def stratified_indices(labels, fraction=DEFAULT_HOLDOUT, seed=0, names=None):
    """Split row indices so every class keeps its proportion.

    Each class with ``n`` rows sends ``round(n * fraction)`` randomly
    chosen rows to evaluation (halves round up) and the rest to training.

    :param names: Optional mapping of labels to names for messages.
    :returns: Sorted ``(train, evaluation)`` index arrays.
    :raises DataError: If a class has fewer than 2 rows.
    """
    if not 0 < fraction < 1:
        raise ConfigError('holdout fraction must be in (0, 1), got %r'
                          % fraction)
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, held = [np.zeros(0, dtype=np.intp)], [np.zeros(0, dtype=np.intp)]
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if len(idx) < 2:
            raise DataError('class %r has %d row; a stratified split needs 2'
                            % (names[c] if names is not None else c, len(idx)))
        n_eval = int(math.floor(len(idx) * fraction + 0.5 + 1e-9))
        shuffled = rng.permutation(idx)
        held.append(shuffled[:n_eval])
        train.append(shuffled[n_eval:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(held))


def stratified_split(ds, fraction=DEFAULT_HOLDOUT, seed=0):
    """Split a dataset into training and evaluation datasets.

    :returns: ``(train, evaluation)``
    """
    train, held = stratified_indices(ds.labels, fraction, seed,
                                     ds.schema.class_names)
    mask = np.zeros(len(ds), dtype=bool)
    mask[held] = True
    return select_rows(ds, ~mask), select_rows(ds, mask)


def write_csv(ds, path):
    """Write a dataset with its features and a final label column.

    Values are written with round-trip precision.
    """
    frame = pd.DataFrame(ds.values, columns=list(ds.schema.names))
    names = np.array(ds.schema.class_names, dtype=object)
    frame[ds.schema.label] = names[ds.labels] if len(ds) else []
    try:
        frame.to_csv(path, index=False, encoding='utf-8')
    except OSError as exc:
        raise DataError('cannot write %s: %s' % (path, exc))


def read_dataset(path, schema):
    """Read a CSV written by `write_csv` for `schema`.

    :raises DataError: On I/O failures or if the file does not match.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False,
                            encoding='utf-8')
    except (OSError, UnicodeDecodeError, pd.errors.ParserError,
            pd.errors.EmptyDataError) as exc:
        raise DataError('cannot read %s: %s' % (path, exc))
    expected = list(schema.names) + [schema.label]
    if list(frame.columns) != expected:
        raise DataError('%s has %d columns that do not match the schema '
                        '(expected %d)' % (path, len(frame.columns),
                                           len(expected)))
    try:
        values = frame[list(schema.names)].to_numpy(dtype=str).astype(float)
    except ValueError as exc:
        raise DataError('%s: %s' % (path, exc))
    index = dict((name, i) for i, name in enumerate(schema.class_names))
    unknown = sorted(set(frame[schema.label]) - set(index))
    if unknown:
        raise DataError('%s has unknown class labels: %s'
                        % (path, ', '.join(unknown)))
    labels = frame[schema.label].map(index).to_numpy(dtype=np.intp)
    return Dataset(schema, values.reshape(len(frame), len(schema)), labels)


# Demo flow classes: (name, share of rows)
DEMO_CLASSES = (('Benign', 0.6), ('DoS', 0.25), ('BruteForce', 0.15))


def make_demo_table(rows=600, seed=0):
    """Return a seeded synthetic flow table shaped like a flow-meter export.

    It has identifier columns to drop, numerical and integer flow
    statistics, protocol and port columns with a tail of rare ports, and
    the classes ``Benign``, ``DoS`` and ``BruteForce``.
    """
    rng = np.random.default_rng(seed)
    counts = [max(2, int(round(rows * share))) for _, share in DEMO_CLASSES]
    counts[0] = max(2, rows - sum(counts[1:]))

    blocks = []
    for (name, _), n in zip(DEMO_CLASSES, counts):
        if name == 'Benign':
            duration = rng.exponential(2.0, n)
            packets = rng.poisson(10, n) + 1
            size = rng.integers(40, 1500, n)
            protocol = rng.choice(['tcp', 'udp', 'icmp'], n, p=[0.7, 0.25, 0.05])
            port = np.where(protocol == 'udp', '53', np.where(
                protocol == 'icmp', '0', rng.choice(['443', '80'], n)))
            rare = rng.random(n) < 0.02
            port = np.where(rare, rng.integers(1024, 65535, n).astype(str), port)
        elif name == 'DoS':
            duration = rng.exponential(0.2, n)
            packets = rng.poisson(200, n) + 1
            size = rng.integers(40, 120, n)
            protocol = np.full(n, 'tcp')
            port = np.full(n, '80')
        else:
            duration = rng.exponential(5.0, n)
            packets = rng.poisson(20, n) + 1
            size = rng.integers(60, 200, n)
            protocol = np.full(n, 'tcp')
            port = rng.choice(['21', '22'], n)
        blocks.append(pd.DataFrame({
            'Flow Duration': np.round(duration, 6),
            'Total Packets': packets,
            'Total Bytes': packets * size,
            'Flow IAT Mean': np.round(duration / packets, 6),
            'Protocol': protocol,
            'Destination Port': port,
            'Label': name}))

    table = pd.concat(blocks, ignore_index=True)
    table = table.iloc[rng.permutation(len(table))].reset_index(drop=True)
    table.insert(0, 'Flow ID', ['flow-%05d' % i for i in range(len(table))])
    table.insert(1, 'Timestamp', pd.Timestamp('2017-07-04 09:00:00') +
                 pd.to_timedelta(np.sort(rng.integers(0, 28800, len(table))),
                                 unit='s'))
    return table

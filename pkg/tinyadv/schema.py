"""feature schemas, datasets and class masks"""

import collections

import numpy as np

from tinyadv.base import ConfigError, DataError, PreconditionError

__all__ = ['CONTINUOUS', 'INTEGER', 'CATEGORICAL', 'KINDS', 'DEFAULT_LABEL',
           'Feature', 'FeatureSchema', 'Dataset', 'ClassMask', 'Violation',
           'validate_dataset', 'select_rows', 'concat']

# Feature kinds
CONTINUOUS = 'continuous'
INTEGER = 'integer'
CATEGORICAL = 'categorical'
KINDS = (CONTINUOUS, INTEGER, CATEGORICAL)

# Name of the class label column in every CSV file
DEFAULT_LABEL = 'Label'

Feature = collections.namedtuple('Feature', 'name kind group')
Feature.__new__.__defaults__ = (CONTINUOUS, None)
Feature.__doc__ = """A named column of a dataset.

Categorical-encoded features name the one-hot ``group`` they belong to;
for every other kind ``group`` is ``None``.
"""

Violation = collections.namedtuple('Violation', 'row feature rule detail')
Violation.__doc__ = """A broken rule found by a validation pass.

``row`` is the zero-based row index (``None`` for whole-dataset
problems) and ``feature`` names the feature or one-hot group involved.
"""


class FeatureSchema(object):
    """Ordered feature set and class vocabulary shared by datasets.

    :Ivariables:
        features : tuple of `Feature`
            Features in column order.
        class_names : tuple of str
            Class names; a label is an index into this tuple.
        label : str
            Name of the label column in CSV files.
        groups : OrderedDict
            Maps each categorical group id to the tuple of its column
            indices, in column order.
    """

    def __init__(self, features, class_names, label=DEFAULT_LABEL):
        self.features = tuple(f if isinstance(f, Feature) else Feature(*f)
                              for f in features)
        self.class_names = tuple(class_names)
        self.label = label

        names = [f.name for f in self.features]
        dups = sorted(set(n for n in names if names.count(n) > 1))
        if dups:
            raise DataError('duplicate feature names: %s' % ', '.join(dups))
        if label in names:
            raise DataError('label column %r is also a feature' % label)
        if any(not isinstance(c, str) or not c for c in self.class_names):
            raise DataError('class names must be non-empty strings')
        if len(set(self.class_names)) != len(self.class_names):
            raise DataError('duplicate class names')

        self.groups = collections.OrderedDict()
        for i, f in enumerate(self.features):
            if f.kind not in KINDS:
                raise DataError('feature %r has unknown kind %r' % (f.name, f.kind))
            if f.kind == CATEGORICAL:
                if f.group is None:
                    raise DataError('categorical feature %r has no group' % f.name)
                self.groups.setdefault(f.group, []).append(i)
            elif f.group is not None:
                raise DataError('%s feature %r cannot join group %r'
                                % (f.kind, f.name, f.group))
        for group in self.groups:
            self.groups[group] = tuple(self.groups[group])

        self._index = dict((n, i) for i, n in enumerate(names))
        self._class_index = dict((c, i) for i, c in enumerate(self.class_names))

    def __len__(self):
        return len(self.features)

    def __eq__(self, other):
        return (isinstance(other, FeatureSchema) and
                self.features == other.features and
                self.class_names == other.class_names and
                self.label == other.label)

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return '<FeatureSchema %d features, %d classes>' % (
            len(self.features), len(self.class_names))

    @property
    def names(self):
        """Feature names in column order."""
        return tuple(f.name for f in self.features)

    @property
    def onehot_groups(self):
        """Groups with two or more member columns."""
        return collections.OrderedDict(
            (g, idx) for g, idx in self.groups.items() if len(idx) >= 2)

    def index(self, name):
        """Return the column index of the feature called `name`.

        :raises KeyError: If no such feature exists.
        """
        return self._index[name]

    def indices(self, *kinds):
        """Return the column indices of all features of the given kinds."""
        return [i for i, f in enumerate(self.features) if f.kind in kinds]

    def class_index(self, name):
        """Return the label index of class `name`.

        :raises ConfigError: If the class is not in the vocabulary.
        """
        try:
            return self._class_index[name]
        except KeyError:
            raise ConfigError('unknown class %r (known: %s)'
                              % (name, ', '.join(self.class_names)))

    def to_dict(self):
        return {'label': self.label,
                'classes': list(self.class_names),
                'features': [{'name': f.name, 'kind': f.kind, 'group': f.group}
                             for f in self.features]}

    @classmethod
    def from_dict(cls, doc):
        try:
            features = [Feature(f['name'], f.get('kind', CONTINUOUS),
                                f.get('group')) for f in doc['features']]
            return cls(features, doc['classes'], doc.get('label', DEFAULT_LABEL))
        except (KeyError, TypeError) as exc:
            raise DataError('malformed schema document: %s' % exc)


class Dataset(object):
    """A sample matrix with one class label per row.

    Both arrays are read-only; derive new datasets instead of editing.

    :Ivariables:
        schema : `FeatureSchema`
            Describes the columns and the class vocabulary.
        values : numpy.ndarray
            ``n x d`` float matrix, columns in schema order.
        labels : numpy.ndarray
            Length ``n`` vector of class indices.
    """

    def __init__(self, schema, values, labels):
        values = np.array(values, dtype=float)
        labels = np.array(labels, dtype=np.intp).reshape(-1)
        if values.size == 0:
            values = values.reshape(len(labels), len(schema))
        if values.ndim != 2 or values.shape[1] != len(schema):
            raise PreconditionError(
                'expected a matrix with %d columns, got shape %s'
                % (len(schema), values.shape))
        if values.shape[0] != len(labels):
            raise PreconditionError('%d rows but %d labels'
                                    % (values.shape[0], len(labels)))
        if len(labels) and (labels.min() < 0 or
                            labels.max() >= len(schema.class_names)):
            raise PreconditionError('label index out of range for %d classes'
                                    % len(schema.class_names))
        values.flags.writeable = False
        labels.flags.writeable = False
        self.schema = schema
        self.values = values
        self.labels = labels

    def __len__(self):
        return len(self.labels)

    def __repr__(self):
        return '<Dataset %d x %d>' % self.values.shape

    def with_values(self, values):
        """Return a dataset with the same schema and labels but new values."""
        return Dataset(self.schema, values, self.labels)

    def class_counts(self):
        """Return the number of rows of each class, in class index order."""
        return np.bincount(self.labels, minlength=len(self.schema.class_names))


class ClassMask(object):
    """Marks which classes may be perturbed.

    Classes absent from the mapping are not perturbable.
    """

    def __init__(self, per_class):
        self.per_class = dict((int(c), bool(p)) for c, p in per_class.items())

    @classmethod
    def excluding(cls, schema, excluded):
        """Mark every class of `schema` perturbable except the `excluded`
        class names.
        """
        excluded = set(schema.class_index(name) for name in excluded)
        return cls(dict((c, c not in excluded)
                        for c in range(len(schema.class_names))))

    def __contains__(self, c):
        return self.per_class.get(int(c), False)

    @property
    def classes(self):
        """Sorted perturbable class indices."""
        return sorted(c for c, p in self.per_class.items() if p)

    def rows(self, labels):
        """Return a boolean vector marking rows of perturbable classes."""
        return np.isin(np.asarray(labels), self.classes)


def validate_dataset(ds):
    """Check the structural invariants of a dataset.

    :returns: A list of `Violation` tuples, empty if all invariants hold.
    """
    schema = ds.schema
    values = ds.values
    violations = []

    bad_rows, bad_cols = np.nonzero(~np.isfinite(values))
    for r, c in zip(bad_rows, bad_cols):
        violations.append(Violation(
            int(r), schema.features[c].name, 'finite',
            'value %r is not finite' % float(values[r, c])))

    ints = schema.indices(INTEGER)
    if ints:
        block = values[:, ints]
        bad_rows, bad_cols = np.nonzero(np.isfinite(block) &
                                        (block != np.round(block)))
        for r, c in zip(bad_rows, bad_cols):
            name = schema.features[ints[c]].name
            violations.append(Violation(
                int(r), name, 'integer',
                'value %r is not integral' % float(block[r, c])))

    for group, idx in schema.groups.items():
        block = values[:, list(idx)]
        binary = np.all((block == 0) | (block == 1), axis=1)
        if len(idx) >= 2:
            broken = ~binary | (block.sum(axis=1) != 1)
            rule, detail = 'onehot', 'group values must be 0/1 and sum to 1'
        else:
            broken = ~binary
            rule, detail = 'binary', 'flag value must be 0 or 1'
        for r in np.flatnonzero(broken):
            violations.append(Violation(int(r), group, rule, detail))

    violations.sort(key=lambda v: (v.row, v.feature))
    return violations


def select_rows(ds, mask):
    """Return the rows of `ds` where the boolean `mask` is true.

    :raises PreconditionError: If the mask length differs from the row count.
    """
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if len(mask) != len(ds):
        raise PreconditionError('mask has %d entries for %d rows'
                                % (len(mask), len(ds)))
    return Dataset(ds.schema, ds.values[mask], ds.labels[mask])


def concat(datasets):
    """Stack datasets sharing one schema, preserving row order."""
    datasets = list(datasets)
    if not datasets:
        raise PreconditionError('nothing to concatenate')
    schema = datasets[0].schema
    if any(ds.schema != schema for ds in datasets[1:]):
        raise PreconditionError('cannot concatenate datasets of different schemas')
    return Dataset(schema, np.vstack([ds.values for ds in datasets]),
                   np.concatenate([ds.labels for ds in datasets]))

import os
import sys
from os.path import abspath, dirname, join, normpath

import numpy as np

from tinyadv.schema import CATEGORICAL, INTEGER, Dataset, Feature, FeatureSchema

ROOT_PATH = normpath(join(dirname(abspath(__file__)), '..'))
RES_PATH = join(ROOT_PATH, 'tests', 'res')

FLOW_CLASSES = ('Benign', 'DoS', 'PortScan')


def res_path(name):
    return join(RES_PATH, name)


def child_command(script):
    """Command line running a helper script from tests/res."""
    return [sys.executable, res_path(script)]


def child_env():
    """Environment in which helper scripts can import tinyadv."""
    path = os.environ.get('PYTHONPATH')
    return dict(os.environ, PYTHONPATH=ROOT_PATH + (os.pathsep + path
                                                    if path else ''))


def flow_schema():
    """duration, packets, a 2-way protocol group and a 3-way port group."""
    return FeatureSchema([
        Feature('duration'),
        Feature('packets', INTEGER),
        Feature('proto_tcp', CATEGORICAL, 'proto'),
        Feature('proto_udp', CATEGORICAL, 'proto'),
        Feature('port_80', CATEGORICAL, 'port'),
        Feature('port_443', CATEGORICAL, 'port'),
        Feature('port_Other', CATEGORICAL, 'port'),
    ], FLOW_CLASSES)


def flow_dataset(n=60, seed=0, labels=None):
    """Well-formed rows for `flow_schema`; labels cycle through the classes
    unless given.
    """
    rng = np.random.default_rng(seed)
    if labels is None:
        labels = np.arange(n) % len(FLOW_CLASSES)
    labels = np.asarray(labels)
    n = len(labels)
    values = np.zeros((n, 7))
    values[:, 0] = np.round(rng.exponential(2.0, n) + labels, 6)
    values[:, 1] = rng.integers(1, 100, n) + 50 * labels
    values[np.arange(n), 2 + (rng.random(n) < 0.3)] = 1
    values[np.arange(n), 4 + rng.integers(0, 3, n)] = 1
    return Dataset(flow_schema(), values, labels)


def numeric_dataset(values, labels, classes=('Benign', 'Malicious')):
    """A dataset of continuous features named f0, f1, ..."""
    values = np.asarray(values, dtype=float)
    schema = FeatureSchema([Feature('f%d' % i) for i in range(values.shape[1])],
                           classes)
    return Dataset(schema, values, labels)

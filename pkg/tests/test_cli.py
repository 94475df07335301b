import json
import logging
import os

import numpy as np
import pytest

from tinyadv.cli import *
from tinyadv.pipeline import read_dataset, write_csv


class Workspace(object):
    """A demo dataset and configuration in a temporary directory."""

    def __init__(self, root, rows=300, seed=0):
        self.root = str(root)
        assert main(['demo', '--quiet', '--out', self.root, '--rows', str(rows),
                     '--seed', str(seed)]) == 0
        self.config = self.path('config.json')
        self.raw = self.path('demo.csv')

    def path(self, name):
        return os.path.join(self.root, name)

    def run(self, command, *args):
        return main([command, '--quiet', '--config', self.config,
                     '--out', self.root] + [str(a) for a in args])

    def preprocess(self, *args):
        assert self.run('preprocess', self.raw, *args) == 0

    def edit_config(self, section, **values):
        with open(self.config) as f:
            doc = json.load(f)
        doc[section].update(values)
        with open(self.config, 'w') as f:
            json.dump(doc, f)

    def schema(self):
        return load_schema(self.path('schema.json'))

    def dataset(self, name):
        return read_dataset(self.path(name), self.schema())


def read_bytes(path):
    with open(path, 'rb') as f:
        return f.read()


class TestDemoPipeline(object):

    def TestMain_DemoPreprocessAttackValidate_ExitZero(self, tmp_path, capsys):
        ws = Workspace(tmp_path)
        ws.preprocess()
        for name in ('train.csv', 'eval.csv', 'schema.json', 'encoding.json'):
            assert os.path.exists(ws.path(name))

        assert ws.run('attack', ws.path('eval.csv')) == 0
        report = json.loads(read_bytes(ws.path('report.json')))
        assert report['mode'] == 'untargeted'
        assert report['iterations_run'] >= 1
        assert report['metrics']['excluded_classes'] == ['Benign']

        capsys.readouterr()
        assert main(['validate', '--quiet', '--state', ws.path('state.json'),
                     ws.path('adversarial.csv'), ws.path('eval.csv')]) == 0
        assert 'violations: 0' in capsys.readouterr().out

    def TestMain_PreprocessTwice_SameBytes(self, tmp_path):
        ws = Workspace(tmp_path)
        ws.preprocess()
        first = dict((name, read_bytes(ws.path(name)))
                     for name in ('train.csv', 'eval.csv', 'schema.json'))
        ws.preprocess()
        for name, content in first.items():
            assert read_bytes(ws.path(name)) == content

    def TestMain_PreprocessSplit_TrainingEncodingAppliedToEval(self, tmp_path):
        ws = Workspace(tmp_path)
        ws.preprocess()
        train, held = ws.dataset('train.csv'), ws.dataset('eval.csv')
        assert len(train) + len(held) == 300
        assert held.class_counts().tolist() == \
            np.round(0.3 * (train.class_counts() + held.class_counts()) +
                     1e-9).astype(int).tolist()

    def TestMain_AttackTwice_SameAdversarialRows(self, tmp_path):
        ws = Workspace(tmp_path)
        ws.preprocess()
        assert ws.run('attack', ws.path('eval.csv')) == 0
        first = read_bytes(ws.path('adversarial.csv'))
        assert ws.run('attack', ws.path('eval.csv')) == 0
        assert read_bytes(ws.path('adversarial.csv')) == first

    def TestMain_FitThenAttackFromState_ExitZero(self, tmp_path):
        ws = Workspace(tmp_path)
        ws.preprocess()
        fitted = ws.path('fitted.json')
        assert ws.run('fit', ws.path('train.csv'), '--batch-size', 50,
                      '--state', fitted) == 0
        assert ws.run('attack', ws.path('eval.csv'), '--state', fitted) == 0
        assert main(['validate', '--quiet', '--state', ws.path('state.json'),
                     ws.path('adversarial.csv'), ws.path('eval.csv')]) == 0


class TestErrors(object):

    def TestMain_UnknownTargetClass_ExitConfigWithoutOutput(self, tmp_path):
        ws = Workspace(tmp_path)
        ws.preprocess()
        ws.edit_config('attack', mode='targeted', target_class='Worm')
        assert ws.run('attack', ws.path('eval.csv')) == 2
        assert not os.path.exists(ws.path('adversarial.csv'))

    def TestMain_UnknownDropColumn_ExitConfigNamingColumn(self, tmp_path,
                                                          caplog):
        ws = Workspace(tmp_path)
        ws.edit_config('pipeline', drop_columns=['Flow ID', 'Flow Label'])
        with caplog.at_level(logging.ERROR):
            assert ws.run('preprocess', ws.raw) == 2
        assert 'Flow Label' in caplog.text

    def TestMain_MissingData_ExitData(self, tmp_path):
        ws = Workspace(tmp_path)
        ws.preprocess()
        assert ws.run('attack', ws.path('missing.csv'),
                      '--schema', ws.path('schema.json')) == 3

    def TestMain_OutIsAFile_ExitData(self, tmp_path):
        ws = Workspace(tmp_path)
        assert main(['preprocess', '--quiet', '--config', ws.config,
                     '--out', ws.raw, ws.raw]) == 3
        assert main(['demo', '--quiet', '--out', ws.raw]) == 3

    def TestMain_SeedTooLarge_ExitConfig(self, tmp_path):
        ws = Workspace(tmp_path)
        assert ws.run('preprocess', ws.raw, '--seed', 2 ** 64) == 2

    def TestMain_CorruptedRow_ValidateExitOne(self, tmp_path, capsys):
        ws = Workspace(tmp_path)
        ws.preprocess()
        assert ws.run('attack', ws.path('eval.csv')) == 0
        adversarial = ws.dataset('adversarial.csv')
        values = np.array(adversarial.values)
        values[0, ws.schema().index('Protocol_tcp')] = 2.0
        write_csv(adversarial.with_values(values), ws.path('corrupted.csv'))

        capsys.readouterr()
        assert main(['validate', '--quiet', '--state', ws.path('state.json'),
                     ws.path('corrupted.csv'), ws.path('eval.csv')]) == 1
        out = capsys.readouterr().out
        assert 'onehot' in out
        assert 'violations: 0' not in out


class TestAugment(object):

    def TestMain_Augment_OneCopyPerAttackRow(self, tmp_path):
        ws = Workspace(tmp_path)
        ws.preprocess()
        output = ws.path('augmented.csv')
        assert ws.run('augment', ws.path('train.csv'), '--output', output) == 0
        train = ws.dataset('train.csv')
        augmented = ws.dataset('augmented.csv')
        benign = ws.schema().class_index('Benign')
        assert len(augmented) == len(train) + np.count_nonzero(
            train.labels != benign)
        assert np.array_equal(augmented.labels[:len(train)], train.labels)


class TestEvaluate(object):

    def TestMain_PredAndTrue_WriteMetrics(self, tmp_path):
        ws = Workspace(tmp_path)
        ws.preprocess()
        assert ws.run('evaluate', '--pred', ws.path('eval.csv'),
                      '--true', ws.path('eval.csv'),
                      '--exclude', 'Benign') == 0
        metrics = json.loads(read_bytes(ws.path('metrics.json')))
        assert metrics['accuracy'] == 1.0
        assert metrics['macro_f1'] == 1.0
        assert metrics['excluded_classes'] == ['Benign']

    def TestMain_PredLengthMismatch_ExitData(self, tmp_path):
        ws = Workspace(tmp_path)
        ws.preprocess()
        assert ws.run('evaluate', '--pred', ws.path('train.csv'),
                      '--true', ws.path('eval.csv')) == 3

    def TestMain_BuiltinOracle_Metrics(self, tmp_path):
        ws = Workspace(tmp_path)
        ws.preprocess()
        assert ws.run('evaluate', ws.path('eval.csv')) == 0
        metrics = json.loads(read_bytes(ws.path('metrics.json')))
        assert 0.0 <= metrics['accuracy'] <= 1.0


@pytest.mark.parametrize('seed', range(20))
def TestMain_RandomizedRuns_NoRealismViolations(tmp_path, seed):
    ws = Workspace(tmp_path, rows=200, seed=seed)
    ws.preprocess('--seed', seed)
    assert ws.run('attack', ws.path('eval.csv'), '--seed', seed) == 0
    assert main(['validate', '--quiet', '--state', ws.path('state.json'),
                 ws.path('adversarial.csv'), ws.path('eval.csv')]) == 0

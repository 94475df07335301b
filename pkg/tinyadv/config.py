"""JSON run configuration shared by the command line tools"""

import io
import json
import logging
import os

from tinyadv.attack import (DEFAULT_MAX_ITERATIONS, DEFAULT_PATIENCE,
                            TARGETED, UNTARGETED, AttackConfig)
from tinyadv.base import ConfigError
from tinyadv.method import AdaptivePatterns, case_study_config
from tinyadv.oracle import DEFAULT_TIMEOUT, ExternalOracle, NearestCentroidModel
from tinyadv.pattern import COMBINATION, INTERVAL, pattern_from_dict
from tinyadv.pipeline import PipelineSpec, read_dataset
from tinyadv.schema import CATEGORICAL, CONTINUOUS, INTEGER

__all__ = ['SELECTORS', 'BUILTIN', 'EXTERNAL', 'RunConfig', 'resolve_features']

log = logging.getLogger(__name__)

# Feature references that select every feature of some kinds
SELECTORS = {
    ':numerical': (CONTINUOUS, INTEGER),
    ':continuous': (CONTINUOUS,),
    ':integer': (INTEGER,),
    ':categorical': (CATEGORICAL,),
}

# Oracle types
BUILTIN = 'builtin'
EXTERNAL = 'external'

_SECTIONS = {'pipeline', 'patterns', 'excluded_classes', 'attack', 'oracle'}
_PATTERN_KEYS = {'type', 'features', 'integer', 'locked', 'probability',
                 'momentum', 'ratio_range', 'update_mode'}
_ATTACK_KEYS = {'mode', 'target_class', 'max_iterations', 'patience', 'seed',
                'track_metrics'}
_ORACLE_KEYS = {'type', 'command', 'timeout', 'train'}


def _check_keys(doc, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError('%s must be an object' % where)
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError('unknown key(s) in %s: %s' % (where, ', '.join(unknown)))


def _names(value, where):
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ConfigError('%s must be a list of names' % where)
    return value


def resolve_features(schema, refs):
    """Resolve feature references to sorted column indices.

    A reference is a feature name, the source column name of a one-hot
    group (every member of the group), or one of the `SELECTORS`.

    :raises ConfigError: If a reference resolves to nothing.
    """
    columns = set()
    for ref in refs:
        if ref in SELECTORS:
            columns.update(schema.indices(*SELECTORS[ref]))
        elif ref in schema.names:
            columns.add(schema.index(ref))
        elif ref in schema.groups:
            columns.update(schema.groups[ref])
        else:
            raise ConfigError('unknown feature %r' % ref)
    return sorted(columns)


class RunConfig(object):
    """A parsed run configuration.

    :Ivariables:
        pipeline : `PipelineSpec`
            Preprocessing of raw tables.
        patterns : list of dict
            Pattern specs referring to features by name.
        excluded_classes : list of str
            Classes that are never perturbed.
        attack : dict
            Attack section.
        oracle : dict
            Oracle section.
        base_dir : str
            Directory relative paths in the configuration start from.
    """

    def __init__(self, pipeline=None, patterns=(), excluded_classes=(),
                 attack=None, oracle=None, base_dir='.'):
        self.pipeline = pipeline or PipelineSpec()
        self.patterns = list(patterns)
        self.excluded_classes = list(excluded_classes)
        self.attack = dict(attack or {})
        self.oracle = dict(oracle or {'type': BUILTIN})
        self.base_dir = base_dir

    @classmethod
    def from_dict(cls, doc, base_dir='.'):
        """Validate the structure of a configuration document."""
        _check_keys(doc, _SECTIONS, 'configuration')
        pipeline = PipelineSpec.from_dict(doc.get('pipeline', {}))

        patterns = doc.get('patterns', [])
        if not isinstance(patterns, list):
            raise ConfigError('patterns must be a list')
        for i, spec in enumerate(patterns):
            where = 'pattern %d' % i
            _check_keys(spec, _PATTERN_KEYS, where)
            if spec.get('type') not in (INTERVAL, COMBINATION):
                raise ConfigError('%s has unknown type %r' % (where, spec.get('type')))
            for key in ('features', 'integer', 'locked'):
                if key in spec:
                    _names(spec[key], '%s %s' % (where, key))
            if not spec.get('features'):
                raise ConfigError('%s modifies no features' % where)

        excluded = _names(doc.get('excluded_classes', []), 'excluded_classes')

        attack = doc.get('attack', {})
        _check_keys(attack, _ATTACK_KEYS, 'attack section')
        if attack.get('mode', UNTARGETED) not in (UNTARGETED, TARGETED):
            raise ConfigError('unknown attack mode %r' % attack['mode'])
        if attack.get('mode') == TARGETED and not attack.get('target_class'):
            raise ConfigError('a targeted attack needs target_class')

        oracle = doc.get('oracle', {'type': BUILTIN})
        _check_keys(oracle, _ORACLE_KEYS, 'oracle section')
        if oracle.get('type', BUILTIN) not in (BUILTIN, EXTERNAL):
            raise ConfigError('unknown oracle type %r' % oracle['type'])
        if oracle.get('type') == EXTERNAL and not oracle.get('command'):
            raise ConfigError('an external oracle needs a command')

        return cls(pipeline, patterns, excluded, attack, oracle, base_dir)

    @classmethod
    def load(cls, path):
        """Read and validate a configuration file."""
        try:
            with io.open(path, encoding='utf-8') as f:
                doc = json.load(f)
        except (IOError, ValueError) as exc:
            raise ConfigError('cannot read configuration %s: %s' % (path, exc))
        return cls.from_dict(doc, os.path.dirname(os.path.abspath(path)))

    def _path(self, path):
        return os.path.join(self.base_dir, path)

    def resolve_patterns(self, schema):
        """Return the unfitted base configuration for `schema`.

        Integer features of an interval pattern always get integer
        perturbations; locked features of a combination pattern are
        removed from its modified features.
        """
        config = []
        for spec in self.patterns:
            doc = dict(spec)
            doc['features'] = resolve_features(schema, spec['features'])
            if spec['type'] == INTERVAL:
                integer = set(resolve_features(schema, spec.get('integer', [])))
                integer.update(c for c in doc['features']
                               if schema.features[c].kind == INTEGER)
                doc['integer'] = sorted(integer)
            else:
                locked = resolve_features(schema, spec.get('locked', []))
                doc['locked'] = locked
                doc['features'] = [c for c in doc['features'] if c not in locked]
            config.append(pattern_from_dict(doc))
        return config

    def method(self, schema):
        """Return an unfitted `AdaptivePatterns` for `schema`.

        Without configured patterns, every numerical feature gets an interval
        pattern and the categorical features a combination pattern.
        """
        config = self.resolve_patterns(schema)
        if not config:
            log.info('no patterns configured: using the case-study preset')
            config = case_study_config(schema)
        return AdaptivePatterns(schema, config, self.excluded_classes)

    def attack_config(self, schema, seed=None):
        """Return the `AttackConfig`, with `seed` overriding the file."""
        attack = self.attack
        target = None
        if attack.get('mode', UNTARGETED) == TARGETED:
            target = schema.class_index(attack['target_class'])
        try:
            return AttackConfig(
                target_class=target,
                max_iterations=int(attack.get('max_iterations',
                                              DEFAULT_MAX_ITERATIONS)),
                patience=int(attack.get('patience', DEFAULT_PATIENCE)),
                seed=int(attack.get('seed', 0) if seed is None else seed),
                track_metrics=bool(attack.get('track_metrics', False)))
        except (TypeError, ValueError) as exc:
            raise ConfigError('bad attack section: %s' % exc)

    def make_oracle(self, schema, data=None, command=None):
        """Build the configured oracle.

        The builtin nearest-centroid model is fitted on the ``train``
        dataset of the oracle section, or on `data` when none is named.
        A `command` selects an external oracle regardless of the file.
        """
        oracle = self.oracle
        timeout = float(oracle.get('timeout', DEFAULT_TIMEOUT))
        n_classes = len(schema.class_names)
        if command or oracle.get('type') == EXTERNAL:
            return ExternalOracle(command or oracle['command'], timeout,
                                  n_classes=n_classes)
        if oracle.get('train'):
            data = read_dataset(self._path(oracle['train']), schema)
        if data is None:
            raise ConfigError('the builtin oracle needs training data')
        return NearestCentroidModel.fit(data)

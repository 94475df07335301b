import json

import pytest

from tinyadv.attack import TARGETED, UNTARGETED
from tinyadv.base import ConfigError
from tinyadv.cli import DEMO_CONFIG
from tinyadv.config import *
from tinyadv.oracle import ExternalOracle, NearestCentroidModel
from tinyadv.pattern import COMBINATION, INTERVAL
from tinyadv.pipeline import make_demo_table, preprocess, write_csv

from tests.util import child_command, flow_dataset, flow_schema


def write_config(tmp_path, doc):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(doc), encoding='utf-8')
    return str(path)


class TestResolveFeatures(object):

    def TestResolveFeatures_Selector_FeaturesOfKind(self):
        schema = flow_schema()
        assert resolve_features(schema, [':numerical']) == [0, 1]
        assert resolve_features(schema, [':integer']) == [1]
        assert resolve_features(schema, [':categorical']) == [2, 3, 4, 5, 6]

    def TestResolveFeatures_GroupName_EveryMember(self):
        assert resolve_features(flow_schema(), ['port']) == [4, 5, 6]

    def TestResolveFeatures_MixedReferences_SortedUnion(self):
        refs = ['proto', 'duration', 'proto_tcp']
        assert resolve_features(flow_schema(), refs) == [0, 2, 3]

    def TestResolveFeatures_UnknownName_RaiseConfigError(self):
        with pytest.raises(ConfigError) as info:
            resolve_features(flow_schema(), ['bytes'])
        assert 'bytes' in str(info.value)


class TestRunConfigFromDict(object):

    def TestFromDict_Empty_Defaults(self):
        config = RunConfig.from_dict({})
        assert config.patterns == []
        assert config.oracle == {'type': BUILTIN}
        assert config.pipeline.label_column == 'Label'

    def TestFromDict_UnknownSection_RaiseConfigError(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({'attacks': {}})

    def TestFromDict_UnknownPatternKey_RaiseConfigError(self):
        doc = {'patterns': [{'type': INTERVAL, 'features': ['duration'],
                             'step': 0.2}]}
        with pytest.raises(ConfigError) as info:
            RunConfig.from_dict(doc)
        assert 'step' in str(info.value)

    def TestFromDict_UnknownPatternType_RaiseConfigError(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({'patterns': [{'type': 'gaussian',
                                               'features': ['duration']}]})

    def TestFromDict_PatternWithoutFeatures_RaiseConfigError(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({'patterns': [{'type': INTERVAL,
                                               'features': []}]})

    def TestFromDict_TargetedWithoutClass_RaiseConfigError(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({'attack': {'mode': TARGETED}})

    def TestFromDict_ExternalWithoutCommand_RaiseConfigError(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({'oracle': {'type': EXTERNAL}})

    def TestLoad_NotJson_RaiseConfigError(self, tmp_path):
        path = tmp_path / 'config.json'
        path.write_text('{"patterns": [', encoding='utf-8')
        with pytest.raises(ConfigError):
            RunConfig.load(str(path))


class TestRunConfigMethod(object):

    def TestResolvePatterns_Interval_IntegerFeaturesAdded(self):
        config = RunConfig.from_dict({'patterns': [
            {'type': INTERVAL, 'features': [':numerical']}]})
        interval, = config.resolve_patterns(flow_schema())
        assert interval.features == [0, 1]
        assert interval.integer == [1]

    def TestResolvePatterns_Combination_LockedRemovedFromModified(self):
        config = RunConfig.from_dict({'patterns': [
            {'type': COMBINATION, 'features': [':categorical'],
             'locked': ['proto'], 'probability': 0.4}]})
        combination, = config.resolve_patterns(flow_schema())
        assert combination.features == [4, 5, 6]
        assert combination.locked == [2, 3]
        assert combination.probability == 0.4

    def TestMethod_NoPatterns_CaseStudyPreset(self):
        method = RunConfig().method(flow_schema())
        interval, combination = method.base_config
        assert interval.features == [0, 1]
        assert interval.integer == [1]
        assert combination.features == [2, 3, 4, 5, 6]

    def TestMethod_UnknownExcludedClass_RaiseConfigError(self):
        config = RunConfig.from_dict({'excluded_classes': ['Worm']})
        with pytest.raises(ConfigError):
            config.method(flow_schema())

    def TestMethod_DemoConfig_ResolvesOnDemoSchema(self):
        config = RunConfig.load(DEMO_CONFIG)
        _, _, schema = preprocess(make_demo_table(300), config.pipeline)
        method = config.method(schema)
        interval, combination = method.base_config
        assert [schema.names[c] for c in interval.integer] == \
            ['Total Packets', 'Total Bytes']
        assert len(interval.features) == 4
        assert set(schema.features[c].group for c in combination.locked) == \
            {'Protocol'}
        assert set(schema.features[c].group for c in combination.features) == \
            {'Destination Port'}
        assert method.excluded == ('Benign',)


class TestRunConfigAttack(object):

    def TestAttackConfig_Targeted_ClassIndex(self):
        config = RunConfig.from_dict({'attack': {'mode': TARGETED,
                                                 'target_class': 'Benign'}})
        attack = config.attack_config(flow_schema())
        assert attack.target_class == 0
        assert attack.mode == TARGETED

    def TestAttackConfig_UnknownTargetClass_RaiseConfigError(self):
        config = RunConfig.from_dict({'attack': {'mode': TARGETED,
                                                 'target_class': 'Worm'}})
        with pytest.raises(ConfigError):
            config.attack_config(flow_schema())

    def TestAttackConfig_SeedArgument_OverridesFile(self):
        config = RunConfig.from_dict({'attack': {'seed': 3, 'patience': 2}})
        attack = config.attack_config(flow_schema(), seed=8)
        assert attack.seed == 8
        assert attack.patience == 2
        assert attack.mode == UNTARGETED

    def TestAttackConfig_NotANumber_RaiseConfigError(self):
        config = RunConfig.from_dict({'attack': {'max_iterations': 'many'}})
        with pytest.raises(ConfigError):
            config.attack_config(flow_schema())


class TestRunConfigOracle(object):

    def TestMakeOracle_Command_ExternalNotStarted(self):
        oracle = RunConfig().make_oracle(flow_schema(),
                                         command=child_command('sum_oracle.py'))
        assert isinstance(oracle, ExternalOracle)
        assert oracle._process is None

    def TestMakeOracle_BuiltinWithoutData_RaiseConfigError(self):
        with pytest.raises(ConfigError):
            RunConfig().make_oracle(flow_schema())

    def TestMakeOracle_BuiltinWithData_NearestCentroid(self):
        oracle = RunConfig().make_oracle(flow_schema(), flow_dataset())
        assert isinstance(oracle, NearestCentroidModel)
        assert oracle.classes.tolist() == [0, 1, 2]

    def TestMakeOracle_TrainPath_RelativeToConfigFile(self, tmp_path):
        write_csv(flow_dataset(), str(tmp_path / 'flows.csv'))
        path = write_config(tmp_path, {'oracle': {'type': BUILTIN,
                                                  'train': 'flows.csv'}})
        oracle = RunConfig.load(path).make_oracle(flow_schema())
        assert isinstance(oracle, NearestCentroidModel)

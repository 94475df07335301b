__all__ = ['test_attack', 'test_cli', 'test_config', 'test_method',
           'test_metrics', 'test_oracle', 'test_pattern', 'test_pipeline',
           'test_realism', 'test_schema', 'util']

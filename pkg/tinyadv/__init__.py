"""realistic adversarial examples for tabular data"""

__version__ = '0.1.0'

__all__ = ['attack', 'base', 'cli', 'config', 'method', 'metrics', 'oracle',
           'pattern', 'pipeline', 'realism', 'schema']

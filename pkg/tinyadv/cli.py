"""command line tools: preprocess, fit, attack, augment, evaluate, validate
and demo
"""

import argparse
import io
import json
import logging
import os
import shutil
import sys

import numpy as np
import pandas as pd

from tinyadv import __version__
from tinyadv.attack import augment_training, run_attack
from tinyadv.base import (EXIT_FAILURE, EXIT_OK, ConfigError, DataError,
                          TinyAdvError)
from tinyadv.config import RunConfig
from tinyadv.method import AdaptivePatterns, RngStream
from tinyadv.metrics import evaluate, render_report, write_report
from tinyadv.pipeline import (EncodingMap, load_csv, make_demo_table,
                              preprocess, read_dataset, stratified_indices,
                              write_csv)
from tinyadv.realism import check_realism, summarize
from tinyadv.schema import Dataset, FeatureSchema, select_rows

__all__ = ['LOG_FORMAT', 'DEMO_CONFIG', 'build_parser', 'main',
           'load_schema']

log = logging.getLogger(__name__)

LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'
# Run configuration written next to the demo dataset
DEMO_CONFIG = os.path.join(os.path.dirname(__file__), 'res', 'demo_config.json')
# Violations listed one by one before the summary
SHOWN_VIOLATIONS = 20


def _read_json(path, what):
    try:
        with io.open(path, encoding='utf-8') as f:
            return json.load(f)
    except (IOError, ValueError) as exc:
        raise DataError('cannot read %s %s: %s' % (what, path, exc))


def _write_json(doc, path):
    try:
        with io.open(path, 'w', encoding='utf-8') as f:
            json.dump(doc, f, indent=2)
            f.write('\n')
    except OSError as exc:
        raise DataError('cannot write %s: %s' % (path, exc))


def load_schema(path):
    """Read a schema file written by the preprocess command."""
    return FeatureSchema.from_dict(_read_json(path, 'schema'))


def _config(args):
    if args.config:
        return RunConfig.load(args.config)
    return RunConfig()


def _out(args, name):
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        raise DataError('cannot create output directory %s: %s'
                        % (args.out, exc))
    return os.path.join(args.out, name)


def _schema(args, data):
    """The --schema file, or schema.json next to `data`."""
    path = args.schema or os.path.join(os.path.dirname(data), 'schema.json')
    return load_schema(path)


def _train(args, schema):
    if getattr(args, 'train', None):
        return read_dataset(args.train, schema)
    return None


def _read_labels(path, schema):
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False,
                            encoding='utf-8')
    except (OSError, UnicodeDecodeError, pd.errors.ParserError,
            pd.errors.EmptyDataError) as exc:
        raise DataError('cannot read %s: %s' % (path, exc))
    if schema.label not in frame.columns:
        raise DataError('%s has no label column %r' % (path, schema.label))
    index = dict((name, i) for i, name in enumerate(schema.class_names))
    unknown = sorted(set(frame[schema.label]) - set(index))
    if unknown:
        raise DataError('%s has unknown class labels: %s'
                        % (path, ', '.join(unknown)))
    return frame[schema.label].map(index).to_numpy(dtype=np.intp)


def cmd_preprocess(args):
    config = _config(args)
    spec = config.pipeline
    seed = spec.split_seed if args.seed is None else args.seed
    table = load_csv(args.input, spec)

    labels = table[spec.label_column].to_numpy()
    train_idx, eval_idx = stratified_indices(labels, spec.holdout_fraction,
                                             seed)
    # only training rows decide which categories are kept
    categorical = [c for c in table.columns if c in spec.categorical_columns]
    encoding = EncodingMap.fit(table.iloc[train_idx], categorical,
                               spec.min_category_frequency)
    ds, encoding, schema = preprocess(table, spec, encoding)

    held = np.zeros(len(ds), dtype=bool)
    held[eval_idx] = True
    train, holdout = select_rows(ds, ~held), select_rows(ds, held)
    write_csv(train, _out(args, 'train.csv'))
    write_csv(holdout, _out(args, 'eval.csv'))
    _write_json(schema.to_dict(), _out(args, 'schema.json'))
    _write_json(encoding.to_dict(), _out(args, 'encoding.json'))

    counts = pd.DataFrame({'Train': train.class_counts(),
                           'Eval': holdout.class_counts()},
                          index=pd.Index(schema.class_names, name='Class'))
    counts['Total'] = counts['Train'] + counts['Eval']
    print(counts.to_string())
    print('%d features written to %s' % (len(schema), args.out))
    return EXIT_OK


def cmd_fit(args):
    config = _config(args)
    schema = _schema(args, args.data[0])
    if args.resume:
        method = AdaptivePatterns.load(args.resume)
        if method.schema != schema:
            raise DataError('state %s does not match the schema' % args.resume)
    else:
        method = config.method(schema)

    batches = 0
    for path in args.data:
        ds = read_dataset(path, schema)
        size = args.batch_size or max(len(ds), 1)
        for start in range(0, len(ds), size):
            method.fit(Dataset(schema, ds.values[start:start + size],
                               ds.labels[start:start + size]))
            batches += 1
    state = args.state or _out(args, 'state.json')
    method.save(state)
    print('fitted %d batches; classes: %s'
          % (batches, ', '.join(method.fitted_classes()) or 'none'))
    print('state written to %s' % state)
    return EXIT_OK


def cmd_attack(args):
    config = _config(args)
    schema = _schema(args, args.data)
    if args.state:
        method = AdaptivePatterns.load(args.state)
        if method.schema != schema:
            raise DataError('state %s does not match the schema' % args.state)
    else:
        method = config.method(schema)
    attack = config.attack_config(schema, args.seed)
    ds = read_dataset(args.data, schema)

    excluded = [c for c in range(len(schema.class_names))
                if c not in method.mask]
    with config.make_oracle(schema, _train(args, schema),
                            args.oracle_cmd) as oracle:
        result = run_attack(method, oracle, ds, attack)
        report = None
        if len(ds) and not np.isin(ds.labels, excluded).all():
            report = evaluate(ds.labels, oracle.predict(result.adversarial),
                              excluded, schema.class_names)

    write_csv(ds.with_values(result.adversarial), _out(args, 'adversarial.csv'))
    text, record = render_report(result, report)
    record.update(mode=attack.mode, seed=attack.seed)
    write_report(record, _out(args, 'report.json'))
    method.save(_out(args, 'state.json'))
    print(text)
    return EXIT_OK


def cmd_augment(args):
    config = _config(args)
    schema = _schema(args, args.data)
    seed = config.attack_config(schema, args.seed).seed
    train = read_dataset(args.data, schema)
    method = config.method(schema).fit(train)
    augmented = augment_training(method, train, seed)

    output = args.output or _out(args, 'augmented.csv')
    write_csv(augmented, output)
    print('original rows: %d' % len(train))
    print('added rows: %d' % (len(augmented) - len(train)))
    print('written to %s' % output)
    return EXIT_OK


def cmd_evaluate(args):
    config = _config(args)
    if args.pred or args.true:
        if not (args.pred and args.true):
            raise ConfigError('--pred and --true must be given together')
        schema = _schema(args, args.true)
        y_true = _read_labels(args.true, schema)
        y_pred = _read_labels(args.pred, schema)
    elif args.data:
        schema = _schema(args, args.data)
        ds = read_dataset(args.data, schema)
        with config.make_oracle(schema, _train(args, schema),
                                args.oracle_cmd) as oracle:
            y_pred = oracle.predict(ds.values)
        y_true = ds.labels
    else:
        raise ConfigError('evaluate needs --pred and --true, or a dataset')

    names = config.excluded_classes if args.exclude is None else args.exclude
    excluded = [schema.class_index(name) for name in names]
    report = evaluate(y_true, y_pred, excluded, schema.class_names)

    scores = pd.DataFrame([s._asdict() for s in report.per_class],
                          columns=['label', 'precision', 'recall', 'f1',
                                   'support'])
    print(scores.to_string(index=False, float_format='%.4f'))
    print('accuracy: %.4f  macro F1: %.4f  samples: %d'
          % (report.accuracy, report.macro_f1, report.sample_count))
    write_report(report.to_dict(), _out(args, 'metrics.json'))
    return EXIT_OK


def cmd_validate(args):
    method = AdaptivePatterns.load(args.state)
    schema = load_schema(args.schema) if args.schema else method.schema
    if schema != method.schema:
        raise DataError('state %s does not match the schema' % args.state)
    adversarial = read_dataset(args.adversarial, schema)
    original = read_dataset(args.original, schema)
    violations = check_realism(adversarial, original, method)

    changed = np.count_nonzero(
        (adversarial.values != original.values).any(axis=1))
    print('rows checked: %d (%d modified)' % (len(adversarial), changed))
    for v in violations[:SHOWN_VIOLATIONS]:
        print('  row %d, %s: %s (%s)' % (v.row, v.feature, v.rule, v.detail))
    if len(violations) > SHOWN_VIOLATIONS:
        print('  ...')
    print('violations: %d' % len(violations))
    for rule, count in summarize(violations):
        print('  %-12s %d' % (rule, count))
    return EXIT_FAILURE if violations else EXIT_OK


def cmd_demo(args):
    table = make_demo_table(args.rows, 0 if args.seed is None else args.seed)
    data = _out(args, 'demo.csv')
    try:
        table.to_csv(data, index=False, encoding='utf-8')
        shutil.copyfile(DEMO_CONFIG, _out(args, 'config.json'))
    except OSError as exc:
        raise DataError('cannot write demo files to %s: %s' % (args.out, exc))
    print('wrote %d flows to %s' % (len(table), data))
    print('next: tinyadv preprocess --config %s --out %s %s'
          % (_out(args, 'config.json'), args.out, data))
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON run configuration')
    common.add_argument('--seed', type=int,
                        help='unsigned 64-bit seed overriding the configuration')
    common.add_argument('--out', default='.',
                        help='directory for written artifacts')
    common.add_argument('--oracle-cmd',
                        help='command line of an external oracle process')
    common.add_argument('--quiet', action='store_true',
                        help='log warnings and errors only')

    parser = argparse.ArgumentParser(
        prog='tinyadv',
        description='Realistic adversarial examples for tabular data.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    p = commands.add_parser('preprocess', parents=[common],
                            help='encode and split a raw flow table')
    p.add_argument('input', help='raw CSV file')
    p.set_defaults(func=cmd_preprocess)

    p = commands.add_parser('fit', parents=[common],
                            help='fit pattern sequences on batches of data')
    p.add_argument('data', nargs='+', help='encoded CSV files, fitted in order')
    p.add_argument('--schema', help='schema file (default: next to the data)')
    p.add_argument('--batch-size', type=int, default=0,
                   help='rows per fitted batch (default: one per file)')
    p.add_argument('--resume', help='state file to continue fitting')
    p.add_argument('--state', help='state file to write')
    p.set_defaults(func=cmd_fit)

    p = commands.add_parser('attack', parents=[common],
                            help='run an attack against the oracle')
    p.add_argument('data', help='encoded CSV file to attack')
    p.add_argument('--schema', help='schema file (default: next to the data)')
    p.add_argument('--state', help='fitted state to start from')
    p.add_argument('--train', help='training data for the builtin oracle')
    p.set_defaults(func=cmd_attack)

    p = commands.add_parser('augment', parents=[common],
                            help='add one perturbed copy of each attack row')
    p.add_argument('data', help='encoded training CSV file')
    p.add_argument('--schema', help='schema file (default: next to the data)')
    p.add_argument('--output', help='augmented CSV file to write')
    p.set_defaults(func=cmd_augment)

    p = commands.add_parser('evaluate', parents=[common],
                            help='compute accuracy and macro F1')
    p.add_argument('data', nargs='?', help='encoded CSV file for the oracle')
    p.add_argument('--schema', help='schema file (default: next to the data)')
    p.add_argument('--pred', help='CSV file with predicted labels')
    p.add_argument('--true', help='CSV file with true labels')
    p.add_argument('--train', help='training data for the builtin oracle')
    p.add_argument('--exclude', action='append',
                   help='class left out of the accuracy (repeatable)')
    p.set_defaults(func=cmd_evaluate)

    p = commands.add_parser('validate', parents=[common],
                            help='check adversarial rows for realism')
    p.add_argument('adversarial', help='adversarial CSV file')
    p.add_argument('original', help='original CSV file, same row order')
    p.add_argument('--state', required=True,
                   help='state the rows were generated with')
    p.add_argument('--schema', help='schema file (default: from the state)')
    p.set_defaults(func=cmd_validate)

    p = commands.add_parser('demo', parents=[common],
                            help='write a synthetic flow table and config')
    p.add_argument('--rows', type=int, default=600, help='number of flows')
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None):
    """Run a command and return its exit status."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format=LOG_FORMAT, stream=sys.stderr)
    try:
        if args.seed is not None:
            RngStream(args.seed)
        return args.func(args)
    except TinyAdvError as exc:
        log.error('%s', exc)
        return exc.exit_code


if __name__ == '__main__':
    sys.exit(main())

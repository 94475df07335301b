"""iterative adversarial attacks and adversarial training data"""

import logging
import time

import numpy as np

from tinyadv.base import AttackError, ConfigError, OracleError, PreconditionError
from tinyadv.method import RngStream
from tinyadv.metrics import evaluate, timing_rate
from tinyadv.schema import Dataset, concat, select_rows

__all__ = ['UNTARGETED', 'TARGETED', 'DEFAULT_MAX_ITERATIONS',
           'DEFAULT_PATIENCE', 'AttackConfig', 'IterationRecord',
           'AttackResult', 'run_attack', 'augment_training']

log = logging.getLogger(__name__)

UNTARGETED = 'untargeted'
TARGETED = 'targeted'

DEFAULT_MAX_ITERATIONS = 50
DEFAULT_PATIENCE = 5

# Reasons an attack stops
STOP_EMPTY = 'empty'
STOP_EXHAUSTED = 'exhausted'
STOP_PATIENCE = 'patience'
STOP_MAX_ITERATIONS = 'max_iterations'


class AttackConfig(object):
    """Parameters of `run_attack`.

    An attack is targeted when `target_class` is set: a row succeeds
    when it is predicted as that class. Otherwise any wrong prediction
    is a success.

    :Ivariables:
        target_class : int or None
            Class index targeted rows must be predicted as.
        max_iterations : int
            Iteration budget; 0 generates nothing.
        patience : int
            Consecutive iterations without a new success before the
            attack stops early.
        seed : int
            Root of every random stream, an unsigned 64-bit integer.
        track_metrics : bool
            Whether each iteration evaluates the predictions so far.
    """

    def __init__(self, target_class=None, max_iterations=DEFAULT_MAX_ITERATIONS,
                 patience=DEFAULT_PATIENCE, seed=0, track_metrics=False):
        if max_iterations < 0:
            raise ConfigError('max_iterations must not be negative')
        if patience < 1:
            raise ConfigError('patience must be positive')
        if max_iterations and patience > max_iterations:
            raise ConfigError('patience %d exceeds max_iterations %d'
                              % (patience, max_iterations))
        RngStream(seed)
        self.target_class = target_class
        self.max_iterations = max_iterations
        self.patience = patience
        self.seed = seed
        self.track_metrics = track_metrics

    @property
    def mode(self):
        return UNTARGETED if self.target_class is None else TARGETED


class IterationRecord(object):
    """What one attack iteration did.

    `elapsed` covers example generation only; `oracle_elapsed` the query.
    Both are in seconds.
    """

    def __init__(self, iteration, active, generated, new_successes,
                 total_successes, elapsed, oracle_elapsed, metrics=None):
        self.iteration = iteration
        self.active = active
        self.generated = generated
        self.new_successes = new_successes
        self.total_successes = total_successes
        self.elapsed = elapsed
        self.oracle_elapsed = oracle_elapsed
        self.metrics = metrics


class AttackResult(object):
    """Outcome of `run_attack`.

    :Ivariables:
        adversarial : numpy.ndarray
            One row per input row: the successful example, the last
            candidate when the iteration budget ran out, or the original
            row after an early stop.
        success_mask : numpy.ndarray
            Rows whose example met the attack's success criterion.
    """

    def __init__(self, adversarial, original, success_mask, perturbable_count,
                 stop_reason, per_iteration=None):
        self.adversarial = adversarial
        self.original = original
        self.success_mask = success_mask
        self.perturbable_count = perturbable_count
        self.stop_reason = stop_reason
        self.per_iteration = list(per_iteration or [])

    @property
    def iterations_run(self):
        return len(self.per_iteration)

    @property
    def timing_rate(self):
        """Examples generated per millisecond, or None if none were."""
        if not sum(r.generated for r in self.per_iteration):
            return None
        return timing_rate(self.per_iteration)

    def modified_features_mean(self):
        """Mean number of changed features per successful example."""
        if not self.success_mask.any():
            return None
        changed = (self.adversarial[self.success_mask] !=
                   self.original[self.success_mask])
        return float(changed.sum(axis=1).mean())


def run_attack(method, oracle, ds, config, fit=True):
    """Iteratively perturb the rows of `ds` until the oracle misclassifies
    them.

    Every iteration perturbs the current value of each active row, that
    is each row of a perturbable class that has not succeeded yet, and
    sends all candidates to the oracle in one query. Successful rows are
    frozen; the others continue from their perturbed candidate. The
    attack stops when no row is active, after `config.max_iterations`, or
    when `config.patience` consecutive iterations bring no new success; in
    that last case the unsuccessful rows revert to their original values.

    :Parameters:
        method : `tinyadv.method.AdaptivePatterns`
            Pattern sequences; adapted to `ds` first when `fit` is true.
        oracle : `tinyadv.oracle.ModelOracle`
            Classifier under attack.
        ds : `Dataset`
            Original rows.
        config : `AttackConfig`
            Attack parameters.

    :rtype: `AttackResult`
    :raises AttackError: If the oracle fails, naming the iteration.
    """
    if fit and len(ds):
        method.fit(ds)

    original = np.array(ds.values)
    working = original.copy()
    labels = ds.labels
    success = np.zeros(len(ds), dtype=bool)
    predicted = np.full(len(ds), -1, dtype=np.intp)

    perturbable = method.mask.rows(labels)
    if config.target_class is not None:
        perturbable &= labels != config.target_class

    result = AttackResult(working, original, success,
                          int(np.count_nonzero(perturbable)), STOP_EMPTY)
    if not len(ds):
        return result
    result.stop_reason = STOP_MAX_ITERATIONS

    stream = RngStream(config.seed)
    excluded = [c for c in range(len(ds.schema.class_names))
                if c not in method.mask]
    stale = 0
    for iteration in range(config.max_iterations):
        active = np.flatnonzero(perturbable & ~success)
        if not len(active):
            result.stop_reason = STOP_EXHAUSTED
            break

        started = time.perf_counter()
        candidates = method.perturb_rows(working[active], labels[active],
                                         stream, iteration, row_ids=active)
        generated = time.perf_counter()
        try:
            answer = np.asarray(oracle.predict(candidates)).reshape(-1)
        except OracleError as exc:
            raise AttackError('oracle failed in iteration %d: %s'
                              % (iteration, exc), iteration)
        if len(answer) != len(active):
            raise AttackError('oracle answered %d labels for %d rows in '
                              'iteration %d' % (len(answer), len(active),
                                                iteration), iteration)
        finished = time.perf_counter()

        if config.target_class is None:
            hit = answer != labels[active]
        else:
            hit = answer == config.target_class
        working[active] = candidates
        success[active[hit]] = True
        predicted[active] = answer

        record = IterationRecord(
            iteration, len(active), len(active), int(np.count_nonzero(hit)),
            int(np.count_nonzero(success)), generated - started,
            finished - generated)
        if config.track_metrics:
            queried = predicted >= 0
            record.metrics = evaluate(labels[queried], predicted[queried],
                                      excluded, ds.schema.class_names)
        result.per_iteration.append(record)
        log.info('iteration %d: %d active, %d new, %d total', iteration,
                 record.active, record.new_successes, record.total_successes)

        stale = 0 if hit.any() else stale + 1
        if stale >= config.patience:
            reverted = perturbable & ~success
            working[reverted] = original[reverted]
            result.stop_reason = STOP_PATIENCE
            break
    else:
        if config.max_iterations and not (perturbable & ~success).any():
            result.stop_reason = STOP_EXHAUSTED

    return result


def augment_training(method, train, rng=0):
    """Append one perturbed copy of every perturbable-class row to `train`.

    Each copy keeps its source row's label; no oracle is queried.

    :Parameters:
        method : `tinyadv.method.AdaptivePatterns`
            Pattern sequences fitted on `train` only.
        train : `Dataset`
            Original training rows.
        rng : `RngStream` or int
            Stream, or seed of a stream, for the random draws.

    :rtype: `Dataset`
    """
    if train.schema != method.schema:
        raise PreconditionError('dataset schema does not match')
    mask = method.mask.rows(train.labels)
    if not mask.any():
        return train
    source = select_rows(train, mask)
    copies = method.perturb_rows(source.values, source.labels, rng,
                                 row_ids=np.flatnonzero(mask))
    log.info('augmenting %d rows with %d adversarial copies', len(train),
             len(source))
    return concat([train, Dataset(train.schema, copies, source.labels)])

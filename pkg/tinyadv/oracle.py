"""classifiers behind a batch label-prediction interface"""

import collections
import logging
import queue
import shlex
import subprocess
import sys
import threading
import time

import numpy as np
from scipy.spatial.distance import cdist

from tinyadv.base import DataError, OracleError, PreconditionError, TinyAdvError

__all__ = ['DEFAULT_TIMEOUT', 'CHUNK_ROWS', 'ModelOracle', 'CallableOracle',
           'NearestCentroidModel', 'ExternalOracle', 'serve']

log = logging.getLogger(__name__)

# Seconds to wait for a reply from an external oracle
DEFAULT_TIMEOUT = 30.0
# Largest number of rows sent in one request
CHUNK_ROWS = 65536


class ModelOracle(object):
    """Abstract classifier answering hard labels for batches of rows.

    All oracle classes should derive from this class.

    :Ivariables:
        n_classes : int or None
            If set, every answered label must be below it.
    """

    n_classes = None

    def predict(self, values):
        """Return one class index per row of the matrix `values`.

        :rtype: numpy.ndarray
        """
        raise NotImplementedError

    def __call__(self, values):
        return self.predict(values)

    def close(self):
        """Release any resources held by the oracle."""

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def _checked(self, labels, n):
        labels = np.asarray(labels).reshape(-1)
        if len(labels) != n:
            raise OracleError('oracle answered %d labels for %d rows'
                              % (len(labels), n))
        if labels.dtype.kind == 'f':
            if not np.all(labels == np.round(labels)):
                raise OracleError('oracle answered non-integral labels')
        elif labels.dtype.kind not in 'iub':
            raise OracleError('oracle answered labels of type %s' % labels.dtype)
        labels = labels.astype(np.intp)
        if len(labels) and (labels.min() < 0 or (
                self.n_classes is not None and labels.max() >= self.n_classes)):
            raise OracleError('oracle answered a label outside the class range')
        return labels


class CallableOracle(ModelOracle):
    """Adapts a prediction function, such as a fitted estimator's
    ``predict`` method, to the oracle interface.
    """

    def __init__(self, func, n_classes=None):
        self.func = func
        self.n_classes = n_classes

    def predict(self, values):
        values = np.asarray(values, dtype=float)
        try:
            labels = self.func(values)
        except TinyAdvError:
            raise
        except Exception as exc:
            raise OracleError('prediction function failed: %s' % exc)
        return self._checked(labels, len(values))


class NearestCentroidModel(ModelOracle):
    """Predicts the class whose training mean is closest in Euclidean
    distance; ties go to the lowest class index.

    :Ivariables:
        classes : numpy.ndarray
            Sorted class indices seen in training.
        centroids : numpy.ndarray
            One mean row per class, aligned with `classes`.
    """

    def __init__(self, classes, centroids, n_classes=None):
        order = np.argsort(classes, kind='stable')
        self.classes = np.asarray(classes, dtype=np.intp)[order]
        self.centroids = np.asarray(centroids, dtype=float)[order]
        self.n_classes = n_classes

    @classmethod
    def fit(cls, train, classes=None):
        """Compute one centroid per class.

        :param classes: Class indices that need a centroid, defaulting to
                        the classes present in `train`.
        :raises DataError: If a requested class has no rows.
        """
        if classes is None:
            classes = np.unique(train.labels)
        if not len(classes):
            raise DataError('cannot fit a nearest-centroid model without rows')
        centroids = []
        for c in classes:
            rows = train.values[train.labels == c]
            if not len(rows):
                raise DataError('class %r has no training rows'
                                % train.schema.class_names[c])
            centroids.append(rows.mean(axis=0))
        log.debug('fitted %d centroids', len(centroids))
        return cls(classes, centroids, len(train.schema.class_names))

    def predict(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[1] != self.centroids.shape[1]:
            raise PreconditionError('expected rows of %d values, got shape %s'
                                    % (self.centroids.shape[1], values.shape))
        if not len(values):
            return np.zeros(0, dtype=np.intp)
        distances = cdist(values, self.centroids, 'sqeuclidean')
        return self.classes[np.argmin(distances, axis=1)]


class ExternalOracle(ModelOracle):
    """Queries a model running in a child process over a line protocol.

    A request is ``PREDICT <n> <d>`` followed by `n` lines of `d`
    comma-separated numbers; the reply is ``LABELS <n>`` followed by `n`
    lines of one class index each. ``QUIT`` asks the child to exit with
    status 0. The child is started on the first request. Requests are
    split into chunks of at most `chunk_rows` rows.

    Only one request can be in flight: callers must serialize access.
    """

    def __init__(self, argv, timeout=DEFAULT_TIMEOUT, chunk_rows=CHUNK_ROWS,
                 n_classes=None, env=None):
        if isinstance(argv, str):
            argv = shlex.split(argv)
        if not argv:
            raise OracleError('empty oracle command')
        self.argv = list(argv)
        self.timeout = float(timeout)
        self.chunk_rows = int(chunk_rows)
        self.n_classes = n_classes
        self.env = env
        self._process = None
        self._lines = None
        self._stderr = collections.deque(maxlen=20)

    def start(self):
        """Launch the child process."""
        log.debug('starting oracle %s', self.argv)
        try:
            self._process = subprocess.Popen(
                self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.PIPE, encoding='utf-8', env=self.env)
        except OSError as exc:
            raise OracleError('cannot start oracle %s: %s' % (self.argv, exc))
        self._lines = queue.Queue()
        self._stderr.clear()
        threading.Thread(target=self._pump, daemon=True,
                         args=(self._process.stdout, self._lines)).start()
        threading.Thread(target=self._drain, daemon=True,
                         args=(self._process.stderr, self._stderr)).start()

    @staticmethod
    def _pump(stream, lines):
        for line in iter(stream.readline, ''):
            lines.put(line)
        lines.put(None)

    @staticmethod
    def _drain(stream, tail):
        for line in iter(stream.readline, ''):
            tail.append(line.rstrip('\n'))

    def _fail(self, message):
        process = self._process
        self._process = None
        if process is not None:
            if process.poll() is None:
                process.kill()
            try:
                process.wait(timeout=1.0)
            except subprocess.TimeoutExpired:
                pass
            message += ' (exit status %s)' % process.returncode
        if self._stderr:
            message += '; stderr: ' + ' | '.join(self._stderr)
        raise OracleError(message)

    def _readline(self, deadline):
        try:
            line = self._lines.get(timeout=max(deadline - time.monotonic(), 0))
        except queue.Empty:
            self._fail('oracle sent no reply within %.1f s' % self.timeout)
        if line is None:
            self._fail('oracle closed its output')
        return line.rstrip('\n')

    @staticmethod
    def _send(stream, text, errors):
        try:
            stream.write(text)
            stream.flush()
        except (OSError, ValueError) as exc:
            errors.append(exc)

    def _request(self, chunk):
        n, d = chunk.shape
        lines = ['PREDICT %d %d' % (n, d)]
        lines.extend(','.join(map(repr, row)) for row in chunk.tolist())
        text = '\n'.join(lines) + '\n'

        # one deadline covers sending the request and reading the reply
        deadline = time.monotonic() + self.timeout
        errors = []
        writer = threading.Thread(target=self._send, daemon=True,
                                  args=(self._process.stdin, text, errors))
        writer.start()
        writer.join(max(deadline - time.monotonic(), 0))
        if writer.is_alive():
            self._fail('oracle did not read the request within %.1f s'
                       % self.timeout)
        if errors:
            self._fail('cannot send request to oracle: %s' % errors[0])

        header = self._readline(deadline).split()
        if len(header) != 2 or header[0] != 'LABELS' or not header[1].isdigit():
            self._fail('malformed reply header %r' % ' '.join(header))
        if int(header[1]) != n:
            self._fail('oracle answered %s labels for %d rows' % (header[1], n))
        labels = []
        for _ in range(n):
            line = self._readline(deadline).strip()
            try:
                labels.append(int(line))
            except ValueError:
                self._fail('malformed label line %r' % line)
        return np.array(labels, dtype=np.intp)

    def predict(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise PreconditionError('expected a matrix, got shape %s'
                                    % (values.shape,))
        if not len(values):
            return np.zeros(0, dtype=np.intp)
        if self._process is None:
            self.start()
        answers = [self._request(values[i:i + self.chunk_rows])
                   for i in range(0, len(values), self.chunk_rows)]
        return self._checked(np.concatenate(answers), len(values))

    def close(self):
        """Ask the child to quit and wait for it."""
        process = self._process
        if process is None:
            return
        self._process = None
        try:
            process.stdin.write('QUIT\n')
            process.stdin.close()
        except (OSError, ValueError):
            pass
        try:
            status = process.wait(timeout=self.timeout)
        except subprocess.TimeoutExpired:
            process.kill()
            process.wait()
            log.warning('oracle ignored QUIT and was killed')
            return
        if status:
            log.warning('oracle exited with status %d', status)
        log.debug('oracle stopped')


def serve(predict, instream=None, outstream=None):
    """Answer oracle requests with `predict` until ``QUIT`` or end of input.

    Runs in the child process of an `ExternalOracle`; `predict` maps a
    matrix of rows to one class index per row.

    :returns: The exit status the child should report.
    """
    instream = instream or sys.stdin
    outstream = outstream or sys.stdout
    while True:
        line = instream.readline()
        if not line:
            log.warning('end of input before QUIT')
            return 1
        words = line.split()
        if words == ['QUIT']:
            return 0
        if len(words) != 3 or words[0] != 'PREDICT':
            log.error('malformed request %r', line.rstrip('\n'))
            return 1
        n, d = int(words[1]), int(words[2])
        rows = [instream.readline().strip().split(',') for _ in range(n)]
        values = np.array(rows, dtype=float).reshape(n, d)
        labels = np.asarray(predict(values)).reshape(-1)
        outstream.write('LABELS %d\n' % len(labels))
        outstream.write(''.join('%d\n' % label for label in labels))
        outstream.flush()

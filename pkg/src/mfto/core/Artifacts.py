# coding: utf8

"""
Plain-text artifact files.

Every file starts with one header line, '# ' followed by a JSON object
that carries at least the mfto version, the config hash and the seed.
Numbers are written with Settings.FLOAT_FORMAT so a re-run of the same
config reproduces every file byte for byte.

  matrix   one 'row col value' line per stored entry, column-major
  grid     one line per cell, cell centre coordinates then the value,
           cells in row-major order of their multi-index
  csv      a comma separated table with a header row
"""
import csv
import hashlib
import logging
import os

import numpy as np
import scipy.sparse
import simplejson

from mfto.conf.Settings import Settings
from mfto.core.Comparison import COLUMNS
from mfto.core.Errors import ConfigError
from mfto.core.MeanField import SpatialFactor
from mfto.core.Partition import TensorPartition
from mfto.core.Ulam import StochasticMatrix

logger = logging.getLogger(__name__)


def config_hash(config):
    """sha256 of the canonical JSON form of a config dict."""
    message = simplejson.dumps(config, sort_keys=True)
    return hashlib.sha256(message.encode('utf8')).hexdigest()


def _fmt(value):
    return Settings.FLOAT_FORMAT % value


def _write_header(handle, header):
    handle.write('# ' + simplejson.dumps(header, sort_keys=True) + '\n')


def _read_header(handle, path):
    line = handle.readline()
    if not line.startswith('# '):
        raise ConfigError("%s has no artifact header" % path)
    try:
        return simplejson.loads(line[2:])
    except simplejson.errors.JSONDecodeError:
        raise ConfigError("%s has a malformed artifact header" % path)


class ArtifactWriter(object):
    """Writes artifacts for one run into `directory`, stamping every header."""

    def __init__(self, directory, config, seed):
        self.directory = directory
        self.stamp = {
            'version': Settings.MFTO_VERSION,
            'config_hash': config_hash(config),
            'seed': int(seed),
        }
        os.makedirs(directory, exist_ok=True)

    def path(self, name):
        return os.path.join(self.directory, name)

    def header(self, **extra):
        out = dict(self.stamp)
        out.update(extra)
        return out

    def write_matrix(self, name, P):
        path = self.path(name)
        coo = P.matrix.tocsc().tocoo()
        order = np.lexsort((coo.row, coo.col))
        lost = {str(j): float(P.lost[j]) for j in np.nonzero(P.lost)[0]}
        with open(path, 'w') as handle:
            _write_header(handle, self.header(artifact='matrix', n=P.n, metadata=P.metadata, lost=lost))
            for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                handle.write('%d %d %s\n' % (r, c, _fmt(v)))
        logger.info('Wrote %dx%d matrix with %d entries to %s', P.n, P.n, coo.nnz, path)
        return path

    def write_grid(self, name, part, values, **extra):
        path = self.path(name)
        values = np.asarray(values).ravel()
        centers = part.centers()
        with open(path, 'w') as handle:
            _write_header(handle, self.header(artifact='grid', grid=part.describe(), **extra))
            for x, v in zip(centers, values):
                handle.write(' '.join(_fmt(c) for c in x) + ' ' + _fmt(v) + '\n')
        logger.info('Wrote grid dump %s', path)
        return path

    def write_grid_slice(self, name, part, values, axis, coordinate, **extra):
        """The cells whose `axis` coordinate is nearest to `coordinate`, as a grid of one dimension less."""
        k = int(np.argmin(np.abs(part.axis_centers(axis) - coordinate)))
        sliced = np.take(np.asarray(values).reshape(part.shape), k, axis=axis)
        rest = [j for j in range(part.d) if j != axis]
        sub = TensorPartition([part.intervals[j] for j in rest], [part.counts[j] for j in rest])
        return self.write_grid(name, sub, sliced, slice_axis=axis,
                               slice_coordinate=float(part.axis_centers(axis)[k]), **extra)

    def write_csv(self, name, columns, rows, **extra):
        path = self.path(name)
        with open(path, 'w', newline='') as handle:
            _write_header(handle, self.header(artifact='csv', **extra))
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
        logger.info('Wrote table %s', path)
        return path

    def write_spectrum(self, name, result, **extra):
        rows = []
        for k in range(result.k):
            value = complex(result.eigenvalues[k])
            rows.append((k + 1, value.real, value.imag, abs(value), float(result.residuals[k]),
                         int(bool(result.complex_flags[k]))))
        return self.write_csv(name, ('rank', 'real', 'imag', 'modulus', 'residual', 'complex'), rows,
                              method=result.method, **extra)

    def write_factor(self, name, factor, **extra):
        eigenvalue = complex(factor.eigenvalue)
        return self.write_grid(name, factor.part, factor.values, subsystem=factor.index, kind=factor.kind,
                               eigenvalue=[eigenvalue.real, eigenvalue.imag], **extra)

    def write_report(self, name, report, **extra):
        path = self.write_csv(name + '.csv', COLUMNS, [r.as_tuple() for r in report.rows], **extra)
        with open(self.path(name + '.txt'), 'w') as handle:
            _write_header(handle, self.header(artifact='report', **extra))
            handle.write(report.table() + '\n')
        return path


def _load(path):
    try:
        with open(path) as handle:
            header = _read_header(handle, path)
            data = np.loadtxt(handle, ndmin=2)
    except (IOError, ValueError) as e:
        raise ConfigError("Cannot read artifact %s: %s" % (path, e))
    return header, data


def read_matrix(path):
    header, data = _load(path)
    n = int(header['n'])
    if data.size:
        rows, cols, vals = data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2]
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    lost = np.zeros(n)
    for j, fraction in header.get('lost', {}).items():
        lost[int(j)] = fraction
    matrix = scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(n, n))
    return StochasticMatrix(matrix, header.get('metadata'), lost), header


def read_grid(path):
    """:returns: (partition, values in cell order, header)"""
    header, data = _load(path)
    part = TensorPartition.from_description(header['grid'])
    if data.shape[0] != part.n:
        raise ConfigError("%s holds %d cells, its grid has %d" % (path, data.shape[0], part.n))
    return part, data[:, -1].copy(), header


def read_factor(path):
    part, values, header = read_grid(path)
    eigenvalue = complex(*header.get('eigenvalue', [1.0, 0.0]))
    if eigenvalue.imag == 0:
        eigenvalue = eigenvalue.real
    return SpatialFactor(int(header['subsystem']), part, values, header['kind'], eigenvalue)

# coding: utf8

"""
Ulam discretisation of the spatial transfer operator.

Column convention throughout: entry (i, j) is the estimated probability of
moving from cell j to cell i, so every column sums to one.
"""
import logging

import numpy as np
import scipy.sparse
from gevent.threadpool import ThreadPool

from mfto.conf.Settings import Settings
from mfto.core.Errors import AssemblyError, UndefinedProbabilityError
from mfto.core.Integrator import flow_batch
from mfto.core.Sampling import FULL_STREAM, cell_generator, momentum_factor, sample_uniform_in_box
from mfto.core.StatsCollector import StatsCollector

logger = logging.getLogger(__name__)

STOCHASTIC_TOLERANCE = 1e-12


class StochasticMatrix(object):
    """
    Sparse column-stochastic matrix plus the metadata of its assembly.
    `lost` holds the fraction of samples per column that left the domain.
    """

    def __init__(self, matrix, metadata=None, lost=None):
        self.matrix = scipy.sparse.csc_matrix(matrix, dtype=float)
        n, m = self.matrix.shape
        if n != m:
            raise AssemblyError("Transition matrix must be square, got %dx%d" % (n, m))
        self.n = n
        self.metadata = dict(metadata or {})
        self.lost = np.zeros(n) if lost is None else np.asarray(lost, dtype=float)
        self.check_stochastic()

    def check_stochastic(self, tol=STOCHASTIC_TOLERANCE):
        data = self.matrix.data
        if data.size and (data.min() < 0.0 or data.max() > 1.0 + tol):
            raise AssemblyError("Transition matrix has entries outside [0, 1]")
        defect = np.abs(self.column_sums() - 1.0)
        if defect.size and defect.max() > tol:
            j = int(np.argmax(defect))
            raise AssemblyError("Column %d sums to %r, not 1" % (j, 1.0 - defect[j]))

    def column_sums(self):
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def dot(self, v):
        return self.matrix.dot(v)

    def toarray(self):
        return self.matrix.toarray()

    def __eq__(self, other):
        if not isinstance(other, StochasticMatrix) or other.n != self.n:
            return False
        a, b = self.matrix.tocoo(), other.matrix.tocoo()
        return (a.nnz == b.nnz and np.array_equal(a.row, b.row) and np.array_equal(a.col, b.col)
                and np.array_equal(a.data, b.data))

    __hash__ = None


def columns_from_destinations(cells, destinations, n):
    """
    Empirical column per start cell.  `destinations` is (len(cells), K)
    with -1 marking lost samples; a cell that keeps none of them is an
    AssemblyError.

    :returns: (rows, cols, values, lost_fraction)
    """
    rows, cols, vals = [], [], []
    lost = np.zeros(len(cells))
    for k, cell in enumerate(cells):
        dest = destinations[k]
        kept = dest[dest >= 0]
        K = dest.shape[0]
        lost[k] = (K - kept.size) / float(K)
        if kept.size == 0:
            # no survivor, no empirical column
            raise AssemblyError("Every one of the %d samples of cell %d left the domain; "
                                "shorten the lag time or use a stabler scheme" % (K, cell))
        targets, counts = np.unique(kept, return_counts=True)
        rows.append(targets)
        cols.append(np.full(targets.size, cell))
        vals.append(counts / float(kept.size))
    return rows, cols, vals, lost


def run_chunked(work, cells, threads=None):
    """
    Apply `work` to consecutive chunks of `cells`, on a gevent thread pool
    when more than one thread is requested.  Results come back in chunk
    order whatever the scheduling.
    """
    size = Settings.ASSEMBLY_CHUNK_CELLS
    chunks = [cells[i:i + size] for i in range(0, len(cells), size)]
    threads = threads or Settings.THREADS
    if threads <= 1 or len(chunks) <= 1:
        return [work(chunk) for chunk in chunks]
    pool = ThreadPool(threads)
    try:
        return pool.map(work, chunks)
    finally:
        pool.kill()


def assemble_from_sampler(part, K, propagate, stream_id, seed, threads=None, stats=None, metadata=None):
    """
    Shared Ulam loop.  For each cell: K uniform positions and K standard
    normals from the cell's generator, then `propagate(q, xi)` returns the
    configuration-space endpoints of the whole chunk.
    """
    if K < 1:
        raise AssemblyError("K must be at least 1, got %r" % (K,))
    stats = stats if stats is not None else StatsCollector()
    d = part.d

    def work(chunk):
        q0 = np.empty((len(chunk), K, d))
        xi = np.empty((len(chunk), K, d))
        for k, cell in enumerate(chunk):
            rng = cell_generator(seed, stream_id, cell)
            q0[k] = sample_uniform_in_box(part.cell_box(cell), rng, size=K)
            xi[k] = rng.standard_normal((K, d))
        qT = propagate(q0.reshape(-1, d), xi.reshape(-1, d), stats)
        destinations = part.locate(qT).reshape(len(chunk), K)
        return columns_from_destinations(chunk, destinations, part.n)

    results = run_chunked(work, list(range(part.n)), threads)

    rows = np.concatenate([r for res in results for r in res[0]])
    cols = np.concatenate([c for res in results for c in res[1]])
    vals = np.concatenate([v for res in results for v in res[2]])
    lost = np.concatenate([res[3] for res in results])

    renormalised = np.nonzero(lost > 0)[0]
    if renormalised.size:
        stats.tally('columns_renormalised', int(renormalised.size))
        stats.tally('samples_lost', int(np.rint(lost.sum() * K)))
        worst = int(renormalised[np.argmax(lost[renormalised])])
        level = logging.WARNING if lost[worst] > Settings.LOST_MASS_WARN_FRACTION else logging.INFO
        logger.log(level, 'Renormalised %d columns after lost samples; worst column %d lost %.4f',
                   renormalised.size, worst, lost[worst])

    matrix = scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(part.n, part.n))
    meta = dict(metadata or {})
    meta.update({'K': K, 'seed': seed, 'grid': part.describe(), 'stats': stats.getSummary()})
    return StochasticMatrix(matrix, meta, lost)


def assemble_full_spatial(model, ens, part, K, spec, rng, threads=None, stats=None):
    """
    Monte-Carlo Ulam matrix of the full spatial transfer operator: positions
    uniform per cell, momenta from N(0, M(q)/beta), integrate for T,
    project to configuration space and bin.

    :param rng: an `RngSpec`; its seed drives the per-cell streams.
    """
    def propagate(q0, xi, stats):
        p0 = np.einsum('...ij,...j->...i', momentum_factor(ens, q0), xi)
        qT, _ = flow_batch(model.phase_velocity, q0, p0, spec, model.domain, stats)
        return qT

    metadata = {
        'kind': 'full',
        'model': model.describe(),
        'T': spec.T,
        'steps': spec.steps,
        'scheme': spec.scheme,
        'beta': ens.beta,
        'convention': ens.convention,
    }
    return assemble_from_sampler(part, K, propagate, FULL_STREAM, rng.seed, threads, stats, metadata)


def transition_probability(P, part, B_from, B_to, weights):
    """
    sum_{j in B_from} w_j sum_{i in B_to} P_ij / sum_{j in B_from} w_j.
    """
    B_from = np.asarray(sorted(set(int(b) for b in B_from)), dtype=np.int64)
    B_to = np.asarray(sorted(set(int(b) for b in B_to)), dtype=np.int64)
    if B_from.size == 0 or B_to.size == 0:
        raise UndefinedProbabilityError("Transition probability needs nonempty sets")
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise UndefinedProbabilityError("Cell weights must be nonnegative")
    total = weights[B_from].sum()
    if total <= 0:
        raise UndefinedProbabilityError("Zero total weight on the starting set")
    block = P.matrix[B_to, :][:, B_from]
    arrived = np.asarray(block.sum(axis=0)).ravel()
    return float(np.dot(weights[B_from], arrived) / total)


def propagate_density(P, v, k):
    """P^k v by repeated matrix-vector products."""
    v = np.asarray(v, dtype=float)
    for _ in range(int(k)):
        v = P.dot(v)
    return v


def self_adjointness_defect(P, pi):
    """
    ||P D - D P^T||_1 / ||P D||_1 with D = diag(pi); zero under detailed
    balance in the column convention.
    """
    D = scipy.sparse.diags(np.asarray(pi, dtype=float))
    PD = P.matrix.dot(D)
    defect = PD - D.dot(P.matrix.T)
    return float(abs(defect).sum() / abs(PD).sum())

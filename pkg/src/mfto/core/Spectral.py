# coding: utf8

"""
Dominant eigenpairs of column-stochastic matrices and almost invariant
sets read off eigenvector signs.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from mfto.conf.Settings import Settings
from mfto.core.Errors import (
    DegenerateDecompositionError,
    SpectralError,
    UndefinedProbabilityError,
)

logger = logging.getLogger(__name__)

ARNOLDI = 'arnoldi'
DENSE = 'dense'
POWER = 'power-deflation'
IDENTITY = 'identity'

# Imaginary parts below this are treated as rounding noise
REAL_TOLERANCE = 1e-10


@dataclass
class SpectralResult(object):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    method: str
    complex_flags: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.complex_flags is None:
            self.complex_flags = np.abs(np.imag(self.eigenvalues)) > REAL_TOLERANCE

    @property
    def k(self):
        return len(self.eigenvalues)

    def vector(self, index):
        """Eigenvector `index` (0 is the dominant one) as a real array."""
        return self.eigenvectors[:, index]


def sign_normalize(v):
    """Scale to unit 2-norm with the largest-magnitude entry positive."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        return v.copy()
    v = v / norm
    pivot = int(np.argmax(np.abs(v)))
    return -v if v[pivot] < 0 else v


def _as_operator(P):
    return P.matrix if hasattr(P, 'matrix') else scipy.sparse.csc_matrix(P)


def _check_stochastic(A, tol=1e-10):
    sums = np.asarray(A.sum(axis=0)).ravel()
    if np.any(np.abs(sums - 1.0) > tol):
        raise SpectralError("Operator is not column stochastic (column sums off by %.3g)"
                            % np.max(np.abs(sums - 1.0)))


def _finish(A, values, vectors, method, tol):
    order = np.lexsort((-np.real(values), -np.abs(values)))
    values = values[order]
    vectors = vectors[:, order]
    real_vectors = np.empty(vectors.shape, dtype=float)
    for k in range(values.size):
        real_vectors[:, k] = sign_normalize(np.real(vectors[:, k]))
        if abs(np.imag(values[k])) <= REAL_TOLERANCE:
            values[k] = np.real(values[k])
    residuals = np.array([
        np.linalg.norm(A.dot(vectors[:, k]) - values[k] * vectors[:, k]) / max(np.linalg.norm(vectors[:, k]), 1e-300)
        for k in range(values.size)
    ])
    result = SpectralResult(values, real_vectors, residuals, method)
    if np.any(result.complex_flags):
        logger.warning('Complex eigenvalues among the dominant pairs: %s',
                       ', '.join('%.6g%+.3gj' % (v.real, v.imag) for v in values[result.complex_flags]))
    if np.any(residuals > tol):
        raise SpectralError("Eigenpair residuals above tolerance %.3g: %s" % (tol, residuals), residuals)
    return result


def dense_eigs(P, k, tol=None):
    """Full spectrum with numpy, truncated to the k largest moduli."""
    tol = tol or Settings.EIGEN_TOLERANCE
    A = _as_operator(P)
    values, vectors = np.linalg.eig(A.toarray())
    order = np.argsort(-np.abs(values), kind='stable')[:k]
    return _finish(A, values[order], vectors[:, order], DENSE, tol)


def dominant_eigs(P, k, tol=None, max_iter=None, verify=False):
    """
    The k largest-modulus eigenpairs by restarted Arnoldi, started from the
    normalised all-ones vector.  Small problems where Arnoldi cannot return
    k pairs (k >= n - 1) go to the dense solver.
    """
    tol = tol or Settings.EIGEN_TOLERANCE
    max_iter = max_iter or Settings.EIGEN_MAX_ITER
    A = _as_operator(P)
    n = A.shape[0]
    _check_stochastic(A)
    if not 1 <= k <= n:
        raise SpectralError("Requested %d eigenpairs of a %dx%d matrix" % (k, n, n))
    if A.nnz == n and np.all(A.diagonal() == 1.0):
        # Zero lag time: every vector is invariant, the Krylov space collapses
        vectors = np.eye(n)[:, :k]
        vectors[:, 0] = 1.0 / np.sqrt(n)
        result = SpectralResult(np.ones(k), vectors, np.zeros(k), IDENTITY)
    elif k >= n - 1:
        if n > Settings.DENSE_EIGEN_MAX_N:
            raise SpectralError("Too many eigenpairs requested for a %dx%d matrix" % (n, n))
        result = dense_eigs(A, k, tol)
    else:
        v0 = np.ones(n) / np.sqrt(n)
        try:
            values, vectors = scipy.sparse.linalg.eigs(A, k=k, which='LM', v0=v0,
                                                       tol=tol * 1e-2, maxiter=max_iter)
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            residuals = np.array([np.linalg.norm(A.dot(exc.eigenvectors[:, j]) - exc.eigenvalues[j] * exc.eigenvectors[:, j])
                                  for j in range(len(exc.eigenvalues))])
            raise SpectralError("Arnoldi did not converge for %d eigenpairs" % k, residuals)
        result = _finish(A, values, vectors, ARNOLDI, tol)
    if verify and k <= 3 and result.method != IDENTITY:
        check = power_deflation_eigs(A, k, tol=1e-12)
        gap = np.max(np.abs(np.asarray(check.eigenvalues) - np.real(result.eigenvalues)))
        if gap > 1e-6:
            logger.warning('Power iteration disagrees with %s by %.3g on the leading eigenvalues',
                           result.method, gap)
    return result


def _power(apply, n, tol, max_iter, start):
    v = start / np.linalg.norm(start)
    value = 0.0
    for _ in range(max_iter):
        w = apply(v)
        value_new = float(np.dot(v, w))
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0, v
        w = w / norm
        if np.dot(w, v) < 0:
            w = -w
        if np.linalg.norm(w - v) < tol and abs(value_new - value) < tol:
            return value_new, w
        v, value = w, value_new
    return value, v


def power_deflation_eigs(P, k, tol=1e-10, max_iter=None):
    """
    Verification path for k <= 3: power iteration on P, deflating every
    found pair with its left eigenvector (Wielandt/Hotelling form).
    Assumes real dominant eigenvalues.
    """
    max_iter = max_iter or Settings.EIGEN_MAX_ITER
    A = _as_operator(P)
    n = A.shape[0]
    AT = A.T.tocsc()
    found = []
    start = np.linspace(1.0, 2.0, n)
    for _ in range(k):
        def apply(v, transpose=False):
            base = AT.dot(v) if transpose else A.dot(v)
            for lam, right, left in found:
                if transpose:
                    base = base - lam * left * np.dot(right, v)
                else:
                    base = base - lam * right * np.dot(left, v)
            return base
        lam, right = _power(apply, n, tol, max_iter, start)
        _, left = _power(lambda v: apply(v, transpose=True), n, tol, max_iter, start)
        left = left / np.dot(left, right)
        found.append((lam, right, left))
    values = np.array([f[0] for f in found])
    vectors = np.stack([sign_normalize(f[1]) for f in found], axis=1)
    residuals = np.array([np.linalg.norm(A.dot(vectors[:, j]) - values[j] * vectors[:, j]) for j in range(k)])
    return SpectralResult(values, vectors, residuals, POWER)


def perron_vector(P, tol=None, max_iter=None):
    """
    Nonnegative unit-mass fixed vector of a column-stochastic matrix by
    normalised power iteration.
    """
    tol = tol or Settings.PERRON_TOLERANCE
    max_iter = max_iter or Settings.PERRON_MAX_ITER
    A = _as_operator(P)
    _check_stochastic(A)
    n = A.shape[0]
    v = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        w = A.dot(v)
        w = w / w.sum()
        if np.abs(w - v).sum() < tol:
            return np.clip(w, 0.0, None) / np.clip(w, 0.0, None).sum()
        v = w
    raise SpectralError("Power iteration for the Perron vector did not converge in %d iterations" % max_iter,
                        np.array([np.abs(A.dot(v) - v).sum()]))


def invariant_vector(P, tol=None):
    """Eigenvector at eigenvalue 1, clipped at zero and scaled to unit mass."""
    result = dominant_eigs(P, 1, tol=tol)
    if abs(result.eigenvalues[0] - 1.0) > 1e-8:
        raise SpectralError("Leading eigenvalue %r is not 1" % (result.eigenvalues[0],), result.residuals)
    v = result.vector(0)
    if np.any(v < -1e-12):
        raise SpectralError("Invariant vector has significantly negative entries", result.residuals)
    v = np.clip(v, 0.0, None)
    return v / v.sum()


def almost_invariant_sets(v, part=None):
    """
    Cells where the eigenvector is positive and where it is negative.
    Zero cells belong to neither set.
    """
    v = np.asarray(v, dtype=float)
    if part is not None and v.size != part.n:
        raise DegenerateDecompositionError("Vector of length %d on a partition of %d cells" % (v.size, part.n))
    plus = np.nonzero(v > 0)[0]
    minus = np.nonzero(v < 0)[0]
    if plus.size == 0 or minus.size == 0:
        raise DegenerateDecompositionError("Eigenvector has a single sign; no decomposition")
    return plus, minus


def invariance_ratio(P, A, weights):
    """sum_{j in A} w_j sum_{i in A} P_ij / sum_{j in A} w_j."""
    A = np.asarray(sorted(set(int(a) for a in A)), dtype=np.int64)
    weights = np.asarray(weights, dtype=float)
    if A.size == 0 or weights[A].sum() <= 0:
        raise UndefinedProbabilityError("Invariance ratio of a set with zero weight is undefined")
    block = _as_operator(P)[A, :][:, A]
    stay = np.asarray(block.sum(axis=0)).ravel()
    return float(np.dot(weights[A], stay) / weights[A].sum())

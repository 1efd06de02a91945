# coding: utf8

"""
Quantitative comparison of full-operator eigenvectors with mean-field
product eigenfunctions on a shared grid.
"""
from dataclasses import dataclass, field

import numpy as np

from mfto.core.Errors import ComparisonError

COLUMNS = ('label', 'full_rank', 'full_eigenvalue', 'mf_eigenvalue', 'similarity', 'sign_agreement')


@dataclass
class ComparisonRow(object):
    label: str
    full_rank: int
    full_eigenvalue: float
    mf_eigenvalue: float
    similarity: float
    sign_agreement: float

    def as_tuple(self):
        return tuple(getattr(self, c) for c in COLUMNS)


@dataclass
class ComparisonReport(object):
    rows: list = field(default_factory=list)

    def add(self, row):
        self.rows.append(row)

    def table(self):
        header = '%-40s %5s %12s %12s %10s %8s' % ('product', 'rank', 'lambda_full', 'lambda_mf', 'cosine', 'signs')
        lines = [header, '-' * len(header)]
        for r in self.rows:
            lines.append('%-40s %5d %12.6f %12.6f %10.4f %7.1f%%' % (
                r.label, r.full_rank, r.full_eigenvalue, r.mf_eigenvalue, r.similarity, 100.0 * r.sign_agreement))
        return '\n'.join(lines)


def _check(full, product, weights):
    full = np.asarray(full, dtype=float).ravel()
    product = np.asarray(product, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if not full.size == product.size == weights.size:
        raise ComparisonError("Vectors of sizes %d, %d and weights of size %d do not share a grid"
                              % (full.size, product.size, weights.size))
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ComparisonError("Comparison weights must be nonnegative with positive total")
    return full, product, weights


def weighted_similarity(full, product, weights):
    """
    |<u, v>_w| / (|u|_w |v|_w): the cosine after aligning the sign of v
    with u, in [0, 1].
    """
    u, v, w = _check(full, product, weights)
    nu = np.sqrt(np.dot(w, u * u))
    nv = np.sqrt(np.dot(w, v * v))
    if nu == 0 or nv == 0:
        return 0.0
    return float(min(1.0, abs(np.dot(w, u * v)) / (nu * nv)))


def sign_agreement(full, product, weights):
    """Weight fraction of cells where the sign-aligned vectors agree in sign."""
    u, v, w = _check(full, product, weights)
    if np.dot(w, u * v) < 0:
        v = -v
    return float(np.dot(w, np.sign(u) == np.sign(v)) / w.sum())


def permutation_null(vector, weights, rng, draws=20):
    """Mean similarity of `vector` with random shuffles of itself; near 0 for informative vectors."""
    v = np.asarray(vector, dtype=float).ravel()
    return float(np.mean([weighted_similarity(v, rng.permutation(v), weights) for _ in range(draws)]))


def compare(full_part, full_spectrum, invariant, products, full_ranks):
    """
    :param full_part: partition of the full operator's grid
    :param full_spectrum: SpectralResult of the full operator
    :param invariant: invariant cell masses of the full operator (the weights)
    :param products: ProductFunction list, each paired with `full_ranks[k]`
        (1 is the leading eigenvector)
    """
    if len(products) != len(full_ranks):
        raise ComparisonError("%d products but %d eigenvector ranks" % (len(products), len(full_ranks)))
    report = ComparisonReport()
    for product, rank in zip(products, full_ranks):
        if not product.part.same_grid(full_part):
            raise ComparisonError("Product grid %r differs from the full grid %r"
                                  % (list(product.part.counts), list(full_part.counts)))
        if not 1 <= rank <= full_spectrum.k:
            raise ComparisonError("Full spectrum has no eigenvector %d" % rank)
        v = full_spectrum.vector(rank - 1)
        report.add(ComparisonRow(
            label='x'.join(product.selection),
            full_rank=int(rank),
            full_eigenvalue=float(np.real(full_spectrum.eigenvalues[rank - 1])),
            mf_eigenvalue=float(np.real(product.eigenvalue)),
            similarity=weighted_similarity(v, product.values, invariant),
            sign_agreement=sign_agreement(v, product.values, invariant),
        ))
    return report

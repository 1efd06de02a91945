# coding: utf8

"""
Box partitions of (sub)configuration spaces.

Cells are numbered in row-major (C) order of their multi-index, so the
last coordinate varies fastest.  Grid dumps use the same order.
"""
import numpy as np

from mfto.core.Errors import LayoutError
from mfto.core.Models import Interval


class TensorPartition(object):

    def __init__(self, intervals, counts):
        self.intervals = tuple(intervals)
        self.counts = tuple(int(c) for c in counts)
        if len(self.intervals) != len(self.counts):
            raise LayoutError("%d intervals but %d cell counts" % (len(self.intervals), len(self.counts)))
        if any(c < 1 for c in self.counts):
            raise LayoutError("Cell counts must be positive: %r" % (self.counts,))
        self.d = len(self.counts)
        self.shape = self.counts
        self.n = int(np.prod(self.counts))
        self.lower = np.array([iv.lower for iv in self.intervals])
        self.upper = np.array([iv.upper for iv in self.intervals])
        self.widths = (self.upper - self.lower) / np.array(self.counts)

    @classmethod
    def for_model(cls, model, counts, coordinates=None):
        """Partition of the model domain, or of the listed coordinates only."""
        if coordinates is None:
            coordinates = range(model.d)
        intervals = [model.domain[k] for k in coordinates]
        if np.isscalar(counts):
            counts = [counts] * len(intervals)
        return cls(intervals, counts)

    @property
    def cell_volume(self):
        return float(np.prod(self.widths))

    def multi_index(self, cell):
        return np.unravel_index(cell, self.shape)

    def cell_index(self, multi):
        return np.ravel_multi_index(tuple(np.asarray(m) for m in multi), self.shape)

    def cell_box(self, cell):
        idx = np.array(self.multi_index(cell), dtype=float)
        lower = self.lower + idx * self.widths
        return lower, lower + self.widths

    def centers(self):
        """Cell midpoints, shape (n, d), in cell order."""
        axes = [self.lower[k] + (np.arange(self.counts[k]) + 0.5) * self.widths[k] for k in range(self.d)]
        mesh = np.meshgrid(*axes, indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def axis_centers(self, k):
        return self.lower[k] + (np.arange(self.counts[k]) + 0.5) * self.widths[k]

    def locate(self, q):
        """
        Cell index of every row of `q`; -1 where the point lies outside.
        A point exactly on the upper face belongs to the last cell.
        """
        q = np.asarray(q, dtype=float)
        inside = np.all((q >= self.lower) & (q <= self.upper), axis=-1)
        # outside rows, NaN included, are parked on the lower corner before the integer cast
        safe = np.where(inside[..., None], q, self.lower)
        idx = np.floor((safe - self.lower) / self.widths).astype(np.int64)
        idx = np.clip(idx, 0, np.array(self.counts) - 1)
        flat = np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), self.shape)
        return np.where(inside, flat, -1)

    def same_grid(self, other):
        return (self.counts == other.counts
                and np.allclose(self.lower, other.lower)
                and np.allclose(self.upper, other.upper))

    def describe(self):
        return {
            'counts': list(self.counts),
            'lower': self.lower.tolist(),
            'upper': self.upper.tolist(),
            'boundaries': [iv.boundary for iv in self.intervals],
        }

    @classmethod
    def from_description(cls, desc):
        intervals = [Interval(lo, hi, b) for lo, hi, b in zip(desc['lower'], desc['upper'], desc['boundaries'])]
        return cls(intervals, desc['counts'])

# coding: utf8

"""
Gridded phase-space densities and semi-Lagrangian transport.

A phase grid is a pair of partitions, one over the configuration
coordinates and one over the momenta; values are densities at the cell
midpoints with axes ordered (q axes..., p axes...).  Transport traces the
grid nodes backwards through a (piecewise frozen) field and interpolates
the initial density once, multilinearly.
"""
import numpy as np
from scipy.interpolate import RegularGridInterpolator

from mfto.conf.Settings import Settings
from mfto.core.Integrator import flow_batch
from mfto.core.Models import PERIODIC, Interval, TRUNCATED
from mfto.core.Partition import TensorPartition
from mfto.core.Sampling import thermal_momentum_scale

THERMAL_SCAN_CELLS = 8


class PhaseGrid(object):

    def __init__(self, q_part, p_part):
        if q_part.d != p_part.d:
            raise ValueError("Configuration and momentum grids differ in dimension")
        self.q_part = q_part
        self.p_part = p_part
        self.d = q_part.d
        self.shape = tuple(q_part.shape) + tuple(p_part.shape)
        self.cell_volume = q_part.cell_volume * p_part.cell_volume
        self.domain = tuple(q_part.intervals)

    @classmethod
    def with_momentum_bounds(cls, q_part, p_half_widths, p_counts):
        half_widths = np.broadcast_to(p_half_widths, (q_part.d,))
        intervals = [Interval(-w, w, TRUNCATED) for w in half_widths]
        return cls(q_part, TensorPartition(intervals, np.broadcast_to(p_counts, (q_part.d,))))

    @classmethod
    def thermal(cls, ens, q_part, coordinates=None, sigmas=None, p_counts=None):
        """
        Momentum box of +-sigmas thermal standard deviations per coordinate,
        sized at the heaviest point of a coarse scan of the model domain.
        `coordinates` picks the model coordinates q_part covers.
        """
        sigmas = Settings.MOMENTUM_SIGMAS if sigmas is None else sigmas
        p_counts = Settings.MOMENTUM_NODES if p_counts is None else p_counts
        scan = TensorPartition.for_model(ens.model, THERMAL_SCAN_CELLS).centers()
        scale = thermal_momentum_scale(ens, scan).max(axis=0)
        if coordinates is not None:
            scale = scale[list(coordinates)]
        return cls.with_momentum_bounds(q_part, sigmas * scale, p_counts)

    def axes(self):
        return ([self.q_part.axis_centers(k) for k in range(self.d)]
                + [self.p_part.axis_centers(k) for k in range(self.d)])

    def nodes(self):
        """All grid nodes as (q, p) arrays of shape (N, d)."""
        mesh = np.meshgrid(*self.axes(), indexing='ij')
        flat = np.stack([m.ravel() for m in mesh], axis=-1)
        return flat[:, :self.d], flat[:, self.d:]

    def mass(self, values):
        return float(values.sum() * self.cell_volume)

    def same_grid(self, other):
        return self.q_part.same_grid(other.q_part) and self.p_part.same_grid(other.p_part)


def grid_interpolator(axes, values, periodic, fill_value=0.0):
    """
    Multilinear interpolator on node axes.  Periodic axes are padded by one
    wrapped node on each side so the edge half-cells interpolate across the
    seam; queries must already be wrapped into the period.
    """
    axes = [np.asarray(a, dtype=float) for a in axes]
    for k, is_periodic in enumerate(periodic):
        if not is_periodic:
            continue
        h = axes[k][1] - axes[k][0] if axes[k].size > 1 else 1.0
        axes[k] = np.concatenate([[axes[k][0] - h], axes[k], [axes[k][-1] + h]])
        pad = [(0, 0)] * values.ndim
        pad[k] = (1, 1)
        values = np.pad(values, pad, mode='wrap')
    return RegularGridInterpolator(axes, values, method='linear', bounds_error=False, fill_value=fill_value)


def _inside(grid, points):
    lower = np.concatenate([grid.q_part.lower, grid.p_part.lower])
    upper = np.concatenate([grid.q_part.upper, grid.p_part.upper])
    return np.all((points >= lower) & (points <= upper), axis=-1)


def interpolate_density(grid, values, q, p):
    """Density at arbitrary (q, p); zero outside non-periodic bounds."""
    periodic = [iv.boundary == PERIODIC for iv in grid.domain] + [False] * grid.d
    interp = grid_interpolator(grid.axes(), values, periodic)
    points = np.concatenate([q, p], axis=-1)
    # Nodes sit at cell midpoints: clamp the edge half-cells of bounded axes
    first = np.array([a[0] for a in grid.axes()])
    last = np.array([a[-1] for a in grid.axes()])
    inside = _inside(grid, points)
    clamped = np.where(np.array(periodic), points, np.clip(points, first, last))
    out = interp(clamped)
    return np.where(inside, out, 0.0)


def trace_back(grid, fields, durations, spec, stats=None):
    """
    Foot points of the grid nodes: integrate backwards through `fields`
    (last field first), each for its duration, with the scheme and step
    count of `spec` per segment.
    """
    q, p = grid.nodes()
    for field, duration in zip(reversed(fields), reversed(durations)):
        if duration == 0.0:
            continue
        segment = spec.with_time(-duration * spec.time_unit)
        q, p = flow_batch(field, q, p, segment, grid.domain, stats)
    return q, p


def transport(grid, values0, fields, durations, spec, stats=None, initial=None):
    """
    Density at the end of the field history, by one interpolation of
    `values0`.  When the initial density is known in closed form,
    `initial(q, p)` is evaluated at the foot points instead.
    """
    q, p = trace_back(grid, fields, durations, spec, stats)
    if initial is None:
        return interpolate_density(grid, values0, q, p).reshape(grid.shape)
    inside = _inside(grid, np.concatenate([q, p], axis=-1))
    return np.where(inside, initial(q, p), 0.0).reshape(grid.shape)

# coding: utf8

"""
Time-T flow maps of phase-space vector fields.

A field is any callable `field(q, p) -> (qdot, pdot)` that accepts batched
arrays; `HamiltonianModel.phase_velocity` and the mean-field tables both
qualify.  Boundaries are applied after every step: periodic coordinates
wrap, reflecting coordinates fold back into the interval and flip the
sign of their conjugate momentum.  Truncated coordinates are left alone
until a trajectory crosses them.
"""
import logging
from dataclasses import dataclass

import numpy as np

from mfto.conf import Units
from mfto.core.Errors import BlowUpError, ConfigError
from mfto.core.Models import PERIODIC, REFLECTING, TRUNCATED, PhaseState

logger = logging.getLogger(__name__)

EULER = 'explicit-euler'
RK4 = 'rk4'
SCHEMES = (EULER, RK4)


@dataclass(frozen=True)
class IntegratorSpec(object):
    """
    `T` is in seconds; `time_unit` is the length of one model time unit in
    seconds (1e-12 for models in ps).
    """
    scheme: str = EULER
    steps: int = 10
    T: float = 0.5e-13
    time_unit: float = 1.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError("Unknown integration scheme %r" % (self.scheme,))
        if int(self.steps) < 1:
            raise ConfigError("steps must be a positive integer, got %r" % (self.steps,))
        if not np.isfinite(self.T):
            raise ConfigError("T must be finite")
        object.__setattr__(self, 'steps', int(self.steps))

    @property
    def duration(self):
        """Integration time in model time units."""
        return Units.seconds_to_model_time(self.T, self.time_unit)

    @property
    def dt(self):
        return self.duration / self.steps

    def with_time(self, T):
        return IntegratorSpec(self.scheme, self.steps, T, self.time_unit)


def apply_boundaries(q, p, domain, stats=None):
    """Wrap periodic and fold reflecting coordinates in place."""
    for k, interval in enumerate(domain):
        if interval.boundary == PERIODIC:
            x = q[..., k]
            outside = (x < interval.lower) | (x >= interval.upper)
            if np.any(outside):
                q[..., k] = interval.lower + np.mod(x - interval.lower, interval.width)
                if stats is not None:
                    stats.tally('wraps', int(np.count_nonzero(outside)))
        elif interval.boundary == REFLECTING:
            x = q[..., k]
            outside = (x < interval.lower) | (x > interval.upper)
            if np.any(outside):
                width = interval.width
                shifted = x - interval.lower
                flips = np.floor(shifted / width).astype(np.int64)
                folded = np.mod(shifted, 2.0 * width)
                folded = np.where(folded > width, 2.0 * width - folded, folded)
                q[..., k] = interval.lower + folded
                p[..., k] = np.where(flips % 2 != 0, -p[..., k], p[..., k])
                if stats is not None:
                    stats.tally('reflections', int(np.count_nonzero(outside)))
    return q, p


def _euler_step(field, q, p, dt):
    qdot, pdot = field(q, p)
    return q + dt * qdot, p + dt * pdot


def _rk4_step(field, q, p, dt):
    k1q, k1p = field(q, p)
    k2q, k2p = field(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p)
    k3q, k3p = field(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p)
    k4q, k4p = field(q + dt * k3q, p + dt * k3p)
    return (q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q),
            p + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p))


STEPPERS = {
    EULER: _euler_step,
    RK4: _rk4_step,
}


def flow_batch(field, q0, p0, spec, domain=None, stats=None):
    """
    Integrate every row of (q0, p0) for `spec.duration` model time units.
    A trajectory that leaves a truncated coordinate is frozen where it
    left; it ends outside the domain and counts as lost.

    :returns: (qT, pT) arrays of the input shape.
    """
    q = np.array(q0, dtype=float, copy=True)
    p = np.array(p0, dtype=float, copy=True)
    if spec.duration == 0.0:
        return q, p
    shape = q.shape
    q = q.reshape(-1, shape[-1])
    p = p.reshape(-1, shape[-1])
    step = STEPPERS[spec.scheme]
    dt = spec.dt
    truncated = np.zeros(shape[-1], dtype=bool)
    if domain is not None:
        truncated = np.array([iv.boundary == TRUNCATED for iv in domain])
        lower = np.array([iv.lower for iv in domain])
        upper = np.array([iv.upper for iv in domain])
    active = np.arange(q.shape[0])
    for n in range(spec.steps):
        if active.size == 0:
            break
        qa, pa = step(field, q[active], p[active], dt)
        if domain is not None:
            qa, pa = apply_boundaries(qa, pa, domain, stats)
        if not (np.all(np.isfinite(qa)) and np.all(np.isfinite(pa))):
            raise BlowUpError("Non-finite state after step %d of %d" % (n + 1, spec.steps), step=n + 1)
        q[active] = qa
        p[active] = pa
        if truncated.any():
            left = np.any(((qa < lower) | (qa > upper)) & truncated, axis=-1)
            if left.any():
                if stats is not None:
                    stats.tally('left_domain', int(np.count_nonzero(left)))
                active = active[~left]
    if stats is not None:
        stats.tally('trajectories', q.shape[0])
    return q.reshape(shape), p.reshape(shape)


def flow(field, z0, spec, domain=None):
    """Approximate Phi^T(z0) for a single PhaseState."""
    q, p = flow_batch(field, z0.q, z0.p, spec, domain)
    return PhaseState(q, p)

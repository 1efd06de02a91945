# coding: utf8

"""
Hamiltonian models in internal coordinates.

Every model function is batched: `q` and `p` may carry any number of
leading axes, the last axis is the coordinate index.  The module level
`eval_*` functions are the checked entry points; the model methods
themselves do no domain checking so that the integrator can call them in
its inner loop.
"""
import math
from dataclasses import dataclass

import numpy as np

from mfto.conf import Units
from mfto.core.Errors import (
    BoundaryError,
    ConfigError,
    DomainError,
    EvaluationError,
    LayoutError,
    ModelConsistencyError,
)

PERIODIC = 'periodic'
REFLECTING = 'reflecting'
TRUNCATED = 'unbounded-truncated'

BOUNDARY_KINDS = (PERIODIC, REFLECTING, TRUNCATED)

# Step for the central differences of M(q)
MASS_DERIVATIVE_STEP = 1e-6


@dataclass(frozen=True)
class Interval(object):
    lower: float
    upper: float
    boundary: str = TRUNCATED

    def __post_init__(self):
        if not self.upper > self.lower:
            raise LayoutError("Empty interval [%r, %r]" % (self.lower, self.upper))
        if self.boundary not in BOUNDARY_KINDS:
            raise LayoutError("Unknown boundary kind %r" % (self.boundary,))

    @property
    def width(self):
        return self.upper - self.lower


@dataclass(frozen=True)
class PhaseState(object):
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.shape != p.shape or q.ndim != 1:
            raise DomainError("q and p must be vectors of equal length, got %s and %s" % (q.shape, p.shape))
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise DomainError("Phase state has non-finite components", q=q)
        object.__setattr__(self, 'q', q)
        object.__setattr__(self, 'p', p)

    @property
    def d(self):
        return self.q.shape[0]


@dataclass(frozen=True)
class SubsystemLayout(object):
    """
    Ordered, contiguous blocks of coordinate indices.  Block `i` is the
    half-open range `blocks[i] = (start, stop)`.
    """
    blocks: tuple

    def __post_init__(self):
        blocks = tuple((int(a), int(b)) for a, b in self.blocks)
        if not blocks:
            raise LayoutError("A layout needs at least one block")
        expected = 0
        for start, stop in blocks:
            if start != expected or stop <= start:
                raise LayoutError("Blocks must be contiguous and non-empty: %r" % (blocks,))
            expected = stop
        object.__setattr__(self, 'blocks', blocks)

    @classmethod
    def from_sizes(cls, sizes):
        blocks = []
        start = 0
        for size in sizes:
            blocks.append((start, start + int(size)))
            start += int(size)
        return cls(tuple(blocks))

    @classmethod
    def per_coordinate(cls, d):
        return cls.from_sizes([1] * d)

    @property
    def n(self):
        return len(self.blocks)

    @property
    def d(self):
        return self.blocks[-1][1]

    @property
    def sizes(self):
        return tuple(stop - start for start, stop in self.blocks)

    def indices(self, i):
        start, stop = self.blocks[i]
        return np.arange(start, stop)

    def complement(self, i):
        """Coordinate indices of every block except `i` (the hatted variables)."""
        mask = np.ones(self.d, dtype=bool)
        mask[self.indices(i)] = False
        return np.nonzero(mask)[0]

    def check_model(self, d):
        if self.d != d:
            raise LayoutError("Layout covers %d coordinates, model has %d" % (self.d, d))


class HamiltonianModel(object):
    """
    H(q, p) = 1/2 p.M(q)^-1 p + V(q) on a box domain.

    Subclasses provide `potential`, `mass_matrix` and usually an analytic
    `potential_gradient`.  `separable_terms` may describe V as a sum of
    products of one-coordinate factors.
    """

    name = 'abstract'
    dimension = None
    constant_mass = False

    # Length of one model time unit in seconds
    time_unit = 1.0

    def __init__(self, domain, layout):
        self.domain = tuple(domain)
        self.d = len(self.domain)
        layout.check_model(self.d)
        self.layout = layout
        self.lower = np.array([iv.lower for iv in self.domain])
        self.upper = np.array([iv.upper for iv in self.domain])
        self.boundaries = tuple(iv.boundary for iv in self.domain)

    def potential(self, q):
        raise NotImplementedError

    def mass_matrix(self, q):
        raise NotImplementedError

    def potential_gradient(self, q):
        q = np.asarray(q, dtype=float)
        grad = np.empty_like(q)
        h = 1e-6
        for k in range(self.d):
            step = np.zeros(self.d)
            step[k] = h
            grad[..., k] = (self.potential(q + step) - self.potential(q - step)) / (2 * h)
        return grad

    def mass_matrix_derivative(self, q):
        """dM/dq_k stacked on axis -3, by central differences."""
        q = np.asarray(q, dtype=float)
        h = MASS_DERIVATIVE_STEP
        out = np.empty(q.shape[:-1] + (self.d, self.d, self.d))
        for k in range(self.d):
            step = np.zeros(self.d)
            step[k] = h
            out[..., k, :, :] = (self.mass_matrix(q + step) - self.mass_matrix(q - step)) / (2 * h)
        return out

    def energy(self, q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        velocity = np.linalg.solve(self.mass_matrix(q), p[..., None])[..., 0]
        return 0.5 * np.sum(p * velocity, axis=-1) + self.potential(q)

    def phase_velocity(self, q, p):
        """
        Hamilton's equations: returns (dH/dp, -dH/dq).

        The kinetic contribution to -dH/dq_k is
        +1/2 v.(dM/dq_k).v with v = M^-1 p.
        """
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        qdot = np.linalg.solve(self.mass_matrix(q), p[..., None])[..., 0]
        pdot = -self.potential_gradient(q)
        if not self.constant_mass:
            dM = self.mass_matrix_derivative(q)
            pdot = pdot + 0.5 * np.einsum('...i,...kij,...j->...k', qdot, dM, qdot)
        return qdot, pdot

    def separable_terms(self):
        """
        V(q) = sum_t weight_t * prod_c f_{t,c}(q_c), or None if the model
        does not declare such a decomposition.  A factor of None is 1.
        """
        return None

    def in_domain(self, q):
        q = np.asarray(q, dtype=float)
        return np.all((q >= self.lower) & (q <= self.upper), axis=-1)

    def describe(self):
        return {'model': self.name}


class DoubleWell2D(HamiltonianModel):
    """
    V(q1, q2) = V1(q1) * V2(q2) with the two quartics

        V1(x) = 3/2 x^4 + 1/4 x^3 - 3 x^2 - 3/4 x + 3
        V2(y) = 2 y^4 - 4 y^2 + alpha

    `coupling` scales the interaction part of the split
    V1 c2 + c1 V2 - c1 c2 + coupling (V1 - c1)(V2 - c2); at coupling 1 this
    is V1 V2, at coupling 0 the model does not interact.
    """

    name = 'double_well_2d'
    dimension = 2
    constant_mass = True

    def __init__(self, alpha=3.0, m1=1.0, m2=1.0, coupling=1.0, split_reference=(1.0, 1.0),
                 half_width=2.0, layout=None):
        self.alpha = float(alpha)
        self.m1 = float(m1)
        self.m2 = float(m2)
        self.coupling = float(coupling)
        self.split_reference = tuple(float(c) for c in split_reference)
        self.half_width = float(half_width)
        domain = (
            Interval(-self.half_width, self.half_width, TRUNCATED),
            Interval(-self.half_width, self.half_width, TRUNCATED),
        )
        super(DoubleWell2D, self).__init__(domain, layout or SubsystemLayout.per_coordinate(2))
        self._mass = np.diag([self.m1, self.m2])

    @staticmethod
    def v1(x):
        return 1.5 * x ** 4 + 0.25 * x ** 3 - 3.0 * x ** 2 - 0.75 * x + 3.0

    @staticmethod
    def dv1(x):
        return 6.0 * x ** 3 + 0.75 * x ** 2 - 6.0 * x - 0.75

    def v2(self, y):
        return 2.0 * y ** 4 - 4.0 * y ** 2 + self.alpha

    @staticmethod
    def dv2(y):
        return 8.0 * y ** 3 - 8.0 * y

    def potential(self, q):
        q = np.asarray(q, dtype=float)
        a = self.v1(q[..., 0])
        b = self.v2(q[..., 1])
        if self.coupling == 1.0:
            return a * b
        c1, c2 = self.split_reference
        return a * c2 + c1 * b - c1 * c2 + self.coupling * (a - c1) * (b - c2)

    def potential_gradient(self, q):
        q = np.asarray(q, dtype=float)
        a, da = self.v1(q[..., 0]), self.dv1(q[..., 0])
        b, db = self.v2(q[..., 1]), self.dv2(q[..., 1])
        if self.coupling == 1.0:
            return np.stack([da * b, a * db], axis=-1)
        c1, c2 = self.split_reference
        g1 = da * c2 + self.coupling * da * (b - c2)
        g2 = c1 * db + self.coupling * (a - c1) * db
        return np.stack([g1, g2], axis=-1)

    def mass_matrix(self, q):
        q = np.asarray(q, dtype=float)
        return np.broadcast_to(self._mass, q.shape[:-1] + (2, 2)).copy()

    def mass_matrix_derivative(self, q):
        q = np.asarray(q, dtype=float)
        return np.zeros(q.shape[:-1] + (2, 2, 2))

    def separable_terms(self):
        if self.coupling == 1.0:
            return [(1.0, (self.v1, self.v2))]
        c1, c2 = self.split_reference
        eps = self.coupling
        return [
            (c2, (self.v1, None)),
            (c1, (None, self.v2)),
            (-c1 * c2, (None, None)),
            (eps, (lambda x: self.v1(x) - c1, lambda y: self.v2(y) - c2)),
        ]

    def describe(self):
        return {
            'model': self.name,
            'alpha': self.alpha,
            'm1': self.m1,
            'm2': self.m2,
            'coupling': self.coupling,
            'split_reference': list(self.split_reference),
            'half_width': self.half_width,
        }


class ButaneModel(HamiltonianModel):
    """
    United-atom n-butane CH3-CH2-CH2-CH3 with rigid bonds, configuration
    q = (theta1, theta2, phi).  Internal units: nm, ps, g/mol, kJ/mol.
    """

    name = 'butane_ua'
    dimension = 3
    time_unit = 1.0e-12

    def __init__(self, k_theta=65.0, theta0_deg=109.47, k_phi=8.314,
                 torsion=(1.116, -1.462, -1.578, 0.368, 3.156, 3.788),
                 r0=0.153, proton_mass_g=Units.PROTON_MASS_G, layout=None):
        self.k_theta = float(k_theta)
        self.theta0 = math.radians(theta0_deg)
        self.k_phi = float(k_phi)
        self.torsion = tuple(float(c) for c in torsion)
        self.r0 = float(r0)
        self.proton_mass_g = float(proton_mass_g)
        m_p = self.proton_mass_g * Units.GRAMS_TO_G_PER_MOL
        self.m1 = 14.0 * m_p
        self.m2 = 15.0 * m_p
        # CH3, CH2, CH2, CH3
        self.atom_masses = np.array([self.m2, self.m1, self.m1, self.m2])
        domain = (
            Interval(0.0, math.pi, REFLECTING),
            Interval(0.0, math.pi, REFLECTING),
            Interval(0.0, 2.0 * math.pi, PERIODIC),
        )
        super(ButaneModel, self).__init__(domain, layout or SubsystemLayout.per_coordinate(3))
        self._cart_mass = np.repeat(self.atom_masses, 3)

    def bond_angle_potential(self, theta):
        return -self.k_theta * (np.cos(theta - self.theta0) - 1.0)

    def bond_angle_derivative(self, theta):
        return self.k_theta * np.sin(theta - self.theta0)

    def torsion_potential(self, phi):
        return self.k_phi * np.polynomial.polynomial.polyval(np.cos(phi), self.torsion)

    def torsion_derivative(self, phi):
        dpoly = np.polynomial.polynomial.polyder(self.torsion)
        return -self.k_phi * np.sin(phi) * np.polynomial.polynomial.polyval(np.cos(phi), dpoly)

    def potential(self, q):
        q = np.asarray(q, dtype=float)
        return (self.bond_angle_potential(q[..., 0])
                + self.bond_angle_potential(q[..., 1])
                + self.torsion_potential(q[..., 2]))

    def potential_gradient(self, q):
        q = np.asarray(q, dtype=float)
        return np.stack([
            self.bond_angle_derivative(q[..., 0]),
            self.bond_angle_derivative(q[..., 1]),
            self.torsion_derivative(q[..., 2]),
        ], axis=-1)

    def embedding(self, q):
        """
        Z-matrix placement followed by centre-of-mass removal.

        Atom 2 at the origin, atom 3 on +x, atom 1 in the xy-plane at angle
        theta1 to the 2->3 bond, atom 4 from atom 3 with angle theta2 and
        dihedral phi (phi = 0 is cis).  Returns positions (..., 4, 3) and
        the Jacobian (..., 12, 3).
        """
        q = np.asarray(q, dtype=float)
        t1, t2, phi = q[..., 0], q[..., 1], q[..., 2]
        r0 = self.r0
        zero = np.zeros_like(t1)
        s2, c2 = np.sin(t2), np.cos(t2)
        sp, cp = np.sin(phi), np.cos(phi)

        r1 = r0 * np.stack([np.cos(t1), np.sin(t1), zero], axis=-1)
        r2 = np.stack([zero, zero, zero], axis=-1)
        r3 = np.stack([zero + r0, zero, zero], axis=-1)
        r4 = r3 + r0 * np.stack([-c2, s2 * cp, s2 * sp], axis=-1)
        positions = np.stack([r1, r2, r3, r4], axis=-2)

        jac = np.zeros(q.shape[:-1] + (4, 3, 3))
        jac[..., 0, :, 0] = r0 * np.stack([-np.sin(t1), np.cos(t1), zero], axis=-1)
        jac[..., 3, :, 1] = r0 * np.stack([s2, c2 * cp, c2 * sp], axis=-1)
        jac[..., 3, :, 2] = r0 * np.stack([zero, -s2 * sp, s2 * cp], axis=-1)

        weights = self.atom_masses / self.atom_masses.sum()
        com = np.einsum('a,...ax->...x', weights, positions)
        positions = positions - com[..., None, :]
        jac_com = np.einsum('a,...axk->...xk', weights, jac)
        jac = jac - jac_com[..., None, :, :]
        return positions, jac.reshape(q.shape[:-1] + (12, 3))

    def mass_matrix(self, q):
        _, jac = self.embedding(q)
        return np.einsum('...ai,a,...aj->...ij', jac, self._cart_mass, jac)

    def separable_terms(self):
        return [
            (1.0, (self.bond_angle_potential, None, None)),
            (1.0, (None, self.bond_angle_potential, None)),
            (1.0, (None, None, self.torsion_potential)),
        ]

    def describe(self):
        return {
            'model': self.name,
            'k_theta': self.k_theta,
            'theta0_deg': math.degrees(self.theta0),
            'k_phi': self.k_phi,
            'torsion': list(self.torsion),
            'r0': self.r0,
            'proton_mass_g': self.proton_mass_g,
        }


MODELS = {
    DoubleWell2D.name: DoubleWell2D,
    ButaneModel.name: ButaneModel,
}


def build_model(params, layout=None):
    """Instantiate a model from a parameter dict with a 'model' key."""
    params = dict(params)
    name = params.pop('model')
    if name not in MODELS:
        raise LayoutError("Unknown model %r" % (name,))
    try:
        return MODELS[name](layout=layout, **params)
    except TypeError as e:
        raise ConfigError("Bad parameters for model %s: %s" % (name, e))


def _check_config(model, q):
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != model.d:
        raise DomainError("Expected %d coordinates, got %d" % (model.d, q.shape[-1]), q=q)
    if not np.all(model.in_domain(q)):
        raise DomainError("Configuration outside the model domain", q=q)
    return q


def eval_potential(model, q):
    q = _check_config(model, q)
    return model.potential(q)


def eval_mass_matrix(model, q):
    q = _check_config(model, q)
    M = model.mass_matrix(q)
    scale = np.max(np.abs(M), axis=(-2, -1), keepdims=True)
    if np.any(np.abs(M - np.swapaxes(M, -1, -2)) > 1e-12 * scale):
        raise ModelConsistencyError("Mass matrix is not symmetric", q=q)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ModelConsistencyError("Mass matrix is not positive definite", q=q)
    return M


def eval_vector_field(model, z):
    """f(z) = (dH/dp, -dH/dq) for a single PhaseState, as one 2d vector."""
    _check_config(model, z.q)
    qdot, pdot = model.phase_velocity(z.q, z.p)
    out = np.concatenate([qdot, pdot])
    bad = np.nonzero(~np.isfinite(out))[0]
    if bad.size:
        raise EvaluationError("Non-finite vector field component %d" % bad[0], component=int(bad[0]))
    return out


def cartesian_embedding(model, q):
    """Cartesian positions (4, 3) and Jacobian (12, 3) of a butane configuration."""
    q = _check_config(model, q)
    if np.any(np.isin(q[..., :2], (0.0, math.pi))):
        raise BoundaryError("Bond angle on the singular boundary 0 or pi: %r" % (q,))
    return model.embedding(q)

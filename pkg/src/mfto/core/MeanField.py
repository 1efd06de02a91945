# coding: utf8

"""
Mean-field (statistical independence) approximation of the transfer
operator.

The full phase-space density is replaced by a product of subsystem
densities.  Each subsystem then moves in the Hamiltonian averaged over
the others; its spatial transfer operator with the other factors held
fixed is linear, and the self-consistent product is found by sweeping
over the subsystems one at a time.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from mfto.conf.Settings import Settings
from mfto.core.Errors import (
    AssemblyError,
    EffectiveModelError,
    ExtrapolationError,
    LayoutError,
    SpectralError,
)
from mfto.core.Integrator import IntegratorSpec, flow_batch
from mfto.core.Models import PERIODIC
from mfto.core.Partition import TensorPartition
from mfto.core.Sampling import COMPONENT_STREAM, boltzmann_position_density
from mfto.core.Spectral import dominant_eigs, perron_vector, sign_normalize
from mfto.core.Transport import PhaseGrid, grid_interpolator, transport
from mfto.core.Ulam import assemble_from_sampler

logger = logging.getLogger(__name__)

DENSITY = 'density'
EIGENFUNCTION = 'eigenfunction'

FROZEN = 'frozen'
CO_EVOLVED = 'co-evolved'

FORWARD = 'forward'
REVERSE = 'reverse'

# Step for derivatives of separable potential factors at query points
FACTOR_DERIVATIVE_STEP = 1e-6


###############################################################################
# Densities and factors
###############################################################################

@dataclass
class SpatialFactor(object):
    """
    A function on the q_i grid stored as one value per cell.  Densities are
    stored as cell masses (nonnegative, summing to one); eigenfunctions as
    unit 2-norm vectors in the same representation as Ulam eigenvectors.
    """
    index: int
    part: TensorPartition
    values: np.ndarray
    kind: str = DENSITY
    eigenvalue: complex = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size != self.part.n:
            raise LayoutError("Factor has %d values for %d cells" % (self.values.size, self.part.n))
        if self.kind not in (DENSITY, EIGENFUNCTION):
            raise LayoutError("Unknown factor kind %r" % (self.kind,))

    def normalized(self):
        if self.kind == DENSITY:
            values = np.clip(self.values, 0.0, None)
            total = values.sum()
            if total <= 0:
                raise AssemblyError("Density factor %d has no mass" % self.index)
            values = values / total
        else:
            values = sign_normalize(self.values)
        return SpatialFactor(self.index, self.part, values, self.kind, self.eigenvalue)

    def density(self):
        """Values per unit configuration volume."""
        return self.values / self.part.cell_volume


@dataclass
class SubsystemDensity(object):
    """Density on the phase grid of subsystem `index`, values per unit phase volume."""
    index: int
    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if np.any(self.values < 0):
            raise AssemblyError("Subsystem density %d has negative values" % self.index)

    def mass(self):
        return self.grid.mass(self.values)

    def normalized(self):
        return SubsystemDensity(self.index, self.grid, self.values / self.mass())

    def spatial_factor(self):
        p_axes = tuple(range(self.grid.d, 2 * self.grid.d))
        masses = self.values.sum(axis=p_axes) * self.grid.cell_volume
        return SpatialFactor(self.index, self.grid.q_part, masses.ravel(), DENSITY)


@dataclass
class FullPhaseDensity(object):
    """Density on the product phase grid, axes (q_1..q_d, p_1..p_d)."""
    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)

    def mass(self):
        return self.grid.mass(self.values)


def _sub_partition(part, indices):
    return TensorPartition([part.intervals[k] for k in indices], [part.counts[k] for k in indices])


def subsystem_grid(full_grid, layout, i):
    idx = layout.indices(i)
    return PhaseGrid(_sub_partition(full_grid.q_part, idx), _sub_partition(full_grid.p_part, idx))


def product_density(densities, layout, full_grid):
    """Outer product of the subsystem densities on the product phase grid."""
    d = layout.d
    values = np.ones(full_grid.shape)
    for u in densities:
        idx = layout.indices(u.index)
        shape = [1] * (2 * d)
        for k in idx:
            shape[k] = full_grid.shape[k]
            shape[d + k] = full_grid.shape[d + k]
        if tuple(s for s in shape if s != 1) != tuple(n for n in u.values.shape if n != 1):
            raise LayoutError("Subsystem %d grid does not fit the product grid" % u.index)
        values = values * u.values.reshape(shape)
    return FullPhaseDensity(full_grid, values)


def reduce_marginal(full, layout, i):
    """Marginal of a product-grid density over every coordinate outside block i."""
    d = layout.d
    idx = layout.indices(i)
    keep = set(idx.tolist()) | set((d + idx).tolist())
    drop = tuple(k for k in range(2 * d) if k not in keep)
    widths = np.concatenate([full.grid.q_part.widths, full.grid.p_part.widths])
    values = full.values.sum(axis=drop) * float(np.prod(widths[list(drop)])) if drop else full.values.copy()
    return SubsystemDensity(i, subsystem_grid(full.grid, layout, i), values)


###############################################################################
# Moments of the frozen subsystems
###############################################################################

@dataclass
class SubsystemMoments(object):
    """
    Per q_j node: probability mass, conditional mean momentum and
    conditional second moment E[p p^T | q_j].
    """
    index: int
    part: TensorPartition
    weights: np.ndarray
    mean: np.ndarray
    second: np.ndarray


def moments_from_density(u):
    grid = u.grid
    d = grid.d
    n = grid.q_part.n
    values = u.values.reshape(n, -1) * grid.cell_volume
    _, p_nodes = grid.nodes()
    p_nodes = p_nodes.reshape(n, -1, d)
    weights = values.sum(axis=1)
    safe = np.where(weights > 0, weights, 1.0)
    mean = np.einsum('nk,nka->na', values, p_nodes) / safe[:, None]
    second = np.einsum('nk,nka,nkb->nab', values, p_nodes, p_nodes) / safe[:, None, None]
    return SubsystemMoments(u.index, grid.q_part, weights, mean, second)


def moments_from_factor(w, inertia, beta):
    """
    Lift a spatial factor with h_j(q_j, .) = N(0, inertia(q_j)/beta): zero
    mean, second moment inertia/beta.
    """
    w = w.normalized()
    d = w.part.d
    return SubsystemMoments(w.index, w.part, w.values, np.zeros((w.part.n, d)), np.asarray(inertia) / beta)


def subsystem_moments(source, inertia=None, beta=None):
    """Moments of a gridded phase-space density, or of a spatial factor lifted with its momentum law."""
    if isinstance(source, SubsystemDensity):
        return moments_from_density(source)
    if inertia is None or beta is None:
        raise LayoutError("Lifting spatial factor %d needs its reference inertia and beta" % source.index)
    return moments_from_factor(source, inertia, beta)


###############################################################################
# Effective Hamiltonian
###############################################################################

def _other_nodes(layout, moments, i):
    """Product of the other subsystems' nodes: coordinates (N, d_hat), weights (N,)."""
    others = [m for m in moments if m.index != i]
    others.sort(key=lambda m: m.index)
    if not others:
        return others, np.zeros((1, 0)), np.ones(1), np.zeros((1, 0)), np.zeros((1, 0, 0))
    counts = [m.part.n for m in others]
    grid = np.indices(counts).reshape(len(counts), -1)
    coords, weights, means = [], np.ones(grid.shape[1]), []
    sizes = [m.part.d for m in others]
    d_hat = sum(sizes)
    second = np.zeros((grid.shape[1], d_hat, d_hat))
    offset = 0
    for m, sel, size in zip(others, grid, sizes):
        coords.append(m.part.centers()[sel])
        weights = weights * m.weights[sel]
        means.append(m.mean[sel])
        second[:, offset:offset + size, offset:offset + size] = m.second[sel]
        offset += size
    coords = np.concatenate(coords, axis=-1)
    means = np.concatenate(means, axis=-1)
    # Independent subsystems: off-diagonal blocks are products of means
    offset_a = 0
    for a, size_a in enumerate(sizes):
        offset_b = 0
        for b, size_b in enumerate(sizes):
            if a != b:
                second[:, offset_a:offset_a + size_a, offset_b:offset_b + size_b] = np.einsum(
                    'na,nb->nab', means[:, offset_a:offset_a + size_a], means[:, offset_b:offset_b + size_b])
            offset_b += size_b
        offset_a += size_a
    return others, coords, weights, means, second


def _block_factor(term_factors, layout, j):
    start, stop = layout.blocks[j]
    factors = term_factors[start:stop]

    def evaluate(qj):
        qj = np.asarray(qj, dtype=float)
        out = np.ones(qj.shape[:-1])
        for c, f in enumerate(factors):
            if f is not None:
                out = out * f(qj[..., c])
        return out
    return evaluate


class EffectiveHamiltonianTable(object):
    """
    H_i(q_i, p_i) = 1/2 p_i.A(q_i) p_i + b(q_i).p_i + c(q_i) + U(q_i)
    tabulated on the cell midpoints of `part`.  U is either tabulated or,
    for models with a separable potential, kept as `terms`: pairs of a
    scalar coefficient and a block factor evaluated at query points.
    """

    def __init__(self, index, part, A, b, c, U=None, terms=None):
        self.index = index
        self.part = part
        self.d = part.d
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.U = None if U is None else np.asarray(U, dtype=float)
        self.terms = terms
        for node in range(part.n):
            try:
                np.linalg.cholesky(self.A[node])
            except np.linalg.LinAlgError:
                raise EffectiveModelError("Averaged inverse inertia not positive definite at node %d" % node,
                                          node=node)
        self._periodic = [iv.boundary == PERIODIC for iv in part.intervals]
        self._interp = self._build_interpolator()

    def _features(self):
        n, d = self.part.n, self.d
        scalar = self.c if self.U is None else self.c + self.U
        return np.concatenate([self.A.reshape(n, d * d), self.b, scalar[:, None]], axis=1)

    def _build_interpolator(self):
        shape = tuple(self.part.shape)
        feats = self._features()
        F = feats.shape[1]
        grid_feats = feats.reshape(shape + (F,))
        derivs = []
        for k in range(self.d):
            h = self.part.widths[k]
            if shape[k] == 1:
                derivs.append(np.zeros_like(grid_feats))
            elif self._periodic[k]:
                derivs.append((np.roll(grid_feats, -1, axis=k) - np.roll(grid_feats, 1, axis=k)) / (2 * h))
            else:
                derivs.append(np.gradient(grid_feats, h, axis=k, edge_order=1))
        stacked = np.concatenate([grid_feats] + derivs, axis=-1)
        axes = [self.part.axis_centers(k) for k in range(self.d)]
        return grid_interpolator(axes, stacked, self._periodic, fill_value=None)

    def _prepare(self, q, strict):
        q = np.array(q, dtype=float, copy=True)
        lower, upper = self.part.lower, self.part.upper
        for k in range(self.d):
            if self._periodic[k]:
                q[..., k] = lower[k] + np.mod(q[..., k] - lower[k], upper[k] - lower[k])
            else:
                if strict and np.any((q[..., k] < lower[k]) | (q[..., k] > upper[k])):
                    raise ExtrapolationError("Query outside the table range on coordinate %d of subsystem %d"
                                             % (k, self.index))
                first = self.part.axis_centers(k)[0]
                last = self.part.axis_centers(k)[-1]
                q[..., k] = np.clip(q[..., k], first, last)
        return q

    def _evaluate(self, q, strict):
        d = self.d
        flat = self._prepare(q, strict).reshape(-1, d)
        out = self._interp(flat)
        F = d * d + d + 1
        values, derivs = out[:, :F], out[:, F:].reshape(-1, d, F)
        A = values[:, :d * d].reshape(-1, d, d)
        b = values[:, d * d:d * d + d]
        g = values[:, -1]
        dA = derivs[:, :, :d * d].reshape(-1, d, d, d)
        db = derivs[:, :, d * d:d * d + d]
        dg = derivs[:, :, -1]
        if self.terms is not None:
            qq = np.asarray(q, dtype=float).reshape(-1, d)
            for coefficient, factor in self.terms:
                g = g + coefficient * factor(qq)
                for k in range(d):
                    step = np.zeros(d)
                    step[k] = FACTOR_DERIVATIVE_STEP
                    dg[:, k] += coefficient * (factor(qq + step) - factor(qq - step)) / (2 * FACTOR_DERIVATIVE_STEP)
        return A, b, g, dA, db, dg

    def inertia_inverse(self, q, strict=False):
        """A(q): the effective inverse inertia at arbitrary q_i."""
        q = np.asarray(q, dtype=float)
        A = self._evaluate(q, strict)[0]
        return A.reshape(q.shape[:-1] + (self.d, self.d))

    def energy(self, q, p, strict=False):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float).reshape(-1, self.d)
        A, b, g, _, _, _ = self._evaluate(q, strict)
        out = 0.5 * np.einsum('na,nab,nb->n', p, A, p) + np.einsum('na,na->n', b, p) + g
        return out.reshape(q.shape[:-1])

    def field(self, strict=False):
        """The mean-field phase velocity as an integrator field."""
        def velocity(q, p):
            q = np.asarray(q, dtype=float)
            shape = q.shape
            pp = np.asarray(p, dtype=float).reshape(-1, self.d)
            A, b, _, dA, db, dg = self._evaluate(q, strict)
            qdot = np.einsum('nab,nb->na', A, pp) + b
            pdot = -(0.5 * np.einsum('na,nkab,nb->nk', pp, dA, pp) + np.einsum('nka,na->nk', db, pp) + dg)
            return qdot.reshape(shape), pdot.reshape(shape)
        return velocity


def effective_hamiltonian(model, layout, moments, i, part_i, use_separable=True):
    """
    Average H over the frozen subsystems j != i by midpoint quadrature on
    their grids.  `moments` lists SubsystemMoments for (at least) every
    j != i.
    """
    layout.check_model(model.d)
    I = layout.indices(i)
    H = layout.complement(i)
    others, q_hat, W, mean_hat, second_hat = _other_nodes(layout, moments, i)
    nodes = part_i.centers()
    n_i, N = nodes.shape[0], W.shape[0]

    q = np.empty((n_i, N, model.d))
    q[:, :, I] = nodes[:, None, :]
    if H.size:
        q[:, :, H] = q_hat[None, :, :]

    if model.constant_mass:
        Minv = np.broadcast_to(np.linalg.inv(model.mass_matrix(q[0, 0])), (n_i, N, model.d, model.d))
    else:
        Minv = np.linalg.inv(model.mass_matrix(q))

    A = np.einsum('n,mnab->mab', W, Minv[:, :, I[:, None], I[None, :]])
    b = np.einsum('n,mnah,nh->ma', W, Minv[:, :, I[:, None], H[None, :]], mean_hat)
    c = 0.5 * np.einsum('n,mngh,nhg->m', W, Minv[:, :, H[:, None], H[None, :]], second_hat)

    terms = model.separable_terms() if use_separable else None
    if terms is not None:
        reduced = []
        for weight, factors in terms:
            coefficient = weight
            for m in others:
                coefficient *= float(np.dot(m.weights, _block_factor(factors, layout, m.index)(m.part.centers())))
            reduced.append((coefficient, _block_factor(factors, layout, i)))
        return EffectiveHamiltonianTable(i, part_i, A, b, c, terms=reduced)

    U = np.einsum('n,mn->m', W, model.potential(q))
    return EffectiveHamiltonianTable(i, part_i, A, b, c, U=U)


def mean_field_vector_field(table, z):
    """(dH_i/dp_i, -dH_i/dq_i) at a subsystem PhaseState, strictly inside the table range."""
    qdot, pdot = table.field(strict=True)(z.q[None, :], z.p[None, :])
    return np.concatenate([qdot[0], pdot[0]])


###############################################################################
# Reference factors
###############################################################################

def boltzmann_factors(ens, layout, parts):
    """
    Marginals of the spatial Boltzmann weight on each subsystem grid.  For
    a decoupled potential these are exactly C_i exp(-beta V_i(q_i)).
    """
    model = ens.model
    full = TensorPartition([iv for part in parts for iv in part.intervals],
                           [c for part in parts for c in part.counts])
    centers = full.centers()
    V = model.potential(centers)
    weights = boltzmann_position_density(ens, centers, shift=float(V.min())).reshape(full.shape)
    factors = []
    for i, part in enumerate(parts):
        idx = layout.indices(i)
        drop = tuple(k for k in range(model.d) if k not in set(idx.tolist()))
        marginal = weights.sum(axis=drop) if drop else weights
        factors.append(SpatialFactor(i, part, marginal.ravel(), DENSITY).normalized())
    return factors


def reference_inertia(ens, layout, parts, factors=None):
    """
    Per subsystem j, the inertia of the momentum lift: the inverse of the jj
    block of M(q)^-1 averaged over the reference factors of the others.
    Computed once, independently of the iterated factors.
    """
    model = ens.model
    factors = factors or boltzmann_factors(ens, layout, parts)
    inertia = []
    for j, part in enumerate(parts):
        d_j = part.d
        moments = [SubsystemMoments(f.index, f.part, f.values, np.zeros((f.part.n, f.part.d)),
                                    np.zeros((f.part.n, f.part.d, f.part.d)))
                   for f in factors if f.index != j]
        table = effective_hamiltonian(model, layout, moments, j, part, use_separable=False)
        inertia.append(np.linalg.inv(table.A).reshape(part.n, d_j, d_j))
    return inertia


###############################################################################
# Mean-field evolution
###############################################################################

def _renormalize(densities, context):
    out = []
    worst = 0.0
    for u in densities:
        mass = u.mass()
        worst = max(worst, abs(mass - 1.0))
        if mass <= 0:
            raise AssemblyError("Density %d lost all its mass during %s" % (u.index, context))
        out.append(SubsystemDensity(u.index, u.grid, u.values / mass))
    if worst > Settings.MASS_DRIFT_TOLERANCE:
        logger.warning('Mass drift %.3g during %s; densities renormalised', worst, context)
    return out


def evolve_mean_field(model, layout, densities, spec, coupling=FROZEN, substeps=1, stats=None, initial=None):
    """
    Transport every subsystem density by its mean-field field over spec.T.

    `frozen` builds the effective Hamiltonians once from the initial
    densities.  `co-evolved` rebuilds them at the start of each of
    `substeps` equal substeps from the densities reached so far.  Grid
    nodes are traced back through the piecewise frozen history and the
    initial density is interpolated once.  `initial`, one closed-form
    density `(q, p) -> values` per subsystem in the order of `densities`,
    replaces that interpolation.
    """
    densities = [u.normalized() for u in densities]
    if spec.duration == 0.0:
        return densities
    if coupling == FROZEN:
        substeps = 1
    elif coupling != CO_EVOLVED:
        raise AssemblyError("Unknown coupling %r" % (coupling,))
    substeps = int(substeps)
    if substeps < 1:
        raise AssemblyError("substeps must be positive")
    if initial is not None and len(initial) != len(densities):
        raise LayoutError("%d closed-form densities for %d subsystems" % (len(initial), len(densities)))
    delta = spec.duration / substeps
    segment = IntegratorSpec(spec.scheme, max(1, int(math.ceil(spec.steps / float(substeps)))),
                             delta * spec.time_unit, spec.time_unit)
    history = [[] for _ in densities]
    current = densities
    for s in range(substeps):
        moments = [subsystem_moments(u) for u in current]
        for k, u in enumerate(densities):
            table = effective_hamiltonian(model, layout, moments, u.index, u.grid.q_part)
            history[k].append(table.field(strict=False))
        current = [
            SubsystemDensity(u.index, u.grid,
                             transport(u.grid, u.values, history[k], [delta] * (s + 1), segment, stats,
                                       initial[k] if initial is not None else None))
            for k, u in enumerate(densities)
        ]
        current = _renormalize(current, 'mean-field evolution')
    return current


def evolve_full_liouville(model, full, spec, stats=None, initial=None):
    """
    Product-grid solution of the full Liouville equation (the reference for
    mean-field errors).  `initial(q, p)` on the full coordinates, if given,
    is evaluated at the foot points in place of interpolating `full`.
    """
    values = transport(full.grid, full.values, [model.phase_velocity], [spec.duration], spec, stats, initial)
    mass = full.grid.mass(values)
    return FullPhaseDensity(full.grid, values / mass)


def _moment_quadrature(model, layout, moments):
    """Product nodes, weights and joint second moments over every subsystem."""
    ordered = sorted(moments, key=lambda m: m.index)
    _, q, W, _, second = _other_nodes(layout, ordered, -1)
    return q, W, second


def mean_field_energy(model, layout, densities):
    """E = integral of H times the product of the subsystem densities."""
    q, W, second = _moment_quadrature(model, layout, [moments_from_density(u) for u in densities])
    Minv = np.linalg.inv(model.mass_matrix(q))
    kinetic = 0.5 * np.einsum('nab,nba->n', Minv, second)
    return float(np.dot(W, kinetic + model.potential(q)))


def full_energy(model, full):
    q, p = full.grid.nodes()
    return float(np.sum(model.energy(q, p) * full.values.ravel()) * full.grid.cell_volume)


###############################################################################
# Spatial component maps and the self-consistent iteration
###############################################################################

def lift_factors(factors, inertia, beta, skip=None):
    return [subsystem_moments(w, inertia[w.index], beta) for w in factors if w.index != skip]


def component_table(model, layout, i, factors, ens, part_i, inertia):
    moments = lift_factors(factors, inertia, ens.beta, skip=i)
    return effective_hamiltonian(model, layout, moments, i, part_i)


def assemble_mf_component_spatial(model, layout, i, factors, ens, part_i, K, spec, rng,
                                  inertia=None, threads=None, stats=None):
    """
    Ulam matrix of the linear component map of subsystem i: the other
    factors are frozen, lifted to phase space with their momentum laws and
    averaged into the effective Hamiltonian; positions are uniform per q_i
    cell and momenta drawn from N(0, A(q_i)^-1 / beta).
    """
    if inertia is None:
        inertia = reference_inertia(ens, layout, [f.part for f in factors])
    table = component_table(model, layout, i, factors, ens, part_i, inertia)
    field = table.field(strict=False)
    domain = tuple(part_i.intervals)

    def propagate(q0, xi, stats):
        cov = np.linalg.inv(table.inertia_inverse(q0)) / ens.beta
        p0 = np.einsum('nab,nb->na', np.linalg.cholesky(cov), xi)
        qT, _ = flow_batch(field, q0, p0, spec, domain, stats)
        return qT

    metadata = {
        'kind': 'component',
        'subsystem': i,
        'model': model.describe(),
        'T': spec.T,
        'steps': spec.steps,
        'scheme': spec.scheme,
        'beta': ens.beta,
    }
    return assemble_from_sampler(part_i, K, propagate, COMPONENT_STREAM + i, rng.seed, threads, stats, metadata)


def sweep_order_update(layout, order=FORWARD):
    """
    Subsystem order within one sweep.  Updates inside a sweep always use
    the most recent factors.
    """
    if order == FORWARD:
        sequence = list(range(layout.n))
    elif order == REVERSE:
        sequence = list(reversed(range(layout.n)))
    else:
        sequence = [int(i) for i in order]
        if sorted(sequence) != list(range(layout.n)):
            raise LayoutError("Sweep order %r is not a permutation of the subsystems" % (order,))
    logger.info('Roothaan sweep order: %s', sequence)
    return sequence


@dataclass
class RoothaanResult(object):
    factors: list
    changes: list = field(default_factory=list)
    order: list = field(default_factory=list)
    converging: bool = True


def roothaan_iterate(model, layout, initial, parts, ens, K, spec, n_iters, rng,
                     order=None, damping=None, inertia=None, threads=None, stats=None, on_sweep=None):
    """
    Self-consistent fixed point of the component maps.  Each sweep replaces
    w_i by the Perron vector of the component map built from the current
    other factors; `changes[k][i]` is the L1 change of w_i in sweep k.
    `on_sweep(sweep, factors)` is called after every sweep.
    """
    if n_iters < 1:
        raise AssemblyError("n_iters must be at least 1")
    order = order or Settings.ROOTHAAN_ORDER
    damping = Settings.ROOTHAAN_DAMPING if damping is None else float(damping)
    if not 0.0 < damping <= 1.0:
        raise AssemblyError("damping must lie in (0, 1], got %r" % (damping,))
    if inertia is None:
        inertia = reference_inertia(ens, layout, parts)
    factors = [w.normalized() for w in initial]
    sequence = sweep_order_update(layout, order)
    result = RoothaanResult(factors, order=sequence)
    for sweep in range(n_iters):
        changes = [0.0] * layout.n
        for i in sequence:
            P = assemble_mf_component_spatial(model, layout, i, factors, ens, parts[i], K, spec, rng,
                                              inertia, threads, stats)
            try:
                fixed = perron_vector(P)
            except SpectralError as exc:
                raise SpectralError("Perron vector of component %d failed in sweep %d: %s" % (i, sweep + 1, exc),
                                    exc.residuals)
            new = (1.0 - damping) * factors[i].values + damping * fixed
            changes[i] = float(np.abs(new - factors[i].values).sum())
            factors[i] = SpatialFactor(i, parts[i], new, DENSITY).normalized()
        result.changes.append(changes)
        if on_sweep is not None:
            on_sweep(sweep + 1, list(factors))
        logger.info('Roothaan sweep %d: factor changes %s', sweep + 1, ', '.join('%.3g' % c for c in changes))
        totals = [sum(c) for c in result.changes]
        if len(totals) >= 4 and totals[-1] > totals[-2] > totals[-3] > totals[-4]:
            result.converging = False
            logger.warning('Roothaan factor changes grew over the last 3 sweeps (%.3g); continuing', totals[-1])
    result.factors = factors
    return result


def component_spectra(model, layout, factors, parts, ens, K, spec, rng, k, inertia=None, threads=None,
                      stats=None):
    """Dominant eigenpairs of every component map at the given factors."""
    if inertia is None:
        inertia = reference_inertia(ens, layout, parts)
    spectra = []
    for i in range(layout.n):
        P = assemble_mf_component_spatial(model, layout, i, factors, ens, parts[i], K, spec, rng,
                                          inertia, threads, stats)
        spectra.append((P, dominant_eigs(P, min(k, parts[i].n))))
    return spectra


def component_residual(P, w):
    """||S w - w||_1 for a component matrix and its factor."""
    return float(np.abs(P.dot(w.values) - w.values).sum())


###############################################################################
# Product eigenfunctions
###############################################################################

@dataclass
class ProductFunction(object):
    part: TensorPartition
    values: np.ndarray
    eigenvalue: complex
    selection: list


def parse_selection(selection):
    """'invariant' -> 0, 'eigen-k' -> k - 1 (k counts from the leading eigenvalue)."""
    if selection == 'invariant':
        return 0
    if selection.startswith('eigen-'):
        rank = int(selection.split('-', 1)[1])
        if rank < 1:
            raise LayoutError("Eigenvector ranks start at 1: %r" % (selection,))
        return rank - 1
    raise LayoutError("Unknown factor selection %r" % (selection,))


def component_factors(i, part, invariant, spectrum):
    """[invariant density, eigenfunction 2, eigenfunction 3, ...] of one component."""
    factors = [invariant]
    for rank in range(1, spectrum.k):
        factors.append(SpatialFactor(i, part, spectrum.vector(rank), EIGENFUNCTION,
                                     spectrum.eigenvalues[rank]))
    return factors


def product_eigenfunction(factor_sets, selection, part=None):
    """
    Outer product of one factor per subsystem on the product grid (cell
    order), with the product of the component eigenvalues as estimate.
    """
    if len(factor_sets) != len(selection):
        raise LayoutError("%d factor sets but %d selections" % (len(factor_sets), len(selection)))
    chosen = []
    for i, (factors, choice) in enumerate(zip(factor_sets, selection)):
        rank = parse_selection(choice)
        if rank >= len(factors):
            raise LayoutError("Subsystem %d has no factor %r" % (i, choice))
        chosen.append(factors[rank])
    counts = [c for f in chosen for c in f.part.counts]
    if part is None:
        part = TensorPartition([iv for f in chosen for iv in f.part.intervals], counts)
    elif list(part.counts) != counts:
        raise LayoutError("Factor grids %r do not match the product grid %r" % (counts, list(part.counts)))
    values = chosen[0].values
    eigenvalue = chosen[0].eigenvalue
    for f in chosen[1:]:
        values = np.multiply.outer(values, f.values).ravel()
        eigenvalue = eigenvalue * f.eigenvalue
    return ProductFunction(part, np.asarray(values).ravel(), eigenvalue, list(selection))

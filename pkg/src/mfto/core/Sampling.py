# coding: utf8

"""
Canonical densities and the samplers the spatial transfer operators need.

Stream splitting: the generator for cell `c` of stream `s` under master
seed `seed` is PCG64 seeded with SeedSequence(seed, spawn_key=(s, c)).
Results therefore never depend on how cells are spread over workers.
"""
from dataclasses import dataclass

import numpy as np

from mfto.conf import Units
from mfto.core.Errors import ConfigError, ModelConsistencyError

BOLTZMANN = 'boltzmann'
EXACT_MARGINAL = 'exact-marginal'
CONVENTIONS = (BOLTZMANN, EXACT_MARGINAL)

ALGORITHM = 'PCG64'

# Stream ids: the full operator uses FULL_STREAM, component map i of the
# mean-field operator uses COMPONENT_STREAM + i.
FULL_STREAM = 0
COMPONENT_STREAM = 100


@dataclass(frozen=True)
class CanonicalEnsemble(object):
    """beta in mol/kJ (or inverse model energy units for reduced models)."""
    model: object
    beta: float
    convention: str = BOLTZMANN

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError("beta must be positive, got %r" % (self.beta,))
        if self.convention not in CONVENTIONS:
            raise ConfigError("Unknown spatial-marginal convention %r" % (self.convention,))

    @classmethod
    def at_temperature(cls, model, temperature, convention=BOLTZMANN):
        return cls(model, Units.beta_from_temperature(temperature), convention)


@dataclass(frozen=True)
class RngSpec(object):
    seed: int = 0
    algorithm: str = ALGORITHM

    def __post_init__(self):
        if self.algorithm != ALGORITHM:
            raise ConfigError("Only the %s generator is supported" % (ALGORITHM,))
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits, got %r" % (self.seed,))

    def generator(self, stream_id=0, cell=0):
        return cell_generator(self.seed, stream_id, cell)


def cell_generator(seed, stream_id, cell):
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id), int(cell)))
    return np.random.Generator(np.random.PCG64(sequence))


def momentum_factor(ens, q):
    """Lower Cholesky factor of M(q)/beta, batched over q."""
    q = np.asarray(q, dtype=float)
    try:
        return np.linalg.cholesky(ens.model.mass_matrix(q) / ens.beta)
    except np.linalg.LinAlgError:
        raise ModelConsistencyError("Mass matrix not positive definite while sampling momenta", q=q)


def sample_conditional_momentum(ens, q, rng, size=None):
    """
    Draw p ~ N(0, M(q)/beta), the exact conditional law of the canonical
    density for the quadratic kinetic energy.

    With `size` given, `q` is a single configuration and `size` momenta are
    drawn for it; otherwise one momentum is drawn per row of `q`.
    """
    q = np.asarray(q, dtype=float)
    factor = momentum_factor(ens, q)
    if size is not None:
        xi = rng.standard_normal((size,) + q.shape[-1:])
        return xi.dot(factor.T)
    xi = rng.standard_normal(q.shape)
    return np.einsum('...ij,...j->...i', factor, xi)


def sample_uniform_in_box(box, rng, size=None):
    """Uniform draw(s) from the box given as a (lower, upper) pair."""
    lower, upper = (np.asarray(b, dtype=float) for b in box)
    shape = lower.shape if size is None else (size,) + lower.shape
    return lower + (upper - lower) * rng.random(shape)


def boltzmann_position_density(ens, q, shift=0.0):
    """
    Unnormalised spatial weight exp(-beta (V(q) - shift)), times
    det(M(q))^(1/2) under the exact-marginal convention.
    """
    q = np.asarray(q, dtype=float)
    weight = np.exp(-ens.beta * (ens.model.potential(q) - shift))
    if ens.convention == EXACT_MARGINAL:
        weight = weight * np.sqrt(np.linalg.det(ens.model.mass_matrix(q)))
    return weight


def thermal_momentum_scale(ens, q):
    """Per-coordinate momentum standard deviation sqrt(M_kk(q)/beta)."""
    M = ens.model.mass_matrix(np.asarray(q, dtype=float))
    return np.sqrt(np.diagonal(M, axis1=-2, axis2=-1) / ens.beta)

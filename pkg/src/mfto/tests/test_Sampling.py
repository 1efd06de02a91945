# coding: utf8

import math

import numpy as np
import pytest
import scipy.stats

from mfto.conf import Units
from mfto.core.Errors import ConfigError
from mfto.core.Models import DoubleWell2D
from mfto.core.Sampling import (
    EXACT_MARGINAL,
    CanonicalEnsemble,
    RngSpec,
    boltzmann_position_density,
    sample_conditional_momentum,
    sample_uniform_in_box,
    thermal_momentum_scale,
)
from mfto.tests.conftest import TRANS


def test_beta_at_room_temperature():
    assert Units.beta_from_temperature(300.0) == pytest.approx(0.40090, rel=1e-4)
    with pytest.raises(ValueError):
        Units.beta_from_temperature(0.0)


def test_ensemble_checks():
    with pytest.raises(ConfigError):
        CanonicalEnsemble(DoubleWell2D(), 0.0)
    with pytest.raises(ConfigError):
        CanonicalEnsemble(DoubleWell2D(), 1.0, 'microcanonical')
    with pytest.raises(ConfigError):
        RngSpec(seed=-1)


def test_cell_streams_are_reproducible(rng):
    a = rng.generator(3, 17).standard_normal(5)
    b = rng.generator(3, 17).standard_normal(5)
    c = rng.generator(3, 18).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


class TestMomentum(object):

    def test_constant_mass_moments(self):
        ens = CanonicalEnsemble(DoubleWell2D(m1=2.0, m2=0.5), 4.0)
        p = sample_conditional_momentum(ens, np.zeros(2), RngSpec(1).generator(), size=200000)
        np.testing.assert_allclose(p.mean(axis=0), 0.0, atol=0.01)
        np.testing.assert_allclose(p.var(axis=0), [0.5, 0.125], rtol=0.02)

    def test_first_component_is_gaussian(self):
        ens = CanonicalEnsemble(DoubleWell2D(), 1.0)
        p = sample_conditional_momentum(ens, np.zeros(2), RngSpec(2).generator(), size=5000)
        assert scipy.stats.kstest(p[:, 0], 'norm').pvalue > 0.001

    def test_one_draw_per_row(self, well_ensemble):
        q = np.zeros((7, 2))
        p = sample_conditional_momentum(well_ensemble, q, RngSpec(0).generator())
        assert p.shape == (7, 2)

    def test_butane_covariance(self, butane, butane_ensemble):
        p = sample_conditional_momentum(butane_ensemble, TRANS, RngSpec(3).generator(), size=100000)
        expected = butane.mass_matrix(TRANS) / butane_ensemble.beta
        np.testing.assert_allclose(np.cov(p.T), expected, atol=0.05 * np.abs(expected).max())
        np.testing.assert_allclose(thermal_momentum_scale(butane_ensemble, TRANS) ** 2,
                                   np.diag(expected), rtol=1e-12)


class TestUniformBox(object):

    def test_single_draw_inside(self, rng):
        q = sample_uniform_in_box(([0.0, -1.0], [1.0, 1.0]), rng.generator())
        assert q.shape == (2,)
        assert 0.0 <= q[0] < 1.0 and -1.0 <= q[1] < 1.0

    def test_many_draws_cover_box(self, rng):
        q = sample_uniform_in_box(([2.0], [3.0]), rng.generator(), size=10000)
        assert q.shape == (10000, 1)
        assert q.min() >= 2.0 and q.max() < 3.0
        assert q.mean() == pytest.approx(2.5, abs=0.01)


class TestBoltzmann(object):

    def test_trans_more_likely_than_cis(self, butane_ensemble):
        cis = np.array([1.9, 1.9, 0.0])
        assert boltzmann_position_density(butane_ensemble, TRANS) > boltzmann_position_density(butane_ensemble, cis)

    def test_double_well_maxima(self, well_ensemble):
        axis = np.linspace(-2, 2, 81)
        mesh = np.stack(np.meshgrid(axis, axis, indexing='ij'), axis=-1)
        w = boltzmann_position_density(well_ensemble, mesh)
        i, j = np.unravel_index(np.argmax(w), w.shape)
        assert axis[i] == pytest.approx(1.0, abs=0.1)
        assert abs(axis[j]) == pytest.approx(1.0, abs=0.1)

    def test_exact_marginal_has_mass_factor(self, butane):
        plain = CanonicalEnsemble(butane, 0.4)
        exact = CanonicalEnsemble(butane, 0.4, EXACT_MARGINAL)
        ratio = boltzmann_position_density(exact, TRANS) / boltzmann_position_density(plain, TRANS)
        assert ratio == pytest.approx(math.sqrt(np.linalg.det(butane.mass_matrix(TRANS))))

# coding: utf8

import math

import numpy as np
import pytest

from mfto.core.Errors import BoundaryError, ConfigError, DomainError, LayoutError, ModelConsistencyError
from mfto.core.Models import (
    ButaneModel,
    DoubleWell2D,
    HamiltonianModel,
    Interval,
    PhaseState,
    SubsystemLayout,
    build_model,
    cartesian_embedding,
    eval_mass_matrix,
    eval_potential,
    eval_vector_field,
)
from mfto.tests.conftest import TRANS


def _from_terms(model, q):
    total = 0.0
    for weight, factors in model.separable_terms():
        value = weight
        for c, f in enumerate(factors):
            if f is not None:
                value = value * f(q[..., c])
        total = total + value
    return total


def divergence(model, q, p, h=1e-5, with_scale=False):
    """Central-difference divergence of the phase velocity, and the size of its terms."""
    div = np.zeros(q.shape[0])
    scale = np.zeros(q.shape[0])
    for k in range(q.shape[1]):
        step = np.zeros(q.shape[1])
        step[k] = h
        dq = (model.phase_velocity(q + step, p)[0][:, k] - model.phase_velocity(q - step, p)[0][:, k]) / (2 * h)
        dp = (model.phase_velocity(q, p + step)[1][:, k] - model.phase_velocity(q, p - step)[1][:, k]) / (2 * h)
        div += dq + dp
        scale += np.abs(dq) + np.abs(dp)
    return (div, scale) if with_scale else div


class TestLayout(object):

    def test_blocks_must_be_contiguous(self):
        with pytest.raises(LayoutError):
            SubsystemLayout(((0, 1), (2, 3)))
        with pytest.raises(LayoutError):
            SubsystemLayout(())

    def test_from_sizes_and_complement(self):
        layout = SubsystemLayout.from_sizes([1, 2])
        assert layout.blocks == ((0, 1), (1, 3))
        assert layout.n == 2 and layout.d == 3
        assert list(layout.indices(1)) == [1, 2]
        assert list(layout.complement(1)) == [0]

    def test_model_dimension_checked(self):
        with pytest.raises(LayoutError):
            DoubleWell2D(layout=SubsystemLayout.from_sizes([1, 2]))

    def test_interval_and_state_checks(self):
        with pytest.raises(LayoutError):
            Interval(1.0, 1.0)
        with pytest.raises(DomainError):
            PhaseState([0.0, 1.0], [0.0])
        with pytest.raises(DomainError):
            PhaseState([np.nan], [0.0])


class TestDoubleWell(object):

    def test_potential_at_origin(self, double_well):
        assert eval_potential(double_well, [0.0, 0.0]) == pytest.approx(9.0)

    def test_global_minimum(self, double_well):
        assert double_well.potential(np.array([1.0, 1.0])) == pytest.approx(1.0)
        assert double_well.potential(np.array([1.0, -1.0])) == pytest.approx(1.0)
        assert double_well.potential(np.array([-1.0, 1.0])) == pytest.approx(2.0)

    @pytest.mark.parametrize('coupling', [0.0, 0.3, 1.0])
    def test_separable_terms_reproduce_potential(self, coupling):
        model = DoubleWell2D(coupling=coupling)
        q = np.random.default_rng(1).uniform(-2, 2, size=(50, 2))
        np.testing.assert_allclose(_from_terms(model, q), model.potential(q), rtol=1e-12, atol=1e-12)

    def test_coupling_one_is_the_product(self):
        q = np.array([[0.3, -1.2], [1.5, 0.2]])
        split = DoubleWell2D(coupling=1.0 - 1e-15)
        np.testing.assert_allclose(split.potential(q), DoubleWell2D().potential(q), rtol=1e-12)

    @pytest.mark.parametrize('coupling', [0.0, 0.5, 1.0])
    def test_gradient_matches_differences(self, coupling):
        model = DoubleWell2D(coupling=coupling)
        q = np.random.default_rng(3).uniform(-2, 2, size=(100, 2))
        numeric = HamiltonianModel.potential_gradient(model, q)
        np.testing.assert_allclose(model.potential_gradient(q), numeric, rtol=1e-6, atol=1e-6)

    def test_vector_field(self):
        model = DoubleWell2D(m1=2.0, m2=0.5)
        z = PhaseState([0.5, -0.5], [1.0, 1.0])
        f = eval_vector_field(model, z)
        np.testing.assert_allclose(f[:2], [0.5, 2.0])
        np.testing.assert_allclose(f[2:], -model.potential_gradient(z.q))

    def test_phase_velocity_is_divergence_free(self):
        model = DoubleWell2D(m1=2.0, m2=0.5, coupling=0.4)
        gen = np.random.default_rng(4)
        q = gen.uniform(-1.5, 1.5, size=(20, 2))
        p = gen.normal(size=(20, 2))
        assert np.abs(divergence(model, q, p)).max() < 1e-6

    def test_energy_without_momentum_is_potential(self, double_well):
        q = np.array([0.2, 0.4])
        assert double_well.energy(q, np.zeros(2)) == pytest.approx(double_well.potential(q))

    def test_outside_domain(self, double_well):
        with pytest.raises(DomainError):
            eval_potential(double_well, [2.5, 0.0])
        with pytest.raises(DomainError):
            eval_potential(double_well, [0.0, 0.0, 0.0])


class TestButane(object):

    def test_trans_is_deeper_than_cis(self, butane):
        assert butane.torsion_potential(math.pi) == pytest.approx(0.0, abs=1e-9)
        assert butane.torsion_potential(0.0) == pytest.approx(8.314 * 5.388)

    def test_bond_angle_minimum(self, butane):
        assert butane.bond_angle_potential(butane.theta0) == 0.0
        assert butane.bond_angle_derivative(butane.theta0) == 0.0

    def test_embedding_geometry(self, butane):
        q = np.array([1.8, 2.0, 1.1])
        x, _ = cartesian_embedding(butane, q)
        bonds = np.linalg.norm(np.diff(x, axis=0), axis=-1)
        np.testing.assert_allclose(bonds, butane.r0, rtol=1e-12)

        def angle(a, b, c):
            u, v = a - b, c - b
            return math.acos(np.dot(u, v) / np.linalg.norm(u) / np.linalg.norm(v))
        assert angle(x[0], x[1], x[2]) == pytest.approx(1.8)
        assert angle(x[1], x[2], x[3]) == pytest.approx(2.0)

        masses = butane.atom_masses
        np.testing.assert_allclose(masses.dot(x), 0.0, atol=1e-12)

    def test_jacobian_matches_differences(self, butane):
        q = np.array([1.8, 2.0, 1.1])
        _, jac = butane.embedding(q)
        h = 1e-6
        for k in range(3):
            step = np.zeros(3)
            step[k] = h
            numeric = (butane.embedding(q + step)[0] - butane.embedding(q - step)[0]).ravel() / (2 * h)
            np.testing.assert_allclose(jac[:, k], numeric, atol=1e-8)

    def test_mass_matrix_symmetric_positive(self, butane):
        M = eval_mass_matrix(butane, TRANS)
        np.testing.assert_allclose(M, M.T, rtol=1e-12)
        assert np.all(np.linalg.eigvalsh(M) > 0)

    def test_vector_field_is_hamiltonian(self, butane):
        q = np.array([1.8, 2.0, 1.1])
        p = np.array([0.3, -0.2, 0.1])
        qdot, pdot = butane.phase_velocity(q, p)
        h = 1e-6
        for k in range(3):
            step = np.zeros(3)
            step[k] = h
            dHdp = (butane.energy(q, p + step) - butane.energy(q, p - step)) / (2 * h)
            dHdq = (butane.energy(q + step, p) - butane.energy(q - step, p)) / (2 * h)
            assert qdot[k] == pytest.approx(dHdp, rel=1e-5, abs=1e-6)
            assert pdot[k] == pytest.approx(-dHdq, rel=1e-4, abs=1e-4)

    def test_gradient_matches_differences(self, butane):
        gen = np.random.default_rng(5)
        q = np.column_stack([gen.uniform(1.2, 2.6, 100), gen.uniform(1.2, 2.6, 100),
                             gen.uniform(0.0, 2 * math.pi, 100)])
        numeric = HamiltonianModel.potential_gradient(butane, q)
        np.testing.assert_allclose(butane.potential_gradient(q), numeric, rtol=1e-6, atol=1e-5)

    def test_phase_velocity_is_divergence_free(self, butane):
        gen = np.random.default_rng(6)
        q = np.column_stack([gen.uniform(1.5, 2.3, 10), gen.uniform(1.5, 2.3, 10),
                             gen.uniform(0.0, 2 * math.pi, 10)])
        p = gen.normal(size=(10, 3))
        div, scale = divergence(butane, q, p, with_scale=True)
        assert np.all(scale > 0)
        assert np.all(np.abs(div) <= 1e-5 * scale + 1e-9)

    def test_cis_ends_are_closer_than_trans(self, butane):
        def end_to_end(phi):
            x, _ = cartesian_embedding(butane, [butane.theta0, butane.theta0, phi])
            return np.linalg.norm(x[3] - x[0])
        assert end_to_end(0.0) < end_to_end(math.pi / 3) < end_to_end(math.pi)

    def test_separable_terms(self, butane):
        q = np.array([[1.8, 2.0, 1.1], [1.0, 2.5, 4.0]])
        np.testing.assert_allclose(_from_terms(butane, q), butane.potential(q), rtol=1e-12)

    def test_singular_boundary(self, butane):
        with pytest.raises(BoundaryError):
            cartesian_embedding(butane, [0.0, 1.9, 1.0])
        with pytest.raises(BoundaryError):
            cartesian_embedding(butane, [1.9, math.pi, 1.0])

    def test_collapsed_mass_matrix_rejected(self):
        model = ButaneModel(r0=1e-200)
        with pytest.raises(ModelConsistencyError):
            eval_mass_matrix(model, TRANS)


def test_build_model():
    model = build_model({'model': 'double_well_2d', 'alpha': 2.0})
    assert model.alpha == 2.0
    with pytest.raises(LayoutError):
        build_model({'model': 'pentane'})
    with pytest.raises(ConfigError):
        build_model({'model': 'butane_ua', 'coupling': 0.5})

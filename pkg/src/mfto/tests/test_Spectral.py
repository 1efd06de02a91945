# coding: utf8

import logging

import numpy as np
import pytest

from mfto.core.Errors import DegenerateDecompositionError, SpectralError, UndefinedProbabilityError
from mfto.core.Partition import TensorPartition
from mfto.core.Models import Interval
from mfto.core.Spectral import (
    ARNOLDI,
    DENSE,
    IDENTITY,
    almost_invariant_sets,
    dense_eigs,
    dominant_eigs,
    invariance_ratio,
    invariant_vector,
    perron_vector,
    power_deflation_eigs,
    sign_normalize,
)
from mfto.core.Ulam import StochasticMatrix


def birth_death(n, seed=0):
    """Lazy reversible chain; its eigenvalues are simple and lie in [0, 1]."""
    gen = np.random.default_rng(seed)
    up = gen.uniform(0.2, 0.5, n)
    down = gen.uniform(0.2, 0.5, n)
    up[-1] = 0.0
    down[0] = 0.0
    Q = np.diag(1.0 - up - down) + np.diag(up[:-1], -1) + np.diag(down[1:], 1)
    return StochasticMatrix(0.5 * (np.eye(n) + Q))


@pytest.fixture
def two_state():
    # a = 0.1 leaves state 0, b = 0.2 leaves state 1
    return StochasticMatrix(np.array([[0.9, 0.2], [0.1, 0.8]]))


class TestEigenpairs(object):

    def test_arnoldi_matches_dense(self):
        P = birth_death(40)
        sparse = dominant_eigs(P, 4)
        full = dense_eigs(P, 4)
        assert sparse.method == ARNOLDI
        np.testing.assert_allclose(sparse.eigenvalues, full.eigenvalues, atol=1e-8)
        np.testing.assert_allclose(sparse.eigenvectors, full.eigenvectors, atol=1e-6)
        assert sparse.eigenvalues[0] == pytest.approx(1.0)
        assert np.all(np.diff(np.real(sparse.eigenvalues)) <= 0)
        assert not np.any(sparse.complex_flags)

    def test_small_problems_go_dense(self, two_state):
        result = dominant_eigs(two_state, 2)
        assert result.method == DENSE
        np.testing.assert_allclose(result.eigenvalues, [1.0, 0.7])
        np.testing.assert_allclose(result.residuals, 0.0, atol=1e-12)

    def test_identity(self):
        result = dominant_eigs(StochasticMatrix(np.eye(5)), 3)
        assert result.method == IDENTITY
        np.testing.assert_array_equal(result.eigenvalues, 1.0)
        np.testing.assert_allclose(result.vector(0), 1.0 / np.sqrt(5))

    def test_rejects_non_stochastic_and_bad_k(self, two_state):
        with pytest.raises(SpectralError):
            dominant_eigs(np.array([[0.5, 0.5], [0.6, 0.5]]), 1)
        with pytest.raises(SpectralError):
            dominant_eigs(two_state, 3)

    def test_power_deflation(self, two_state):
        result = power_deflation_eigs(two_state, 2, tol=1e-13)
        np.testing.assert_allclose(result.eigenvalues, [1.0, 0.7], atol=1e-9)

    def test_verification_agrees(self, caplog):
        with caplog.at_level(logging.WARNING):
            dominant_eigs(birth_death(20, seed=3), 3, verify=True)
        assert 'disagrees' not in caplog.text


def test_sign_normalize():
    v = sign_normalize([0.5, -2.0, 1.0])
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert v[1] > 0
    np.testing.assert_array_equal(sign_normalize(v), v)
    np.testing.assert_array_equal(sign_normalize(np.zeros(3)), 0.0)


class TestInvariant(object):

    def test_perron(self, two_state):
        np.testing.assert_allclose(perron_vector(two_state), [2.0 / 3, 1.0 / 3], atol=1e-9)
        np.testing.assert_allclose(invariant_vector(two_state), [2.0 / 3, 1.0 / 3], atol=1e-9)

    def test_invariance_ratios_add_up(self):
        W = np.array([[6.0, 1.0, 0.2], [1.0, 3.0, 1.5], [0.2, 1.5, 5.0]])
        P = StochasticMatrix(W / W.sum(axis=0))
        result = dominant_eigs(P, 2)
        v = result.vector(1)
        plus, minus = almost_invariant_sets(v)
        total = invariance_ratio(P, plus, np.abs(v)) + invariance_ratio(P, minus, np.abs(v))
        assert total == pytest.approx(1.0 + result.eigenvalues[1].real, abs=1e-10)
        assert total == pytest.approx(1.775, abs=1e-3)
        # weighting by the invariant density breaks the identity on three states
        pi = perron_vector(P)
        skewed = invariance_ratio(P, plus, pi) + invariance_ratio(P, minus, pi)
        assert abs(skewed - total) > 0.01

    def test_sets_need_both_signs(self):
        plus, minus = almost_invariant_sets([0.3, -0.1, 0.0, 0.2])
        assert list(plus) == [0, 3] and list(minus) == [1]
        with pytest.raises(DegenerateDecompositionError):
            almost_invariant_sets([0.3, 0.0])
        part = TensorPartition([Interval(0.0, 1.0)], [3])
        with pytest.raises(DegenerateDecompositionError):
            almost_invariant_sets([0.3, -0.1], part)

    def test_invariance_ratio_needs_weight(self, two_state):
        with pytest.raises(UndefinedProbabilityError):
            invariance_ratio(two_state, [], [0.5, 0.5])
        with pytest.raises(UndefinedProbabilityError):
            invariance_ratio(two_state, [1], [1.0, 0.0])

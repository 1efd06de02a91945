# coding: utf8

import math

import numpy as np
import pytest

from mfto.conf.Settings import Settings
from mfto.core.Integrator import IntegratorSpec
from mfto.core.Models import ButaneModel, DoubleWell2D
from mfto.core.Sampling import CanonicalEnsemble, RngSpec

TRANS = np.array([1.9, 1.9, math.pi])


@pytest.fixture
def double_well():
    return DoubleWell2D()


@pytest.fixture
def decoupled_well():
    return DoubleWell2D(coupling=0.0)


@pytest.fixture
def butane():
    return ButaneModel()


@pytest.fixture
def well_ensemble(double_well):
    return CanonicalEnsemble(double_well, 3.0)


@pytest.fixture
def butane_ensemble(butane):
    return CanonicalEnsemble.at_temperature(butane, 300.0)


@pytest.fixture
def short_spec():
    return IntegratorSpec('rk4', 10, 0.2, 1.0)


@pytest.fixture
def rng():
    return RngSpec(7)


@pytest.fixture
def settings():
    """Settings with every attribute restored after the test."""
    saved = {k: getattr(Settings, k) for k in dir(Settings) if k.isupper()}
    yield Settings
    for k, v in saved.items():
        setattr(Settings, k, v)


def random_stochastic(n, seed=0, symmetric=True):
    """Column-stochastic matrix; with `symmetric` it is reversible, so its spectrum is real."""
    gen = np.random.default_rng(seed)
    W = gen.random((n, n))
    if symmetric:
        W = W + W.T
    return W / W.sum(axis=0)

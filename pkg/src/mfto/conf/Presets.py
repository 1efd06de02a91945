# coding: utf8

"""
Experiment presets.  Each one is a complete experiment config dict as
accepted by ExperimentConfig.from_dict.
"""
import copy
import math

from mfto.core.Errors import ConfigError

SCHEMA_REF = 'urn:mfto:schemas:experiment:1'

DOUBLE_WELL_2D = {
    '$schemaRef': SCHEMA_REF,
    'preset': 'double_well_2d',
    'model': {
        'model': 'double_well_2d',
        'alpha': 3.0,
        'm1': 1.0,
        'm2': 1.0,
        'coupling': 1.0,
    },
    'layout': [1, 1],
    'grid': [32, 32],
    'K': 32,
    'integrator': {
        'scheme': 'rk4',
        'steps': 10,
        'T': 0.1,
    },
    'beta': 3.0,
    'convention': 'boltzmann',
    'seed': 0,
    'eigenpairs': 4,
    'roothaan': {
        'iterations': 10,
        'order': 'forward',
        'damping': 1.0,
    },
    'products': [
        {'factors': ['invariant', 'eigen-2'], 'full_rank': 2},
        {'factors': ['eigen-2', 'invariant'], 'full_rank': 3},
        {'factors': ['eigen-2', 'eigen-2'], 'full_rank': 4},
    ],
}

BUTANE_UA = {
    '$schemaRef': SCHEMA_REF,
    'preset': 'butane_ua',
    'model': {
        'model': 'butane_ua',
    },
    'layout': [1, 1, 1],
    'grid': [32, 32, 32],
    'K': 32,
    'integrator': {
        'scheme': 'explicit-euler',
        'steps': 10,
        'T': 0.5e-13,
    },
    'temperature': 300.0,
    'convention': 'boltzmann',
    'seed': 0,
    'eigenpairs': 4,
    'roothaan': {
        'iterations': 10,
        'order': 'forward',
        'damping': 1.0,
    },
    'products': [
        {'factors': ['invariant', 'invariant', 'eigen-2'], 'full_rank': 2},
        {'factors': ['invariant', 'invariant', 'eigen-3'], 'full_rank': 3},
    ],
    # Dumps include the theta1 = pi/2 slice
    'slice': {'axis': 0, 'coordinate': math.pi / 2},
}

PRESETS = {
    'double_well_2d': DOUBLE_WELL_2D,
    'butane_ua': BUTANE_UA,
}


def preset(name):
    """A fresh copy of the named preset."""
    if name not in PRESETS:
        raise ConfigError("Unknown preset %r (known: %s)" % (name, ', '.join(sorted(PRESETS))))
    return copy.deepcopy(PRESETS[name])

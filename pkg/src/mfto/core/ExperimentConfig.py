# coding: utf8

"""
One experiment: model, grid, sampling, integration and mean-field
parameters, plus the builders that turn them into the core objects.
"""
import copy
import logging
import os
import sys
from dataclasses import dataclass, field

import simplejson

from mfto.conf.Presets import SCHEMA_REF, preset
from mfto.conf.Settings import Settings
from mfto.core.Errors import ConfigError
from mfto.core.Integrator import IntegratorSpec
from mfto.core.Models import SubsystemLayout, build_model
from mfto.core.Partition import TensorPartition
from mfto.core.Sampling import CanonicalEnsemble, RngSpec
from mfto.core.Validator import Validator, ValidationSeverity

logger = logging.getLogger(__name__)

SCHEMA_FILE = os.path.join(os.path.dirname(__file__), '..', '..', '..', 'schemas', 'experiment-v1.0.json')


def _schema_text():
    for candidate in (os.environ.get('MFTO_SCHEMA'), SCHEMA_FILE,
                      os.path.join(sys.prefix, "mfto", "schemas", "experiment-v1.0.json")):
        if candidate and os.path.isfile(candidate):
            with open(candidate) as f:
                return f.read()
    raise ConfigError("Cannot find experiment-v1.0.json")


def validator():
    v = Validator()
    v.addSchemaResource(SCHEMA_REF, _schema_text())
    return v


@dataclass
class ExperimentConfig(object):
    model: dict
    layout: list
    grid: list
    K: int
    integrator: dict
    seed: int = 0
    temperature: float = None
    beta: float = None
    convention: str = 'boltzmann'
    eigenpairs: int = 4
    roothaan: dict = field(default_factory=lambda: {'iterations': 10, 'order': 'forward', 'damping': 1.0})
    products: list = field(default_factory=list)
    slice: dict = None
    preset: str = None
    output: str = None

    FIELDS = ('preset', 'model', 'layout', 'grid', 'K', 'integrator', 'temperature', 'beta', 'convention',
              'seed', 'eigenpairs', 'roothaan', 'products', 'slice', 'output')

    @classmethod
    def from_dict(cls, config, check=True):
        """Validate against the experiment schema and build; severity above WARN is a ConfigError."""
        if check:
            results = validator().validate(config)
            if results.severity > ValidationSeverity.WARN:
                raise ConfigError("Invalid experiment config: " + '; '.join(str(m) for m in results.messages))
            for message in results.messages:
                logger.warning('Config: %s', message)
        values = {k: copy.deepcopy(config[k]) for k in cls.FIELDS if k in config}
        return cls(**values)

    @classmethod
    def from_file(cls, fileName):
        try:
            with open(fileName, 'r') as f:
                config = simplejson.load(f)
        except (IOError, simplejson.errors.JSONDecodeError) as e:
            raise ConfigError("Cannot read experiment config %s: %s" % (fileName, e))
        return cls.from_dict(config)

    @classmethod
    def from_preset(cls, name):
        return cls.from_dict(preset(name))

    def to_dict(self):
        out = {'$schemaRef': SCHEMA_REF}
        for k in self.FIELDS:
            value = getattr(self, k)
            if value is not None:
                out[k] = copy.deepcopy(value)
        return out

    def identity(self):
        """The config without where it is written; what artifact hashes cover."""
        out = self.to_dict()
        out.pop('output', None)
        return out

    def dumps(self):
        return simplejson.dumps(self.to_dict(), sort_keys=True, indent=4)

    def with_overrides(self, **overrides):
        """
        A copy with the given fields replaced.  `T`, `steps` and `scheme`
        go into the integrator, `iters` into the Roothaan block,
        `coupling` into the model parameters.
        """
        config = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ('T', 'steps', 'scheme'):
                config['integrator'][key] = value
            elif key == 'iters':
                config.setdefault('roothaan', {})['iterations'] = value
            elif key == 'coupling':
                config['model']['coupling'] = value
            elif key == 'temperature':
                config.pop('beta', None)
                config['temperature'] = value
            elif key == 'beta':
                config.pop('temperature', None)
                config['beta'] = value
            elif key in self.FIELDS:
                config[key] = value
            else:
                raise ConfigError("Unknown override %r" % (key,))
        return ExperimentConfig.from_dict(config)

    # Builders

    @property
    def output_dir(self):
        return self.output or Settings.OUTPUT_DIR

    @property
    def iterations(self):
        return int(self.roothaan.get('iterations', 10))

    def build_layout(self):
        return SubsystemLayout.from_sizes(self.layout)

    def build_model(self):
        return build_model(self.model, self.build_layout())

    def build_partition(self, model):
        return TensorPartition.for_model(model, self.grid)

    def build_subsystem_partitions(self, model):
        layout = self.build_layout()
        return [TensorPartition.for_model(model, [self.grid[k] for k in layout.indices(i)], layout.indices(i))
                for i in range(layout.n)]

    def build_ensemble(self, model):
        if self.temperature is not None:
            return CanonicalEnsemble.at_temperature(model, self.temperature, self.convention)
        if self.beta is None:
            raise ConfigError("Neither temperature nor beta given")
        return CanonicalEnsemble(model, float(self.beta), self.convention)

    def build_integrator(self, model):
        return IntegratorSpec(self.integrator['scheme'], self.integrator['steps'], float(self.integrator['T']),
                              model.time_unit)

    def build_rng(self):
        return RngSpec(int(self.seed))

# coding: utf8

import simplejson
from enum import IntEnum
from jsonschema import validate as jsValidate, ValidationError, FormatChecker

from mfto.core.Models import MODELS


class Validator(object):

    def __init__(self):
        self.schemas = {}

    def addSchemaResource(self, schemaRef, schema):
        if schemaRef in self.schemas.keys():
            raise Exception("Attempted to redefine schema for " + schemaRef)
        try:
            schema = simplejson.loads(schema)
            self.schemas[schemaRef] = schema

        except simplejson.errors.JSONDecodeError as e:
            raise Exception('SCHEMA: Failed to load %s: %s' % (schemaRef, e))

    def validate(self, json_object):
        results = ValidationResults()

        if "$schemaRef" not in json_object:
            results.add(ValidationSeverity.FATAL, JsonValidationException("No $schemaRef found, unable to validate."))
            return results

        schemaRef = json_object["$schemaRef"]
        if schemaRef not in self.schemas.keys():
            results.add(ValidationSeverity.FATAL, JsonValidationException("Schema " + schemaRef + " is unknown, unable to validate."))
            return results

        schema = self.schemas[schemaRef]
        try:
            jsValidate(json_object, schema, format_checker=FormatChecker())
        except ValidationError as e:
            results.add(ValidationSeverity.ERROR, e)
            return results

        self.checkSemantics(json_object, results)
        return results

    def checkSemantics(self, config, results):
        """Checks the schema cannot express."""
        model = config['model']['model']
        dimension = MODELS[model].dimension
        if sum(config['layout']) != dimension:
            results.add(ValidationSeverity.ERROR, JsonValidationException(
                "Layout %r does not cover the %d coordinates of %s" % (config['layout'], dimension, model)))
        if len(config['grid']) != dimension:
            results.add(ValidationSeverity.ERROR, JsonValidationException(
                "Grid %r needs one cell count per coordinate of %s" % (config["grid"], model)))
        if ('temperature' in config) == ('beta' in config):
            results.add(ValidationSeverity.ERROR, JsonValidationException(
                "Give exactly one of temperature and beta"))

        n = len(config['layout'])
        for product in config.get('products', []):
            if len(product['factors']) != n:
                results.add(ValidationSeverity.ERROR, JsonValidationException(
                    "Product %r needs one factor per subsystem (%d)" % (product['factors'], n)))
            if product['full_rank'] > config.get('eigenpairs', 4):
                results.add(ValidationSeverity.ERROR, JsonValidationException(
                    "Product %r is compared with eigenvector %d but only %d are computed"
                    % (product['factors'], product['full_rank'], config.get('eigenpairs', 4))))

        order = config.get('roothaan', {}).get('order')
        if isinstance(order, list) and sorted(order) != list(range(n)):
            results.add(ValidationSeverity.ERROR, JsonValidationException(
                "Roothaan order %r is not a permutation of the %d subsystems" % (order, n)))

        if config['K'] < 8:
            results.add(ValidationSeverity.WARN, JsonValidationException(
                "K = %d samples per cell gives very noisy columns" % config['K']))
        if model == 'butane_ua' and config['integrator']['T'] > 1e-12:
            results.add(ValidationSeverity.WARN, JsonValidationException(
                "T = %g s is long for butane; explicit Euler may blow up" % config['integrator']['T']))


class ValidationSeverity(IntEnum):
    OK = 0,
    WARN = 1,
    ERROR = 2,
    FATAL = 3


class ValidationResults(object):

    def __init__(self):
        self.severity = ValidationSeverity.OK
        self.messages = []

    def add(self, severity, exception):
        self.severity = max(severity, self.severity)
        self.messages.append(exception)


class JsonValidationException(Exception):
    pass

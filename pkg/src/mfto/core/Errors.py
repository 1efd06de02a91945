# coding: utf8

"""
Exception hierarchy.  `exit_code` is what the command line tool exits with
when the exception reaches `main()`.
"""


class MftoError(Exception):
    exit_code = 1


class ConfigError(MftoError):
    """Raise this when an experiment or settings file is unusable."""
    exit_code = 2


class ModelError(MftoError):
    exit_code = 3


class DomainError(ModelError):
    """A configuration lies outside the model's domain."""

    def __init__(self, message, q=None):
        super(DomainError, self).__init__(message)
        self.q = q


class ModelConsistencyError(ModelError):
    """The mass matrix is singular or indefinite at `q`."""

    def __init__(self, message, q=None):
        super(ModelConsistencyError, self).__init__(message)
        self.q = q


class EvaluationError(ModelError):
    """A model function returned a non-finite value."""

    def __init__(self, message, component=None):
        super(EvaluationError, self).__init__(message)
        self.component = component


class BoundaryError(ModelError):
    """Internal coordinates sit on a singular boundary of the embedding."""
    pass


class LayoutError(ModelError):
    """Subsystem layout or grid shapes do not fit together."""
    pass


class AssemblyError(MftoError):
    exit_code = 4


class BlowUpError(AssemblyError):
    """A trajectory left the finite numbers."""

    def __init__(self, message, step=None):
        super(BlowUpError, self).__init__(message)
        self.step = step


class UndefinedProbabilityError(AssemblyError):
    pass


class EffectiveModelError(AssemblyError):
    """The averaged inverse inertia is not positive definite at `node`."""

    def __init__(self, message, node=None):
        super(EffectiveModelError, self).__init__(message)
        self.node = node


class ExtrapolationError(AssemblyError):
    pass


class SpectralError(MftoError):
    exit_code = 5

    def __init__(self, message, residuals=None):
        super(SpectralError, self).__init__(message)
        self.residuals = residuals


class DegenerateDecompositionError(SpectralError):
    pass


class ComparisonError(MftoError):
    exit_code = 6

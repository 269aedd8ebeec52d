"""Exception types shared across the toolkit (mapped to CLI exit codes)."""


class ConfigurationError(ValueError):
    """Invalid configuration or a quantity the inputs cannot supply."""


class PreconditionError(ValueError):
    """An operation was called outside its documented domain."""


class NumericalFailure(RuntimeError):
    """An eigen-iteration or quadrature did not meet its tolerance."""


class CertificateError(NumericalFailure):
    """A sign that the theory guarantees came out wrong."""


class InvariantViolation(AssertionError):
    """A computed quantity broke an inequality that must hold."""

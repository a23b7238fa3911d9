"""Exception hierarchy shared by all fednorm modules."""


class FedNormError(Exception):
    """Base class for every error raised by this package."""


class EmptyInput(FedNormError, ValueError):
    pass


class NonPositiveSum(FedNormError, ValueError):
    pass


class NegativeEntry(FedNormError, ValueError):
    pass


class InvalidTau(FedNormError, ValueError):
    pass


class LengthMismatch(FedNormError, ValueError):
    pass


class BadClientId(FedNormError, IndexError):
    pass


class DimMismatch(FedNormError, ValueError):
    pass


class IndefiniteEnvelope(FedNormError, ValueError):
    pass


class TooFewSamples(FedNormError, ValueError):
    pass


class PartitionError(FedNormError, RuntimeError):
    pass


class BadSet(FedNormError, ValueError):
    pass


class MissingSnapshot(FedNormError, ValueError):
    pass


class BadP(FedNormError, ValueError):
    pass


class SetMismatch(FedNormError, ValueError):
    pass


class NonFinite(FedNormError, FloatingPointError):
    """A non-finite value appeared; ``round`` holds the offending round if known."""

    def __init__(self, message, round=None):
        super().__init__(message)
        self.round = round


class ConfigError(FedNormError, ValueError):
    pass


class UnsupportedMass(FedNormError, ValueError):
    pass


class NoConvergence(FedNormError, RuntimeError):
    """Iterative solver hit its budget; ``diagnostic`` carries the last state."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class ParseError(FedNormError, ValueError):
    pass


class ValidationError(FedNormError, ValueError):
    """Aggregated config validation failure.

    ``errors`` is a list of ``(field_path, message)`` pairs.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{path}: {msg}" for path, msg in self.errors]
        super().__init__("invalid config:\n  " + "\n  ".join(lines))


class SchemaError(FedNormError, ValueError):
    pass


class UnknownMetric(FedNormError, KeyError):
    pass

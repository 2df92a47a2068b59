"""Exception hierarchy shared by every module."""


class EIVError(Exception):
    """Base class for all package errors."""


class InputError(EIVError, ValueError):
    """Malformed user input (bad lottery, bad partition, bad JSON)."""


class SchemaError(InputError):
    """A JSON document does not match the expected layout."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class UnsupportedDimension(InputError):
    pass


class InvalidExperiment(InputError):
    """Partition or E1/E2 validity failure."""


class CollisionError(InputError):
    """Two strategies induce the same lottery but different observations."""


class SizeOverflow(InputError):
    pass


class NumericalError(EIVError):
    """Base class for numerical failures (CLI exit code 3)."""


class LPFailure(NumericalError):
    def __init__(self, status, message):
        self.status = status
        super().__init__(f"linear program failed (status {status}): {message}")


class ConditioningOnNull(NumericalError):
    pass


class NullIdentification(NumericalError):
    """An index was evaluated on an identification set of prior measure zero."""


class DegenerateTies(NumericalError):
    """Monte Carlo tie rate exceeded the regularity threshold."""


class RealizationError(EIVError):
    """A target partition cannot be expressed over the supplied generators."""

    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)

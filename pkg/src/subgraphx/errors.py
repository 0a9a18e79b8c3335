"""Exception types shared across the package."""


class SubgraphXError(Exception):
    """Base class for all package errors."""


class InputError(SubgraphXError, ValueError):
    """Caller passed an invalid argument (bad index, dimension mismatch, ...)."""


class ContractViolationError(SubgraphXError):
    """An internal precondition was violated (e.g. disconnected search state)."""


class CapacityError(SubgraphXError):
    """Request exceeds a hard size guard (factorial / exponential blowup)."""


class WeightFormatError(SubgraphXError, ValueError):
    """Weight file does not conform to the serialization schema."""


class DatasetFormatError(SubgraphXError, ValueError):
    """Dataset file does not conform to the line-delimited record schema."""


class TrainingDivergedError(SubgraphXError):
    """Loss became non-finite during training."""

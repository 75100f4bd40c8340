"""Exception types shared across the package."""


class PairmatchError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(PairmatchError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DegenerateInputError(PairmatchError, ValueError):
    """Input is structurally too small or empty for the operation."""


class ContractError(PairmatchError, ValueError):
    """A documented precondition was violated (bad label, non-scalar root, ...)."""


class SequenceLengthError(PairmatchError, ValueError):
    """Token sequence exceeds the positional embedding table."""


class SamplingError(PairmatchError, ValueError):
    """Dataset cannot support the requested sampling scheme."""


class DatasetParseError(PairmatchError, ValueError):
    """A persisted dataset or embedding file is malformed."""


class MetricError(PairmatchError, ValueError):
    """A metric is undefined for the given inputs (singleton class, 0/0, ...)."""


class TrainingDivergedError(PairmatchError, RuntimeError):
    """Loss became non-finite during optimization."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")

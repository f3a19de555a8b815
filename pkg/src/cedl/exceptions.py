"""Exception hierarchy shared by every module in the package."""


class CEDLError(Exception):
    """Base class for all package errors."""


class DimensionError(CEDLError, ValueError):
    """Array or vector shapes do not agree."""


class SpecError(CEDLError, ValueError):
    """An architecture or generator specification is inconsistent."""


class InputError(CEDLError, ValueError):
    """Input data contains non-finite values or is otherwise unusable."""


class EvaluationError(CEDLError, ArithmeticError):
    """A function evaluated to a non-finite value."""


class CacheError(CEDLError, RuntimeError):
    """A forward cache does not belong to the model or batch it is used with."""


class LabelError(CEDLError, ValueError):
    """Labels are outside {0, 1}."""


class EmptyBatchError(CEDLError, ValueError):
    pass


class DegenerateSplitError(CEDLError, ValueError):
    """A class required by the supervised setting is absent."""


class GradientError(CEDLError, ValueError):
    """A gradient contains non-finite entries."""


class FormatError(CEDLError, ValueError):
    """A file does not follow its documented format."""


class IntegrityError(FormatError):
    """A checkpoint payload is truncated or fails its checksum."""


class InsufficientDataError(CEDLError, ValueError):
    pass


class CapacityError(CEDLError, ValueError):
    """Not enough anomalies are available to reach a requested proportion."""

    def __init__(self, message, max_proportion=None):
        super().__init__(message)
        self.max_proportion = max_proportion


class DivergenceError(CEDLError, ArithmeticError):
    """Training produced a non-finite loss."""


class UndefinedMetricError(CEDLError, ValueError):
    """A ranking metric is undefined for the given labels."""


class ProtocolError(CEDLError, ValueError):
    """An experiment protocol cannot be run on the given data."""


class ExperimentError(CEDLError):
    """Wraps a failure inside an experiment cell with its identifier."""

    def __init__(self, experiment_id, cause):
        super().__init__(f"[{experiment_id}] {type(cause).__name__}: {cause}")
        self.experiment_id = experiment_id
        self.cause = cause

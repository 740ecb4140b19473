"""Exception hierarchy shared by every pipeline module."""

from __future__ import annotations

from typing import Any


class PipelineError(Exception):
    """Base class for all pipeline failures."""


class DomainError(PipelineError, ValueError):
    """A numeric argument is outside the domain of an operation."""


class ShapeError(PipelineError, ValueError):
    """Array or tensor shapes do not fit the operation."""


class SampleValidationError(PipelineError, ValueError):
    """A QuadrupleSample (or one of its parts) breaks an invariant."""


class ShapeMismatchError(SampleValidationError):
    pass


class LabelRangeError(SampleValidationError):
    pass


class ValueRangeError(SampleValidationError):
    pass


class ClassCountMismatchError(SampleValidationError):
    pass


class ConfigError(PipelineError):
    pass


class DatasetIOError(PipelineError):
    def __init__(self, message: str, path: Any = None):
        super().__init__(f"{message}: {path}" if path is not None else message)
        self.path = path


class StageOrderError(PipelineError):
    pass


class NumericError(PipelineError, ArithmeticError):
    pass


class CheckpointError(PipelineError):
    pass


class FrozenWeightsError(PipelineError):
    """A network that must stay frozen changed its weights."""


class TrainingDivergedError(NumericError):
    """A loss became non-finite; carries the iteration and the last report."""

    def __init__(self, iteration: int, report: Any = None, stage: Any = None):
        where = f" (stage {stage})" if stage is not None else ""
        super().__init__(f"Non-finite loss at iteration {iteration}{where}")
        self.iteration = iteration
        self.report = report
        self.stage = stage


class ArgumentError(PipelineError, TypeError):
    """A required argument is missing or of the wrong kind."""

"""
Compiler Errors
===============

One exception hierarchy for every compiler, rooted at NarrowForgeError.
Each error carries the structured context a caller needs to report it
(layer index, stage index, best error reached, JSON location).
"""

from typing import Any, Optional, Sequence


class NarrowForgeError(Exception):
    """Base class for all narrowforge errors."""


class DimensionMismatchError(NarrowForgeError):
    """Affine map shapes do not chain."""

    def __init__(self, message: str, layer_index: Optional[int] = None):
        self.layer_index = layer_index
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)


class NotInvertibleError(NarrowForgeError):
    """A layer or affine map cannot be inverted."""

    def __init__(self, message: str, layer_index: Optional[int] = None):
        self.layer_index = layer_index
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)


class NonMonotoneError(NarrowForgeError):
    """A function required to be strictly increasing is not."""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None):
        self.point = None if point is None else [float(v) for v in point]
        super().__init__(message)


class NetworkFormatError(NarrowForgeError):
    """A JSON document failed to parse or validate."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ToleranceNotReachedError(NarrowForgeError):
    """An approximation ran out of budget before reaching its tolerance."""

    def __init__(self, message: str, best_error: float):
        self.best_error = float(best_error)
        super().__init__(f"{message} (best error {best_error:.3e})")


class RidgeFitError(ToleranceNotReachedError):
    """fit_ridge could not reach tol within max_terms; carries the best fit."""

    def __init__(self, message: str, best: Any, best_error: float):
        self.best = best
        super().__init__(message, best_error)


class BudgetSplitError(NarrowForgeError):
    """An error budget could not be split (unbounded intervals or Lipschitz)."""


class SharpenFitError(NarrowForgeError):
    """The sharpening interpolant could not be fitted well enough."""


class StageCompileError(NarrowForgeError):
    """A program stage failed to compile."""

    def __init__(self, stage_index: int, cause: Exception):
        self.stage_index = stage_index
        self.cause = cause
        super().__init__(f"stage {stage_index}: {cause}")


class WidthBudgetError(NarrowForgeError):
    """An emitted network exceeds the width it is allowed."""


class CompileTimeoutError(NarrowForgeError):
    """A compile exceeded its wall-clock budget."""

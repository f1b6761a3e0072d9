"""Input validation helpers shared across the package.

All checks raise :class:`ValidationError` (a ``ValueError``) so estimator
code composes with the usual scikit-learn error handling conventions.
"""

from __future__ import annotations

import numpy as np


class ValidationError(ValueError):
    """An input violates a documented precondition or invariant."""


class AnnotationParseError(ValidationError):
    """An annotation file line could not be parsed."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class CheckpointError(RuntimeError):
    """A checkpoint file is unreadable or inconsistent with expectations."""


class TrainingDivergedError(RuntimeError):
    """A loss component became non-finite during training."""

    def __init__(self, component: str, step: int, value: float):
        super().__init__(
            f"non-finite loss component '{component}' (value {value!r}) at step {step}"
        )
        self.component = component
        self.step = step


def check_image(arr, name: str = "image") -> np.ndarray:
    """Validate an HxWx3 float image with values in [0, 1] and return it."""
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"{name}: expected HxWx3 array, got shape {arr.shape}")
    if arr.shape[0] < 8 or arr.shape[1] < 8:
        raise ValidationError(f"{name}: spatial size must be at least 8x8, got {arr.shape[:2]}")
    if not np.issubdtype(arr.dtype, np.floating):
        raise ValidationError(f"{name}: expected float dtype, got {arr.dtype}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name}: contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValidationError(f"{name}: pixel values must lie in [0, 1]")
    return arr


def check_same_shape(a, b, name_a: str = "a", name_b: str = "b") -> None:
    a = np.asarray(a) if not hasattr(a, "shape") else a
    b = np.asarray(b) if not hasattr(b, "shape") else b
    if tuple(a.shape) != tuple(b.shape):
        raise ValidationError(
            f"shape mismatch: {name_a} has {tuple(a.shape)}, {name_b} has {tuple(b.shape)}"
        )


def check_binary_mask(arr, name: str = "mask") -> np.ndarray:
    """Validate an HxW array containing only zeros and ones."""
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValidationError(f"{name}: expected HxW array, got shape {arr.shape}")
    vals = np.unique(arr)
    if not np.isin(vals, (0, 1)).all():
        raise ValidationError(f"{name}: entries must be 0 or 1, found {vals[:8]}")
    return arr


def check_positive(value, name: str) -> None:
    if not value > 0:
        raise ValidationError(f"{name} must be positive, got {value!r}")


def check_non_negative(value, name: str) -> None:
    if value < 0:
        raise ValidationError(f"{name} must be non-negative, got {value!r}")


def check_unit_open(value, name: str) -> None:
    """Require ``0 < value < 1``."""
    if not (0.0 < value < 1.0):
        raise ValidationError(f"{name} must lie strictly inside (0, 1), got {value!r}")

"""Rotational minimal surfaces, minimal theta-graphs and lamination diagnostics."""

__version__ = "0.1.0"

from .geom import (
    DomainError,
    HalfDiskGrid,
    MetricProfile,
    StripPoint,
    cone_angle,
    cone_distance,
    lambda_weight,
    strip_coords,
    strip_curvature,
)

__all__ = [
    "__version__",
    "DomainError",
    "HalfDiskGrid",
    "MetricProfile",
    "StripPoint",
    "cone_angle",
    "cone_distance",
    "lambda_weight",
    "strip_coords",
    "strip_curvature",
]

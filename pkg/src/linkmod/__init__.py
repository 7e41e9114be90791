"""Topology of planar multipolygon linkages: exact classification and a sampling oracle."""
from __future__ import annotations

from .core import (
    Configuration,
    FreeLinkageSpec,
    LengthRange,
    LinkageError,
    MultipolygonSpec,
    ProjectionError,
    end_to_end_distance,
    length_range,
    project_to_variety,
    residuals,
)
from .multiquad import MultiquadSpec, NonGenericError, classify

__version__ = "0.1.0"

__all__ = [
    "Configuration",
    "FreeLinkageSpec",
    "LengthRange",
    "LinkageError",
    "MultipolygonSpec",
    "MultiquadSpec",
    "NonGenericError",
    "ProjectionError",
    "classify",
    "end_to_end_distance",
    "length_range",
    "project_to_variety",
    "residuals",
]

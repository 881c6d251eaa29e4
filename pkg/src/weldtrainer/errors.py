"""Exception hierarchy for the pipeline.

Every error carries the pipeline stage it came from so the service layer can
report ``ERROR(code, stage)`` without guessing.
"""

from __future__ import annotations


class WeldError(Exception):
    """Base class for all pipeline errors."""

    stage = "pipeline"

    @property
    def code(self) -> str:
        return type(self).__name__


# seam localization

class NoGrooveFound(WeldError):
    stage = "groove_segmentation"


class NoCandidateLines(WeldError):
    stage = "line_filtering"


class AmbiguousSeam(WeldError):
    stage = "endpoint_classification"


class DepthHole(WeldError):
    stage = "depth_lift"


# confidence map

class ShapeMismatch(WeldError):
    stage = "confidence_map"


# arc tracking

class DegenerateContour(WeldError):
    stage = "contour_analysis"


class NoArcDetected(WeldError):
    stage = "arc_tracking"


# guidance

class InsufficientMotion(WeldError):
    stage = "direction_estimation"


class DegenerateTarget(WeldError):
    stage = "scoring"


# session service

class InvalidConfig(WeldError):
    stage = "session"


class UnknownSession(WeldError):
    stage = "session"


class OutOfOrderFrame(WeldError):
    stage = "session"


class TooFewFrames(WeldError):
    stage = "session"


class CorruptRecord(WeldError):
    stage = "record"

"""Exception types shared across the package."""

from __future__ import annotations


class FmcfError(Exception):
    """Base class for all package errors."""


class ConfigError(FmcfError):
    """Invalid configuration. ``field`` names the offending entry (dotted path)."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class MeshQualityError(FmcfError):
    """Degenerate or badly graded node spacing. Carries the offending node index."""

    def __init__(self, message: str, node_index: int | None = None):
        self.node_index = node_index
        if node_index is not None:
            message = f"{message} (node {node_index})"
        super().__init__(message)


class OrientationError(FmcfError):
    """Curve nodes are not positively (counterclockwise) oriented."""


class FrameError(FmcfError):
    """Tangent frame vectors are not orthonormal."""


class ExtinctionError(FmcfError):
    """Closed-form radial solution queried at or past its extinction time."""

    def __init__(self, message: str, extinction_time: float):
        self.extinction_time = extinction_time
        super().__init__(f"{message} (extinction at t={extinction_time!r})")


class TraceError(FmcfError):
    """A flow trace does not provide what a verification step needs."""


class StepRejectedError(FmcfError):
    """A time step produced an unacceptable mesh; the caller may retry with a
    smaller dt."""

    def __init__(self, message: str, node_index: int | None = None):
        self.node_index = node_index
        super().__init__(message)


class FlowError(FmcfError):
    """Unrecoverable failure while advancing a flow. ``trace`` holds the partial
    trace recorded up to the failure."""

    def __init__(self, message: str, trace=None):
        self.trace = trace
        super().__init__(message)

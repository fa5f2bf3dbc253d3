"""Error types shared across the pipeline.

Every error carries the process exit code the command-line front end maps
it to: 1 usage, 2 data, 3 numeric trouble.
"""


class RoadCourseError(Exception):
    exit_code = 2


class UsageError(RoadCourseError):
    exit_code = 1


class InvalidInputError(RoadCourseError, ValueError):
    """Caller handed in data that violates a documented precondition."""


class ConfigError(RoadCourseError):
    """Inconsistent configuration, e.g. weights not matching a topology."""


class DataError(RoadCourseError):
    """Broken or missing external data (files, formats)."""


class NumericError(RoadCourseError):
    exit_code = 3


class GenerationError(RoadCourseError):
    """Scenario generation produced infeasible geometry."""


class MapUnavailableError(RoadCourseError):
    """Not enough shape points around the query pose; pipeline degrades."""


class NoRoadError(RoadCourseError):
    """No usable road component in a class membership map."""


class NoBorderError(RoadCourseError):
    """Road component too small to carry a contour."""


class InitializationError(RoadCourseError):
    """No position source available to initialize matching."""

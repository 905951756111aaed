"""Exception types raised across the package."""


class DriverLocError(Exception):
    """Base class for all package errors."""


class MalformedRow(DriverLocError):
    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        msg = f"malformed keypoint row at line {line_no}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class NonMonotonicFrames(DriverLocError):
    pass


class UpsampleRequested(DriverLocError):
    pass


class EmptySeries(DriverLocError):
    pass


class DimensionMismatch(DriverLocError):
    pass


class DegenerateGroup(DriverLocError):
    pass


class ZeroVariance(DriverLocError):
    pass


class NoValidCandidate(DriverLocError):
    pass


class OverlappingActivities(DriverLocError):
    pass


class ConfigError(DriverLocError):
    pass

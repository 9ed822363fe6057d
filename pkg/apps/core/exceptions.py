"""Exception hierarchy shared by the simulator apps."""


class ForkliftSimError(Exception):
    """Base class for all simulator errors"""


class DomainError(ForkliftSimError, ValueError):
    """A value lies outside the domain an operation accepts"""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class DegenerateConfigurationError(ForkliftSimError):
    """Point pairs do not determine a unique rigid transform"""


class RegistrationError(ForkliftSimError):
    """ICP could not produce a registration"""


class TooFewPointsError(RegistrationError):
    def __init__(self, src_count, dst_count, min_points):
        super().__init__(
            f"ICP needs at least {min_points} points per cloud "
            f"(source={src_count}, measured={dst_count})"
        )
        self.src_count = src_count
        self.dst_count = dst_count
        self.min_points = min_points


class NoCorrespondencesError(RegistrationError):
    def __init__(self, max_dist):
        super().__init__(f"No correspondence within {max_dist:.3f} m")
        self.max_dist = max_dist


class OdometryRegressionError(ForkliftSimError):
    def __init__(self, previous, current):
        super().__init__(
            f"Odometry went backwards: {current:.6f} m after {previous:.6f} m"
        )
        self.previous = previous
        self.current = current

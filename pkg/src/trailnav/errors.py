"""Exception types raised across the planning stack."""


class TrailError(Exception):
    """Base class for all library errors."""


class OutOfBounds(TrailError, ValueError):
    pass


class DegenerateSpeed(TrailError, ValueError):
    pass


class RegionOutOfBounds(TrailError, ValueError):
    pass


class ShapeMismatch(TrailError, ValueError):
    pass


class NoPath(TrailError):
    pass


class OutOfGrid(TrailError, ValueError):
    pass


class TooFewPoints(TrailError, ValueError):
    pass


class DegenerateControl(TrailError, ValueError):
    pass


class InfeasibleBoundary(TrailError, ValueError):
    pass


class SolverDiverged(TrailError):
    pass


class ConfigInvalid(TrailError, ValueError):
    pass


class EmptyLog(TrailError, ValueError):
    pass

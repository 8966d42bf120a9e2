"""Exception hierarchy shared by every module of the toolkit."""


class ControlError(Exception):
    """Base class; ``code`` is the machine-readable name used by the CLI."""

    @property
    def code(self) -> str:
        return type(self).__name__


class SingularMatrix(ControlError):
    pass


class NoConvergence(ControlError):
    pass


class NotHurwitz(ControlError):
    pass


class InvalidParams(ControlError):
    pass


class DimensionMismatch(ControlError):
    pass


class NotSISO(ControlError):
    pass


class DegenerateNumerator(ControlError):
    pass


class Uncontrollable(ControlError):
    pass


class Unobservable(ControlError):
    pass


class NotStabilizable(ControlError):
    pass


class MissingIntegralGain(ControlError):
    pass


class Diverged(ControlError):
    pass


class PoleOnGrid(ControlError):
    pass


class UnstableClosedLoop(ControlError):
    pass


class ObjectiveNaN(ControlError):
    def __init__(self, point, message="objective returned NaN"):
        super().__init__(f"{message} at {list(point)}")
        self.point = point

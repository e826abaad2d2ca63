from echo_lab.exceptions import EchoLabError
from physmodel.exceptions import UnknownTransition

__all__ = ["SpecPrepError", "WindowOutsideGrid", "InvalidSchedule", "UnknownTransition"]


class SpecPrepError(EchoLabError):
    code = "SPECPREP_ERROR"


class WindowOutsideGrid(SpecPrepError):
    code = "WINDOW_OUTSIDE_GRID"


class InvalidSchedule(SpecPrepError):
    code = "INVALID_SCHEDULE"

from echo_lab.exceptions import EchoLabError
from physmodel.exceptions import UnknownTransition
from protocols.exceptions import OverlappingPulses

__all__ = ["EmptyWindow", "IonEnsembleError", "OverlappingPulses", "UnknownTransition"]


class IonEnsembleError(EchoLabError):
    code = "IONENSEMBLE_ERROR"


class EmptyWindow(IonEnsembleError):
    code = "EMPTY_WINDOW"

from echo_lab.exceptions import EchoLabError


class ProtocolError(EchoLabError):
    code = "PROTOCOL_ERROR"


class NonMonotoneTimings(ProtocolError):
    code = "NON_MONOTONE_TIMINGS"


class EchoOverlapsPulse(ProtocolError):
    code = "ECHO_OVERLAPS_PULSE"


class OverlappingPulses(ProtocolError):
    code = "OVERLAPPING_PULSES"


class UnknownVariant(ProtocolError):
    code = "UNKNOWN_VARIANT"


class InfeasibleConstraints(ProtocolError):
    code = "INFEASIBLE_CONSTRAINTS"

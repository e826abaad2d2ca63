from echo_lab.exceptions import EchoLabError


class PulseShapeError(EchoLabError):
    code = "PULSESHAPE_ERROR"


class InvalidPulse(PulseShapeError):
    code = "INVALID_PULSE"


class IntegrationFailure(PulseShapeError):
    code = "INTEGRATION_FAILURE"


class CalibrationFailed(PulseShapeError):
    code = "CALIBRATION_FAILED"

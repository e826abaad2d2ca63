from echo_lab.exceptions import EchoLabError


class ExperimentError(EchoLabError):
    code = "EXPERIMENT_ERROR"


class ConfigInvalid(ExperimentError):
    """A configuration value failed validation; the message starts with its key."""

    code = "CONFIG_INVALID"


class IoFailure(ExperimentError):
    code = "IO_FAILURE"


class UnknownVariable(ExperimentError):
    code = "UNKNOWN_VARIABLE"


class ManifestMismatch(ExperimentError):
    code = "MANIFEST_MISMATCH"

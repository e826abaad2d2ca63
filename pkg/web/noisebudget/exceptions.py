import math

from echo_lab.exceptions import EchoLabError


class NoiseBudgetError(EchoLabError):
    code = "NOISEBUDGET_ERROR"


class MissingPopulationTrace(NoiseBudgetError):
    code = "MISSING_POPULATION_TRACE"


class ZeroNoise(NoiseBudgetError):
    """SNR of a noiseless window; ``marker`` is what ``safe_snr`` returns."""

    code = "ZERO_NOISE"
    marker = math.inf


class BranchingUnreachable(NoiseBudgetError):
    code = "BRANCHING_UNREACHABLE"

from echo_lab.exceptions import EchoLabError


class AnalysisError(EchoLabError):
    code = "ANALYSIS_ERROR"


class NoCounts(AnalysisError):
    code = "NO_COUNTS"


class MissingBasis(AnalysisError):
    code = "MISSING_BASIS"


class InvalidBudget(AnalysisError):
    code = "INVALID_BUDGET"


class InvalidQubit(AnalysisError):
    code = "INVALID_QUBIT"

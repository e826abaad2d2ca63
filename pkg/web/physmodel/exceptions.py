from echo_lab.exceptions import EchoLabError


class PhysModelError(EchoLabError):
    code = "PHYSMODEL_ERROR"


class NegativeRate(PhysModelError):
    code = "NEGATIVE_RATE"


class FrequencyClosureViolated(PhysModelError):
    code = "FREQUENCY_CLOSURE_VIOLATED"


class BranchingOutOfRange(PhysModelError):
    code = "BRANCHING_OUT_OF_RANGE"


class LevelStructureInvalid(PhysModelError):
    code = "LEVEL_STRUCTURE_INVALID"


class DegenerateCarriers(PhysModelError):
    code = "DEGENERATE_CARRIERS"


class InvalidModel(PhysModelError):
    """Aggregate of every violation found by ``validate_model``."""

    code = "INVALID_MODEL"

    def __init__(self, violations: list[PhysModelError]):
        self.violations = list(violations)
        summary = "; ".join(f"{v.code}: {v}" for v in self.violations)
        super().__init__(summary)


class UnknownTransition(PhysModelError):
    code = "UNKNOWN_TRANSITION"


class UnnormalizedProfile(PhysModelError):
    code = "UNNORMALIZED_PROFILE"


class InvalidGeometry(PhysModelError):
    code = "INVALID_GEOMETRY"


class UnknownModelKey(PhysModelError):
    """A model file or mapping carries a key the model does not define."""

    code = "UNKNOWN_MODEL_KEY"

    def __init__(self, key: str):
        self.key = key
        super().__init__(f"{key}: unknown key")


class MalformedModel(PhysModelError):
    """A model file or mapping that cannot be read into the model types."""

    code = "MALFORMED_MODEL"

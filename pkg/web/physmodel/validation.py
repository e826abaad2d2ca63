"""
Model validation.

validate_model collects every violation instead of stopping at the first, the
same way a form gathers all field errors before reporting them.
"""

import itertools
import logging
import math
from dataclasses import dataclass

from .exceptions import (
    BranchingOutOfRange,
    DegenerateCarriers,
    FrequencyClosureViolated,
    InvalidModel,
    LevelStructureInvalid,
    NegativeRate,
    PhysModelError,
)
from .levels import BASIS, EXCITED, GROUND, LevelScheme
from .material import MaterialParams

logger = logging.getLogger(__name__)

CLOSURE_TOLERANCE = 1.0  # Hz
REQUIRED_TRANSITIONS = ("f15", "f35", "f13", "f33")


@dataclass(frozen=True)
class ValidatedModel:
    scheme: LevelScheme
    params: MaterialParams


def _scheme_violations(scheme: LevelScheme, tolerance: float) -> list[PhysModelError]:
    violations: list[PhysModelError] = []
    labels = [level.label for level in scheme.levels]
    if sorted(labels) != sorted(BASIS):
        violations.append(
            LevelStructureInvalid(f"levels must be {BASIS}, got {tuple(labels)}")
        )
        return violations

    kinds = {level.label: level.kind for level in scheme.levels}
    n_ground = sum(kind == GROUND for kind in kinds.values())
    n_excited = sum(kind == EXCITED for kind in kinds.values())
    if n_ground != 2 or n_excited != 2:
        violations.append(
            LevelStructureInvalid(
                "need two ground and two excited levels, "
                f"got {n_ground} and {n_excited}"
            )
        )

    names = [t.name for t in scheme.transitions]
    missing = [name for name in REQUIRED_TRANSITIONS if name not in names]
    if missing:
        violations.append(LevelStructureInvalid(f"missing transitions {missing}"))
        return violations

    for transition in scheme.transitions:
        lower, upper = kinds.get(transition.lower), kinds.get(transition.upper)
        if lower != GROUND or upper != EXCITED:
            violations.append(
                LevelStructureInvalid(
                    f"{transition.name} must join a ground level to an excited level"
                )
            )
        if transition.dipole_strength < 0:
            violations.append(
                NegativeRate(f"{transition.name}.dipole_strength is negative")
            )

    for a, b in itertools.combinations(scheme.transitions, 2):
        if a.carrier == b.carrier:
            violations.append(
                DegenerateCarriers(f"{a.name} and {b.name} share carrier {a.carrier}")
            )

    closure = scheme.closure_error()
    if not abs(closure) <= tolerance:
        violations.append(
            FrequencyClosureViolated(
                f"f15 + f33 - f13 - f35 = {closure:.6g} Hz exceeds {tolerance} Hz"
            )
        )
    return violations


def _params_violations(params: MaterialParams) -> list[PhysModelError]:
    violations: list[PhysModelError] = []
    for name in MaterialParams.field_names():
        value = getattr(params, name)
        if math.isnan(value) or value < 0:
            violations.append(NegativeRate(f"{name} = {value} must be nonnegative"))
        elif math.isinf(value) and name != "t1_excited":
            violations.append(NegativeRate(f"{name} must be finite"))
    if params.t1_excited == 0:
        violations.append(NegativeRate("t1_excited must be positive"))
    branching = params.branching_e3_to_g3
    if not 0.0 <= branching <= 1.0:
        violations.append(
            BranchingOutOfRange(f"branching_e3_to_g3 = {branching} not in [0, 1]")
        )
    return violations


def validate_model(
    scheme: LevelScheme,
    params: MaterialParams,
    closure_tolerance: float = CLOSURE_TOLERANCE,
) -> ValidatedModel:
    """
    Check the scheme and material invariants.

    Returns:
        ValidatedModel wrapping the unchanged inputs

    Raises:
        InvalidModel: listing every violation found
    """
    violations = _scheme_violations(scheme, closure_tolerance)
    violations += _params_violations(params)
    if violations:
        logger.warning(f"Model rejected with {len(violations)} violation(s)")
        raise InvalidModel(violations)
    return ValidatedModel(scheme=scheme, params=params)

"""
Model files and plain-mapping (de)serialization.

A model file is TOML with up to three tables:

    [scheme]      optical_carrier, ground_splitting, excited_splitting
    [material]    any MaterialParams field
    [geometry]    any Geometry field

Every key is checked; unknown keys are refused with their dotted name, and
values of the wrong type or missing required keys raise ``MalformedModel``
naming the dotted key.
"""

import logging
import tomllib
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any

from .exceptions import MalformedModel, UnknownModelKey
from .geometry import Geometry
from .levels import Level, LevelScheme, Transition
from .material import MaterialParams
from .validation import ValidatedModel, validate_model

logger = logging.getLogger(__name__)

SCHEME_SHORTHAND_KEYS = ("optical_carrier", "ground_splitting", "excited_splitting")


def _table(section: str, value: Any) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise MalformedModel(f"{section}: expected a table, got {value!r}")
    return value


def _tables(section: str, value: Any) -> list[dict[str, Any]]:
    if not isinstance(value, list):
        raise MalformedModel(f"{section}: expected an array of tables, got {value!r}")
    return [_table(f"{section}[{i}]", entry) for i, entry in enumerate(value)]


def _reject_unknown(section: str, mapping: dict[str, Any], allowed) -> None:
    for key in mapping:
        if key not in allowed:
            raise UnknownModelKey(f"{section}.{key}")


def _required(section: str, mapping: dict[str, Any], key: str) -> Any:
    if key not in mapping:
        raise MalformedModel(f"{section}.{key}: required")
    return mapping[key]


def _number(section: str, key: str, value: Any) -> float:
    # bool is an int subclass; a TOML true is not a rate
    if isinstance(value, bool):
        raise MalformedModel(f"{section}.{key}: expected a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError) as e:
        raise MalformedModel(
            f"{section}.{key}: expected a number, got {value!r}"
        ) from e


def _numbers(section: str, data: dict[str, Any]) -> dict[str, float]:
    return {key: _number(section, key, value) for key, value in data.items()}


def scheme_to_dict(scheme: LevelScheme) -> dict[str, Any]:
    return {
        "levels": [asdict(level) for level in scheme.levels],
        "transitions": [asdict(transition) for transition in scheme.transitions],
    }


def scheme_from_dict(data: dict[str, Any]) -> LevelScheme:
    data = _table("scheme", data)
    if set(data) <= set(SCHEME_SHORTHAND_KEYS):
        return LevelScheme.default(**_numbers("scheme", data))
    _reject_unknown("scheme", data, ("levels", "transitions"))
    level_keys = [f.name for f in fields(Level)]
    transition_keys = [f.name for f in fields(Transition)]
    levels = []
    for entry in _tables("scheme.levels", _required("scheme", data, "levels")):
        _reject_unknown("scheme.levels", entry, level_keys)
        energy = _required("scheme.levels", entry, "energy")
        levels.append(
            Level(
                str(_required("scheme.levels", entry, "label")),
                str(_required("scheme.levels", entry, "kind")),
                _number("scheme.levels", "energy", energy),
            )
        )
    transitions = []
    section = "scheme.transitions"
    for entry in _tables(section, _required("scheme", data, "transitions")):
        _reject_unknown(section, entry, transition_keys)
        carrier = _required(section, entry, "carrier")
        transitions.append(
            Transition(
                str(_required(section, entry, "name")),
                str(_required(section, entry, "lower")),
                str(_required(section, entry, "upper")),
                _number(section, "carrier", carrier),
                _number(section, "dipole_strength", entry.get("dipole_strength", 1.0)),
            )
        )
    return LevelScheme(levels=tuple(levels), transitions=tuple(transitions))


def params_from_dict(data: Any) -> MaterialParams:
    data = _table("material", data)
    _reject_unknown("material", data, MaterialParams.field_names())
    return MaterialParams(**_numbers("material", data))


def geometry_from_dict(data: dict[str, Any]) -> Geometry:
    data = _table("geometry", data)
    _reject_unknown("geometry", data, [f.name for f in fields(Geometry)])
    return Geometry(**_numbers("geometry", data))


def model_to_dict(model: ValidatedModel) -> dict[str, Any]:
    return {"scheme": scheme_to_dict(model.scheme), "material": asdict(model.params)}


def model_from_dict(data: dict[str, Any]) -> ValidatedModel:
    _reject_unknown("model", data, ("scheme", "material", "geometry"))
    scheme = scheme_from_dict(data.get("scheme", {}))
    params = params_from_dict(data.get("material", {}))
    return validate_model(scheme, params)


def load_model(path: Path | str) -> tuple[ValidatedModel, Geometry]:
    """
    Read and validate a TOML model file.

    Raises:
        OSError: the file cannot be opened
        MalformedModel: the file is not TOML, or a value has the wrong type
        UnknownModelKey: a table carries a key the model does not define
        InvalidModel: the values violate a physical constraint
    """
    path = Path(path)
    with path.open("rb") as handle:
        try:
            data = tomllib.load(handle)
        except tomllib.TOMLDecodeError as e:
            raise MalformedModel(f"{path}: {e}") from e
    geometry = geometry_from_dict(data.get("geometry", {}))
    model = model_from_dict({k: v for k, v in data.items() if k != "geometry"})
    logger.info(f"Loaded model from {path}")
    return model, geometry

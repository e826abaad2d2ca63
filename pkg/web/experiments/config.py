"""
Experiment files.

An experiment file is TOML with the tables [model], [sequence], [run] and
[output]. Every table goes through its form in ``forms.py``; any key the form
does not declare is refused. Errors name the dotted key, e.g. ``run.trials``.
"""

import logging
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from django import forms
from django.conf import settings

from physmodel.config import load_model
from physmodel.exceptions import InvalidGeometry, MalformedModel, UnknownModelKey
from physmodel.geometry import Geometry
from physmodel.levels import LevelScheme
from physmodel.material import MaterialParams
from physmodel.validation import validate_model
from protocols.sequences import NlpeTimings

from .exceptions import ConfigInvalid, IoFailure, UnknownVariable
from .forms import EXPERIMENT_PROTOCOLS, NUMERIC_FIELDS, SECTION_FORMS

logger = logging.getLogger(__name__)

TIMING_KEYS = ("t0_us", "t1_us", "t2_us", "t3_us", "t4_us")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    raw: dict[str, Any]
    params: MaterialParams
    scheme: LevelScheme
    geometry: Geometry
    sequence: dict[str, Any]
    run: dict[str, Any]
    output: dict[str, Any]
    base_dir: Path = field(default_factory=Path.cwd)
    name: str = "experiment"

    @property
    def experiment(self) -> str:
        return self.run["experiment"]

    @property
    def seed(self) -> int:
        return self.run["seed"]

    @property
    def timings(self) -> NlpeTimings:
        return NlpeTimings(*(self.sequence[key] * 1e-6 for key in TIMING_KEYS))

    def with_value(self, key: str, value: Any) -> "ExperimentConfig":
        """A copy with one dotted key replaced, validated again."""
        section, _, name = key.partition(".")
        raw = {table: dict(values) for table, values in self.raw.items()}
        raw.setdefault(section, {})[name] = value
        return config_from_dict(raw, self.base_dir, self.name)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return self.with_value("run.seed", seed)


def _validate_section(section: str, data: Any) -> forms.Form:
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{section}: expected a table")
    form_class = SECTION_FORMS[section]
    for key in data:
        if key not in form_class.base_fields:
            raise ConfigInvalid(f"{section}.{key}: unknown key")
    defaults = {
        name: form_field.initial
        for name, form_field in form_class.base_fields.items()
        if form_field.initial is not None
    }
    form = form_class(data={**defaults, **data})
    if not form.is_valid():
        name, messages = next(iter(form.errors.items()))
        key = section if name == "__all__" else f"{section}.{name}"
        raise ConfigInvalid(f"{key}: {' '.join(messages)}")
    return form


def config_from_dict(
    data: dict[str, Any], base_dir: Path | str = ".", name: str = "experiment"
) -> ExperimentConfig:
    """
    Validate a parsed experiment file.

    ``base_dir`` resolves a relative ``model.file``.

    Raises:
        ConfigInvalid: an unknown table or key, a value failing its form, or a
            model file that is not a well-formed model
        InvalidModel: material overrides break the physical model
        IoFailure: the model file cannot be read
    """
    base_dir = Path(base_dir)
    for section in data:
        if section not in SECTION_FORMS:
            raise ConfigInvalid(f"{section}: unknown table")
    if "run" not in data:
        raise ConfigInvalid("run.experiment: a [run] table is required")
    run = _validate_section("run", data["run"]).cleaned_data
    allowed = EXPERIMENT_PROTOCOLS[run["experiment"]]
    sequence_data = data.get("sequence", {})
    if isinstance(sequence_data, dict):
        sequence_data = {"protocol": allowed[0], **sequence_data}
    sequence = _validate_section("sequence", sequence_data).cleaned_data
    output = _validate_section("output", data.get("output", {})).cleaned_data

    model_form = _validate_section("model", data.get("model", {}))
    scheme, geometry, params = LevelScheme.default(), Geometry(), MaterialParams()
    if model_form.cleaned_data["file"]:
        path = base_dir / model_form.cleaned_data["file"]
        try:
            model, geometry = load_model(path)
        except OSError as e:
            raise IoFailure(f"model.file {path}: {e.strerror or e}") from e
        except (MalformedModel, UnknownModelKey, InvalidGeometry) as e:
            raise ConfigInvalid(f"model.file {path}: {e}") from e
        scheme, params = model.scheme, model.params
    params = params.with_changes(**model_form.overrides())
    params = validate_model(scheme, params).params

    if sequence["protocol"] not in allowed:
        raise ConfigInvalid(
            f"sequence.protocol: {run['experiment']} runs {', '.join(allowed)}, "
            f"got {sequence['protocol']}"
        )
    if sequence["protocol"] != allowed[0] and run["ions"] == 0:
        raise ConfigInvalid(
            f"run.ions: the {sequence['protocol']} variant needs a Monte-Carlo "
            "ensemble"
        )
    return ExperimentConfig(
        raw=data,
        params=params,
        scheme=scheme,
        geometry=geometry,
        sequence=sequence,
        run=run,
        output=output,
        base_dir=base_dir,
        name=name,
    )


def resolve_config_path(name: Path | str) -> Path:
    """A path as given, or the bundled config of that name."""
    path = Path(name)
    bundled = Path(settings.ECHO_LAB_CONFIG_DIR) / f"{path.stem}.toml"
    if not path.exists() and path.parent == Path(".") and bundled.exists():
        return bundled
    return path


def load_config(path: Path | str) -> ExperimentConfig:
    """Read and validate an experiment file; bundled configs load by name."""
    path = resolve_config_path(path)
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except OSError as e:
        raise IoFailure(f"{path}: {e.strerror or e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigInvalid(f"{path}: {e}") from e
    config = config_from_dict(data, path.parent, path.stem)
    logger.info(f"Loaded {config.experiment} experiment from {path}")
    return config


def numeric_key(key: str) -> str:
    """
    Check that ``key`` names a numeric field of some table.

    Raises:
        UnknownVariable: the key is not ``table.field`` for a numeric field
    """
    section, _, name = key.partition(".")
    form_class = SECTION_FORMS.get(section)
    if form_class is None or name not in form_class.base_fields:
        raise UnknownVariable(f"{key}: no such configuration key")
    if not isinstance(form_class.base_fields[name], NUMERIC_FIELDS):
        raise UnknownVariable(f"{key}: only numeric keys can be swept")
    return key


def parse_sweep(text: str) -> tuple[str, np.ndarray]:
    """
    Parse ``KEY=START:STOP:N`` into the key and N evenly spaced values.

    Raises:
        ConfigInvalid: the text is malformed or N < 1
        UnknownVariable: KEY is not a numeric configuration key
    """
    key, sep, spec = text.partition("=")
    parts = spec.split(":")
    if not sep or len(parts) != 3:
        raise ConfigInvalid(f"sweep: expected KEY=START:STOP:N, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise ConfigInvalid(f"sweep: {e}") from e
    if count < 1:
        raise ConfigInvalid(f"sweep: N must be >= 1, got {count}")
    return numeric_key(key.strip()), np.linspace(start, stop, count)

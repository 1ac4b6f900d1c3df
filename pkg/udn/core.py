"""Configuration validation, config files, and deterministic random streams."""

import logging
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, TypeAlias

import numpy as np
from pydantic import ValidationError

from udn.exceptions import ConfigError, FieldError
from udn.schemas import SimConfig

logger = logging.getLogger(__name__)

ValidatedConfig: TypeAlias = SimConfig

RngStream: TypeAlias = np.random.Generator

# Stable numeric ids; substream names never change meaning across releases.
SUBSTREAMS = {
    "geometry": 1,
    "arrivals": 2,
    "fading": 3,
    "access": 4,
    "estimation": 5,
}


def _field_errors(error: ValidationError) -> list[FieldError]:
    errors = []
    for detail in error.errors():
        field = str(detail["loc"][0]) if detail["loc"] else "config"
        message = detail["msg"].removeprefix("Value error, ")
        errors.append(FieldError(field=field, message=message))
    return errors


def validate_config(config: SimConfig | Mapping[str, Any]) -> ValidatedConfig:
    """
    Validates a configuration and returns it unchanged.

    Args:
        config (SimConfig | Mapping): An already constructed configuration or
        raw field values.

    Raises:
        ConfigError: Lists every violated invariant by field name.

    Returns:
        ValidatedConfig: The validated configuration.
    """
    data = config.model_dump() if isinstance(config, SimConfig) else config
    try:
        validated = SimConfig.model_validate(dict(data))
    except ValidationError as error:
        raise ConfigError(_field_errors(error)) from error

    if isinstance(config, SimConfig):
        return config
    return validated


def apply_overrides(config: SimConfig, **changes: Any) -> ValidatedConfig:
    """
    Returns a validated copy of `config` with some fields replaced.

    Raises:
        ConfigError: If the modified configuration is invalid.
    """
    return validate_config({**config.model_dump(), **changes})


def parse_config_text(text: str) -> dict[str, str]:
    """
    Parses flat `key=value` text with `#` comments.

    Args:
        text (str): The file contents.

    Raises:
        ConfigError: For malformed lines and duplicate keys.

    Returns:
        dict[str, str]: The raw key/value pairs.
    """
    values: dict[str, str] = {}
    errors = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            errors.append(
                FieldError(f"line {number}", f"expected key=value: {raw!r}")
            )
        elif key in values:
            errors.append(FieldError(key, "duplicate key"))
        else:
            values[key] = value
    if errors:
        raise ConfigError(errors)
    return values


def load_config(path: str | Path) -> ValidatedConfig:
    """
    Reads and validates a configuration file.

    Unknown keys are rejected along with every other violation.
    """
    text = Path(path).read_text(encoding="utf-8")
    config = validate_config(parse_config_text(text))
    logger.debug("loaded configuration from %s", path)
    return config


def _format_value(value: Any) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(config: SimConfig) -> str:
    """
    Serializes a configuration to the flat `key=value` format.

    Floats are written with `repr`, so parsing the output reproduces the
    configuration exactly.
    """
    lines = [
        f"{key}={_format_value(value)}"
        for key, value in config.model_dump().items()
    ]
    return "\n".join(lines) + "\n"


def derive_stream(seed: int, substream: str, entity: int) -> RngStream:
    """
    Derives a deterministic random stream for one (substream, entity) pair.

    The stream depends only on its three arguments, so the same entity draws
    the same numbers in every run and in every system variant.

    Args:
        seed (int): The experiment seed.
        substream (str): One of `SUBSTREAMS`.
        entity (int): The entity id (realization or link index).

    Raises:
        KeyError: For an unknown substream name.

    Returns:
        RngStream: A fresh, independent generator.
    """
    sequence = np.random.SeedSequence(
        entropy=seed, spawn_key=(SUBSTREAMS[substream], entity)
    )
    return np.random.Generator(np.random.PCG64DXSM(sequence))

"""Scenario configurations as JSON files.

Each loader reads a flat JSON object whose keys match the config dataclass
fields; list values are converted to the tuple shapes the dataclasses expect.
Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import json

from ..exceptions import InputError
from .convergence import ConvergenceStudyConfig
from .rho import RhoScenario
from .tracking import DttConfig


def _read_fields(path: str, cls) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: cannot read scenario config: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be a JSON object")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise InputError(f"{path}: unknown config keys {unknown}; allowed: {sorted(allowed)}")
    return data


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def load_rho_scenario(path: str) -> RhoScenario:
    data = _read_fields(path, RhoScenario)
    for key in ("m_values", "methods"):
        if key in data:
            data[key] = _tupled(data[key])
    return RhoScenario(**data)


def load_dtt_config(path: str) -> DttConfig:
    data = _read_fields(path, DttConfig)
    for key in ("links", "banks"):
        if key in data:
            data[key] = _tupled(data[key])
    return DttConfig(**data)


def load_convergence_config(path: str) -> ConvergenceStudyConfig:
    data = _read_fields(path, ConvergenceStudyConfig)
    for key in ("nx_values", "epsilons", "m_values"):
        if key in data:
            data[key] = _tupled(data[key])
    return ConvergenceStudyConfig(**data)

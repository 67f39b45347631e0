"""Experiment configuration: JSON schemas, validation, defaults.

Each experiment name owns a schema; validation failures surface as
ConfigError with a JSON-pointer path to the offending field, so a typo
in a nested key points at itself rather than at the whole file.
"""

from __future__ import annotations

import copy
import json

import jsonschema

from .errors import ConfigError

EXPERIMENTS = (
    "gtv-convergence",
    "perimeter-convergence",
    "nonlocal-convergence",
    "tl-distance",
    "matching-scaling",
    "connectivity",
    "bisect",
)

_DOMAIN = {
    "type": "object",
    "properties": {
        "shape": {"enum": ["unit-box", "box", "dumbbell", "box-union", "polygon"]},
        "dimension": {"type": "integer", "minimum": 1, "maximum": 8},
        "lo": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "hi": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "length": {"type": "number", "exclusiveMinimum": 0},
        "boxes": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "lo": {"type": "array", "items": {"type": "number"}},
                    "hi": {"type": "array", "items": {"type": "number"}},
                },
                "required": ["lo", "hi"],
                "additionalProperties": False,
            },
            "minItems": 1,
        },
        "vertices": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}},
            "minItems": 3,
        },
    },
    "required": ["shape"],
    "additionalProperties": False,
}

_DENSITY = {
    "type": "object",
    "properties": {
        "name": {"enum": ["uniform", "affine"]},
        "axis": {"type": "integer", "minimum": 0},
        "slope": {"type": "number"},
    },
    "required": ["name"],
    "additionalProperties": False,
}

_KERNEL = {
    "type": "object",
    "properties": {
        "name": {"enum": ["indicator", "gaussian", "step-sum"]},
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "radii": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "heights": {"type": "array", "items": {"type": "number"}, "minItems": 1},
    },
    "required": ["name"],
    "additionalProperties": False,
}

_EPS_RULE = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["admissible", "borderline", "sub-connectivity", "fixed"]},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "gamma": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "factor": {"type": "number", "exclusiveMinimum": 0},
        "value": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_FUNCTION = {
    "type": "object",
    "properties": {
        "coeffs": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "offset": {"type": "number"},
    },
    "required": ["coeffs"],
    "additionalProperties": False,
}

_SEEDS = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}
_N_SCHEDULE = {"type": "array", "items": {"type": "integer", "minimum": 2}}


def _schema(properties: dict, required: list) -> dict:
    return {
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": False,
    }


SCHEMAS = {
    "gtv-convergence": _schema(
        {
            "domain": _DOMAIN,
            "density": _DENSITY,
            "kernel": _KERNEL,
            "function": _FUNCTION,
            "n": _N_SCHEDULE,
            "eps_rule": _EPS_RULE,
            "seeds": _SEEDS,
        },
        ["domain", "kernel", "function", "n", "eps_rule", "seeds"],
    ),
    "perimeter-convergence": _schema(
        {
            "domain": _DOMAIN,
            "density": _DENSITY,
            "kernel": _KERNEL,
            "set": _schema(
                {
                    "axis": {"type": "integer", "minimum": 0},
                    "threshold": {"type": "number"},
                },
                ["axis", "threshold"],
            ),
            "n": _N_SCHEDULE,
            "eps_rule": _EPS_RULE,
            "seeds": _SEEDS,
        },
        ["domain", "kernel", "set", "n", "eps_rule", "seeds"],
    ),
    "nonlocal-convergence": _schema(
        {
            "domain": _DOMAIN,
            "density": _DENSITY,
            "kernel": _KERNEL,
            "function": _FUNCTION,
            "eps": {
                "type": "array",
                "items": {"type": "number", "exclusiveMinimum": 0},
                "minItems": 1,
            },
            "method": {"enum": ["quadrature", "monte-carlo"]},
            "cells_per_eps": {"type": "integer", "minimum": 2},
            "samples": {"type": "integer", "minimum": 1000},
            "seed": {"type": "integer", "minimum": 0},
        },
        ["domain", "kernel", "function", "eps"],
    ),
    "tl-distance": _schema(
        {
            "domain": _DOMAIN,
            "density": _DENSITY,
            "function": _FUNCTION,
            "p": {"type": "number", "minimum": 1},
            "grid": {"type": "integer", "minimum": 2},
            "n": _N_SCHEDULE,
            "seeds": _SEEDS,
        },
        ["domain", "function", "grid", "n", "seeds"],
    ),
    "matching-scaling": _schema(
        {
            "dimension": {"type": "integer", "minimum": 1, "maximum": 8},
            "n": _N_SCHEDULE,
            "seeds": _SEEDS,
        },
        ["dimension", "n", "seeds"],
    ),
    "connectivity": _schema(
        {
            "domain": _DOMAIN,
            "density": _DENSITY,
            "kernel": _KERNEL,
            "n": {"type": "integer", "minimum": 2},
            "factors": {
                "type": "array",
                "items": {"type": "number", "exclusiveMinimum": 0},
                "minItems": 1,
            },
            "seeds": _SEEDS,
        },
        ["kernel", "n", "factors", "seeds"],
    ),
    "bisect": _schema(
        {
            "domain": _DOMAIN,
            "density": _DENSITY,
            "kernel": _KERNEL,
            "n": _N_SCHEDULE,
            "eps_rule": _EPS_RULE,
            "seeds": _SEEDS,
            "restarts": {"type": "integer", "minimum": 0},
            "reference_size": {"type": "integer", "minimum": 10},
        },
        ["domain", "kernel", "n", "eps_rule", "seeds"],
    ),
}

DEFAULTS = {
    "gtv-convergence": {"density": {"name": "uniform"}},
    "perimeter-convergence": {"density": {"name": "uniform"}},
    "nonlocal-convergence": {
        "density": {"name": "uniform"},
        "method": "quadrature",
        "cells_per_eps": 8,
        "samples": 200000,
        "seed": 0,
    },
    "tl-distance": {"density": {"name": "uniform"}, "p": 2},
    "matching-scaling": {},
    "connectivity": {
        "domain": {"shape": "unit-box", "dimension": 2},
        "density": {"name": "uniform"},
    },
    "bisect": {
        "density": {"name": "uniform"},
        "restarts": 32,
        "reference_size": 2000,
    },
}


def _pointer(error: jsonschema.exceptions.ValidationError) -> str:
    return "/" + "/".join(str(part) for part in error.absolute_path)


def validate_config(experiment: str, config: dict) -> dict:
    """Validate a raw config and return a copy with defaults filled in.

    Raises ConfigError whose message starts with the JSON-pointer path
    of the first (most specific) violation.
    """
    if experiment not in SCHEMAS:
        known = ", ".join(EXPERIMENTS)
        raise ConfigError(f"/: unknown experiment {experiment!r} (known: {known})")
    if not isinstance(config, dict):
        raise ConfigError("/: config must be a JSON object")
    validator = jsonschema.Draft202012Validator(SCHEMAS[experiment])
    error = jsonschema.exceptions.best_match(validator.iter_errors(config))
    if error is not None:
        raise ConfigError(f"{_pointer(error)}: {error.message}")
    resolved = copy.deepcopy(config)
    for key, value in DEFAULTS[experiment].items():
        resolved.setdefault(key, copy.deepcopy(value))
    return resolved


def load_config(path: str) -> dict:
    """Read a JSON config file, wrapping parse errors as ConfigError."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"/: {path} is not valid JSON ({exc})") from None

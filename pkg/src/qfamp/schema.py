"""JSON schemas for run configurations and emitted results."""

from __future__ import annotations

import json

import jsonschema

from .errors import ConfigError

SCHEMA_VERSION = 1

_num = {"type": "number"}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qfamp run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "plant": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["ndpa", "detuned_ndpa"]},
                "kappa": {"type": "number", "exclusiveMinimum": 0},
                "lambda": _num,
                "delta1": _num,
                "delta2": _num,
                "gamma": {"type": "number", "minimum": 0},
            },
        },
        "controller": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"const": "beam_splitter"},
                "beta": {"type": "number", "minimum": -1, "maximum": 1},
            },
        },
        "feedback": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha1": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "alpha2": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "omega_min": _num,
                "omega_max": _num,
                "n_points": {"type": "integer", "minimum": 2},
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["robustness", "noise"]},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                "n_samples": {"type": "integer", "minimum": 1},
                "omega_eval": _num,
                "rel_lambda": {"type": "number", "minimum": 0},
                "rel_delta": {"type": "number", "minimum": 0},
                "delta_base": {"enum": ["perturbed", "nominal"]},
                "workers": {"type": "integer", "minimum": 1},
                "sweep": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["axis", "values"],
                    "properties": {
                        "axis": {"enum": ["gamma", "alpha"]},
                        "values": {"type": "array", "items": _num, "minItems": 1},
                    },
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "format": {"enum": ["csv", "json"]},
                "path": {"type": "string"},
            },
        },
    },
}

RESULT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qfamp result",
    "type": "object",
    "required": ["schema_version", "command", "metadata"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"enum": ["gain", "poles", "stability", "noise", "sensitivity", "bode",
                             "montecarlo", "constraints"]},
        "metadata": {
            "type": "object",
            "required": ["artifact_version", "config"],
            "properties": {"config": CONFIG_SCHEMA, "artifact_version": {"type": "string"}},
        },
        "summary": {},
        "columns": {"type": "array", "items": {"type": "string"}},
        "rows": {"type": "array", "items": {"type": "array"}},
    },
}


def validate_config(cfg) -> dict:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    return cfg


def validate_result(doc) -> dict:
    jsonschema.validate(doc, RESULT_SCHEMA)
    return doc


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    return validate_config(cfg)

"""Run-configuration loading and schema validation.

One JSON config drives every CLI subcommand; unknown keys are rejected so a
typo cannot silently fall back to a default. The published schema lives in
docs/config_schema.json (regenerated from CONFIG_SCHEMA here).
"""

import json

import jsonschema

_PARAMS_DIRECT = {
    "type": "object",
    "properties": {
        "omega_r_GHz": {"type": "number"},
        "kappa_int_kHz": {"type": "number"},
        "kappa_ext_MHz": {"type": "number"},
        "K_kHz": {"type": "number"},
        "n_th": {"type": "number", "minimum": 0},
    },
    "required": ["omega_r_GHz", "kappa_int_kHz", "kappa_ext_MHz", "K_kHz"],
    "additionalProperties": False,
}

_PARAMS_ELEMENTS = {
    "type": "object",
    "properties": {
        "L_nH": {"type": "number", "exclusiveMinimum": 0},
        "C_fF": {"type": "number", "exclusiveMinimum": 0},
        "LJ_nH": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["L_nH", "C_fF", "LJ_nH"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "kerrsim run configuration",
    "type": "object",
    "properties": {
        "params": {"oneOf": [_PARAMS_DIRECT, _PARAMS_ELEMENTS]},
        "drive": {
            "type": "object",
            "properties": {
                "powers_dbm": {"type": "array",
                               "items": {"type": "number"}, "minItems": 1},
                "attenuation_db": {"type": "number", "minimum": 0},
            },
            "required": ["powers_dbm"],
            "additionalProperties": False,
        },
        "frequency_grid": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["dip", "explicit"]},
                "span_kappa": {"type": "number", "exclusiveMinimum": 0},
                "points": {"type": "integer", "minimum": 5},
                "freqs_GHz": {"type": "array", "items": {"type": "number"}},
            },
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {
                "dim": {"type": ["integer", "null"], "minimum": 2},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "atol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "phase_space": {
            "type": "object",
            "properties": {
                "points": {"type": "integer", "minimum": 21},
                "pad": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "deform": {
            "type": "object",
            "properties": {
                "lambda": {"type": "number"},
                "duration_K": {"type": "number", "exclusiveMinimum": 0},
                "amplitude": {"enum": ["steady_state", "classical"]},
            },
            "additionalProperties": False,
        },
        "evolve": {
            "type": "object",
            "properties": {
                "t_final_kappa": {"type": "number", "exclusiveMinimum": 0},
                "points": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "squeeze": {
            "type": "object",
            "properties": {
                "theta_points": {"type": "integer", "minimum": 8},
            },
            "additionalProperties": False,
        },
        "dataset": {
            "type": "object",
            "properties": {
                "path": {"type": "string"},
                "format": {"enum": ["csv", "json"]},
                "decimate_block": {"type": "integer", "minimum": 1},
            },
            "required": ["path"],
            "additionalProperties": False,
        },
        "fit": {
            "type": "object",
            "properties": {
                "initial": {"type": "object"},
                "bootstrap": {"type": "integer", "minimum": 0},
                "max_evals": {"type": "integer", "minimum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "synth": {
            "type": "object",
            "properties": {
                "noise_sigma": {"type": "number", "minimum": 0},
                "baseline": {"type": ["object", "null"]},
                "points": {"type": "integer", "minimum": 5},
                "span_kappa": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "bifurcation": {
            "type": "object",
            "properties": {
                "powers_dbm": {"type": "array", "items": {"type": "number"}},
                "span_mhz": {"type": "array", "items": {"type": "number"},
                             "minItems": 2, "maxItems": 2},
                "points": {"type": "integer", "minimum": 5},
            },
            "additionalProperties": False,
        },
    },
    "required": ["params"],
    "additionalProperties": False,
}


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    jsonschema.validate(cfg, CONFIG_SCHEMA)
    return cfg


def dump_schema(path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(CONFIG_SCHEMA, fh, indent=2)
        fh.write("\n")

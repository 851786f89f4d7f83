"""JSON-schema validation for CLI run configurations.

Every command document is validated before any work starts; unknown keys
are rejected everywhere.
"""

from __future__ import annotations

import jsonschema

from .errors import ConfigError

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_NONNEGATIVE = {"type": "number", "minimum": 0}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}
_DIM = {"enum": [1, 2]}


def _obj(properties, required=()):
    return {"type": "object", "properties": properties,
            "required": list(required), "additionalProperties": False}


_KERNEL = {"oneOf": [
    _obj({"type": {"const": "se"}, "sigma": _POSITIVE, "lengthscale": _POSITIVE,
          "rate": _POSITIVE, "dim": _DIM}, required=["type"]),
    _obj({"type": {"const": "sinc"}, "sigma": _POSITIVE, "width": _POSITIVE,
          "dim": {"const": 1}}, required=["type", "width"]),
    _obj({"type": {"const": "sm"}, "sigma": _POSITIVE, "lengthscale": _POSITIVE,
          "rate": _POSITIVE, "frequency": _NONNEGATIVE, "dim": {"const": 1}},
         required=["type", "frequency"]),
]}

_FILTER = {"oneOf": [
    _obj({"type": {"const": "se"}, "sigma": _POSITIVE, "lengthscale": _POSITIVE,
          "rate": _POSITIVE, "dim": {"const": 1}}, required=["type"]),
    _obj({"type": {"const": "sinc"}, "sigma": _POSITIVE, "width": _POSITIVE,
          "dim": {"const": 1}}, required=["type", "width"]),
    _obj({"type": {"const": "triangular"}, "sigma": _POSITIVE, "width": _POSITIVE,
          "dim": {"const": 1}}, required=["type", "width"]),
    _obj({"type": {"const": "discrete"}, "dim": {"const": 1},
          "weights": {"type": "array", "items": {"type": "number"}, "minItems": 1},
          "locations": {"type": "array", "items": {"type": "number"}, "minItems": 1}},
         required=["type", "weights", "locations"]),
    _obj({"type": {"const": "discrete"}, "dim": {"const": 2},
          "weights": {"type": "array", "items": {"type": "number"}, "minItems": 1},
          "grid_shape": {"type": "array", "items": {"type": "integer", "minimum": 1},
                         "minItems": 2, "maxItems": 2},
          "grid_step": _POSITIVE},
         required=["type", "dim", "weights", "grid_shape"]),
]}

_GRID = {"oneOf": [
    _obj({"start": {"type": "number"}, "stop": {"type": "number"},
          "num": {"type": "integer", "minimum": 1}},
         required=["start", "stop", "num"]),
    _obj({"values": {"type": "array", "items": {"type": "number"}, "minItems": 1}},
         required=["values"]),
]}

_METHOD = {"enum": ["analytic", "discrete", "quadrature"]}

_QUAD = {"quad_nodes": {"type": "integer", "minimum": 1},
         "quad_span": {"type": "array", "items": {"type": "number"},
                       "minItems": 2, "maxItems": 2}}

_OPTIMIZER = _obj({"optimizer": {"enum": ["nelder-mead", "gradient"]},
                   "max_iters": {"type": "integer", "minimum": 0},
                   "restarts": {"type": "integer", "minimum": 1},
                   "seed": _SEED})

_FREE_SOURCE = {"type": "array", "items":
                {"enum": ["sigma", "lengthscale", "width", "frequency"]}}
_FREE_FILTER = {"type": "array", "items":
                {"enum": ["sigma", "lengthscale", "width", "weights"]}}

SCHEMAS = {
    "sample": _obj({
        "kernel": _KERNEL, "filter": _FILTER, "method": _METHOD,
        "source_grid": _GRID, "conv_grid": _GRID,
        "noise_variance": _NONNEGATIVE, "seed": _SEED, "plot": {"type": "boolean"},
        **_QUAD,
    }, required=["kernel", "filter", "method", "source_grid", "conv_grid"]),

    "deconv": _obj({
        "kernel": _KERNEL, "filter": _FILTER, "method": _METHOD,
        "noise_variance": _NONNEGATIVE, "query_grid": _GRID,
        "freq_bins": {"type": "integer", "minimum": 2},
        "psd_tol": _NONNEGATIVE, "transfer_tol": _NONNEGATIVE,
        "seed": _SEED, "plot": {"type": "boolean"}, **_QUAD,
    }, required=["kernel", "filter", "method", "query_grid"]),

    "train": {"oneOf": [
        _obj({
            "mode": {"const": "fit"},
            "kernel": _KERNEL, "filter": _FILTER, "method": _METHOD,
            "free_source": _FREE_SOURCE, "free_filter": _FREE_FILTER,
            "free_noise": {"type": "boolean"},
            "noise_variance": _NONNEGATIVE, "query_grid": _GRID,
            "optimizer": _OPTIMIZER, "seed": _SEED,
            "plot": {"type": "boolean"}, **_QUAD,
        }, required=["mode", "kernel", "filter", "method", "query_grid"]),
        _obj({
            "mode": {"const": "blind"},
            "source_family": {"enum": ["se", "sinc", "sm"]},
            "taps": {"type": "integer", "minimum": 1},
            "span": {"type": "array", "items": {"type": "number"},
                     "minItems": 2, "maxItems": 2},
            "frequency_init": _POSITIVE,
            "query_grid": _GRID, "optimizer": _OPTIMIZER, "seed": _SEED,
            "plot": {"type": "boolean"},
        }, required=["mode", "source_family", "taps", "span", "query_grid"]),
    ]},

    "image": _obj({
        "filter": {"oneOf": [
            _obj({"name": {"enum": ["h0", "h1", "h2", "h3", "h4"]}},
                 required=["name"]),
            _FILTER["oneOf"][4],
        ]},
        "kernel": _KERNEL,
        "fit_kernel": {"type": "boolean"},
        "blind": {"type": "boolean"},
        "noise_sigma": _NONNEGATIVE,
        "observed_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "fractions": {"type": "array", "minItems": 1,
                      "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}},
        "wiener_noise_to_signal": _NONNEGATIVE,
        "optimizer": _OPTIMIZER, "seed": _SEED, "plot": {"type": "boolean"},
    }, required=["filter", "kernel", "noise_sigma", "observed_fraction"]),

    "baseline": _obj({
        "filter": _FILTER, "method": {"enum": ["wiener", "inverse_ft", "both"]},
        "noise_to_signal": _NONNEGATIVE, "eps": _NONNEGATIVE,
        "taps": {"type": "integer", "minimum": 1},
        "seed": _SEED, "plot": {"type": "boolean"},
    }, required=["filter", "method"]),

    "evaluate": _obj({
        "align": {"type": "boolean"}, "step": _POSITIVE,
        "seed": _SEED, "plot": {"type": "boolean"},
    }),

    "diagnose": _obj({
        "kernel": _KERNEL, "filter": _FILTER,
        "freq_max": _POSITIVE, "freq_bins": {"type": "integer", "minimum": 2},
        "psd_tol": _NONNEGATIVE, "transfer_tol": _NONNEGATIVE,
        "seed": _SEED, "plot": {"type": "boolean"},
    }, required=["kernel", "filter", "freq_max"]),
}


def validate_config(command, config):
    """Validate a config document against its command schema."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        jsonschema.validate(config, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        location = "/".join(str(part) for part in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {location}: {exc.message}") from None
    return config

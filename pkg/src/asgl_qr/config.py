"""Run configuration: loading, overrides and schema validation."""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

import jsonschema
import yaml

ENV_PREFIX = "ASGLQR_"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_unit = {"type": "number", "minimum": 0, "maximum": 1}
_tau = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_count = {"type": "integer", "minimum": 0}
_schemes = {"enum": ["none", "pca_d", "pca_1", "pls_d", "pls_1", "unpenalized"]}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SOLVER = _obj({
    "max_iter": {"type": "integer", "minimum": 1},
    "tol_kkt": _pos,
    "rho": _pos,
    "adaptive_rho": {"type": "boolean"},
    "check_every": {"type": "integer", "minimum": 1},
})

GRID = _obj({
    "alphas": {"type": "array", "items": _unit, "minItems": 1},
    "gamma1s": {"type": "array", "items": _nonneg, "minItems": 1},
    "gamma2s": {"type": "array", "items": _nonneg, "minItems": 1},
    "schemes": {"type": "array", "items": _schemes, "minItems": 1},
    "lambdas": {"type": "array", "items": _pos, "minItems": 1},
    "n_lambda": {"type": "integer", "minimum": 1},
    "lambda_min_ratio": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    "variance_threshold_pct": {"type": "number", "exclusiveMinimum": 0, "maximum": 100},
    "weight_cap": _pos,
})

WEIGHTS = _obj({
    "scheme": _schemes,
    "gamma1": _nonneg,
    "gamma2": _nonneg,
    "variance_threshold_pct": {"type": "number", "exclusiveMinimum": 0, "maximum": 100},
    "weight_cap": _pos,
})

DATA = _obj({
    "path": {"type": "string", "minLength": 1},
    "has_header": {"type": "boolean"},
    "response_column": {"type": ["string", "integer"]},
    "groups": {"type": "string", "minLength": 1},
    "group_sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
    "standardize": {"type": "boolean"},
}, required=["path"])

SPLIT = _obj({"n_train": {"type": "integer", "minimum": 1}, "n_val": _count, "n_test": _count},
             required=["n_train", "n_val", "n_test"])

MODELS = {"type": "array", "minItems": 1, "uniqueItems": True,
          "items": {"type": "string", "pattern": "^(LASSO|SGL|(ASGL|AL-SGL)-(pca_d|pca_1|pls_d|pls_1|unpenalized))$"}}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "asgl-qr run configuration",
    **_obj({
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "threads": {"type": "integer", "minimum": 1},
        "out": {"type": "string", "minLength": 1},
        "tau": _tau,
        "intercept": {"type": "boolean"},
        "solver": SOLVER,
        "data": DATA,
        "penalty": _obj({
            "lambda": _nonneg,
            "lambda_ratio": _nonneg,
            "alpha": _unit,
            "weights": WEIGHTS,
        }),
        "grid": GRID,
        "split": SPLIT,
        "simulate": _obj({
            "scenario": {"enum": ["sim1_p225", "sim1_p625", "sim2_p225", "sim2_p625",
                                  "sim3_sparse", "sim3_dense", "custom"]},
            "repetitions": {"type": "integer", "minimum": 1},
            "models": MODELS,
            "boxplot": {"type": "boolean"},
            "zero_tol": _nonneg,
            "rho_within": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            "df": _pos,
            "sizes": SPLIT,
            "K": {"type": "integer", "minimum": 1},
            "group_size": {"type": "integer", "minimum": 1},
            "beta_true": {"type": "array", "items": _num, "minItems": 1},
        }, required=["scenario", "repetitions"]),
        "preprocess": _obj({
            "response_index": {"type": ["integer", "null"]},
            "expression_percentile": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 100},
            "fold_variation_min": {"type": "number", "minimum": 1},
            "abs_correlation_min": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            "log_base": {"type": ["number", "null"], "exclusiveMinimum": 0},
        }),
        "stability": _obj({
            "taus": {"type": "array", "items": _tau, "minItems": 1},
            "models": MODELS,
            "repetitions": {"type": "integer", "minimum": 1},
            "split": SPLIT,
            "cluster": {"type": "boolean"},
            "threshold": _unit,
            "zero_tol": _nonneg,
        }, required=["repetitions", "split"]),
    }),
}

# schemas of the JSON artifacts the CLI writes
_vec = {"type": "array", "items": _num}
FIT_OUTPUT_SCHEMA = _obj({
    "beta_hat": _vec, "intercept": _num, "objective": _num, "kkt_residual": _nonneg,
    "iterations": _count, "converged": {"type": "boolean"}, "tau": _tau, "lambda": _nonneg,
    "alpha": _unit, "feature_names": {"type": "array", "items": {"type": "string"}},
}, required=["beta_hat", "objective", "kkt_residual", "iterations", "converged"])

BEST_OUTPUT_SCHEMA = _obj({
    "scheme": _schemes, "gamma1": _nonneg, "gamma2": _nonneg, "alpha": _unit, "lambda": _nonneg,
    "val_error": _nonneg, "test_error": {"type": ["number", "null"]}, "beta_hat": _vec,
    "intercept": _num, "n_fits": _count, "n_failed": _count,
    "feature_names": {"type": "array", "items": {"type": "string"}},
}, required=["scheme", "gamma1", "gamma2", "alpha", "lambda", "val_error", "beta_hat"])

ERROR_OUTPUT_SCHEMA = _obj({
    "status": {"const": "error"}, "exit_code": {"enum": [2, 3]},
    "kind": {"enum": ["validation", "runtime"]}, "message": {"type": "string"},
    "field": {"type": ["string", "null"]}, "path": {"type": ["string", "null"]},
}, required=["status", "exit_code", "kind", "message"])

_means = {"type": "object", "additionalProperties": {"type": ["number", "null"]}}
PREPROCESS_OUTPUT_SCHEMA = _obj({
    "counts": _obj({"input": _count, "expressed": _count, "variable": _count, "correlated": _count},
                   required=["input", "expressed", "variable", "correlated"]),
}, required=["counts"])

CLUSTER_OUTPUT_SCHEMA = _obj({
    "n_groups": {"type": "integer", "minimum": 1},
    "sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}},
}, required=["n_groups", "sizes"])

STABILITY_OUTPUT_SCHEMA = _obj({
    "failures": {"type": "array", "items": {"type": "object"}},
    "test_error_mean": _means, "n_selected_mean": _means,
}, required=["failures", "test_error_mean", "n_selected_mean"])

DIAGNOSTICS_OUTPUT_SCHEMA = _obj({"failures": {"type": "array", "items": {"type": "string"}}},
                                 required=["failures"])

OUTPUT_SCHEMAS = {"fit.json": FIT_OUTPUT_SCHEMA, "best.json": BEST_OUTPUT_SCHEMA,
                  "error.json": ERROR_OUTPUT_SCHEMA, "preprocess.json": PREPROCESS_OUTPUT_SCHEMA,
                  "cluster.json": CLUSTER_OUTPUT_SCHEMA, "stability.json": STABILITY_OUTPUT_SCHEMA,
                  "diagnostics.json": DIAGNOSTICS_OUTPUT_SCHEMA}


class ConfigError(ValueError):
    """Configuration is unreadable or violates the schema; ``field`` is a dotted path."""

    def __init__(self, msg, field=None, path=None):
        super().__init__(msg)
        self.field = field
        self.path = path


def load_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", path=str(path))
    text = path.read_text(encoding="utf-8")
    try:
        cfg = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse {path}: {e}", path=str(path)) from None
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a mapping", path=str(path))
    return cfg


def set_key(cfg: dict, dotted: str, raw: str) -> None:
    """Assign ``raw`` (parsed as YAML, so numbers and lists work) at a dotted path."""
    keys = [k for k in dotted.split(".") if k]
    if not keys:
        raise ConfigError(f"empty override key in {dotted!r}")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    if isinstance(value, str):
        # YAML 1.1 reads forms like "1e-6" as strings
        try:
            value = float(value)
        except ValueError:
            pass
    node = cfg
    for k in keys[:-1]:
        nxt = node.get(k)
        if not isinstance(nxt, dict):
            nxt = {}
            node[k] = nxt
        node = nxt
    node[keys[-1]] = value


def env_overrides(environ=None) -> list[tuple[str, str]]:
    """``ASGLQR_SOLVER__TOL_KKT=1e-6`` becomes ``("solver.tol_kkt", "1e-6")``."""
    environ = os.environ if environ is None else environ
    out = []
    for k in sorted(environ):
        if k.startswith(ENV_PREFIX) and len(k) > len(ENV_PREFIX):
            out.append((k[len(ENV_PREFIX):].lower().replace("__", "."), environ[k]))
    return out


def build(path=None, sets=(), environ=None) -> dict:
    """File, then environment, then ``--set`` pairs; validated at the end."""
    cfg = load_file(path) if path else {}
    cfg = copy.deepcopy(cfg)
    for k, v in env_overrides(environ):
        set_key(cfg, k, v)
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        set_key(cfg, k.strip(), v)
    return cfg


def validate(cfg: dict, schema=CONFIG_SCHEMA) -> None:
    v = jsonschema.Draft202012Validator(schema)
    errors = sorted(v.iter_errors(cfg), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        e = errors[0]
        field = ".".join(str(p) for p in e.absolute_path) or None
        where = f" at {field!r}" if field else ""
        raise ConfigError(f"invalid configuration{where}: {e.message}", field=field)

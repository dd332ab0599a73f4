"""Run configuration: a strict JSON schema with defaults and a stable hash."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import jsonschema

from .errors import ConfigError

CONFIG_VERSION = 1

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}
_vec = {"type": "array", "items": _num, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "T", "n", "d", "topology", "set", "rewards", "algorithm"],
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "T": _pos_int,
        "n": _pos_int,
        "d": _pos_int,
        "seed": {"type": "integer", "minimum": 0},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "topology": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["path", "ring", "complete", "star", "grid", "random", "edges"]},
                "p": {"type": "number", "minimum": 0, "maximum": 1},
                "rows": _pos_int,
                "cols": _pos_int,
                "edges": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}},
                "file": {"type": "string"},
            },
        },
        "set": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["box", "capped_simplex", "knapsack"]},
                "lower": _vec,
                "upper": _vec,
                "budget": {"type": "number", "exclusiveMinimum": 0},
                "weights": _vec,
            },
        },
        "rewards": {
            "type": "object",
            "additionalProperties": False,
            "required": ["mode"],
            "properties": {
                "mode": {"enum": ["nonmonotone", "monotone", "linear"]},
                "density": {"type": "number", "minimum": 0, "maximum": 1},
                "noise": {"type": "number", "minimum": 0},
                "h_scale": {"type": "number", "minimum": 0},
                "H_scale": {"type": "number", "minimum": 0},
                "G": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "algorithm": {
            "type": "object",
            "additionalProperties": False,
            "required": ["reduction", "engine"],
            "properties": {
                "reduction": {"enum": ["boosting", "dmfw", "none"]},
                "mode": {"enum": ["nonmonotone", "monotone"]},
                "engine": {"enum": ["d-ogd", "ad-ospa", "d-ftpl"]},
                "role": {"enum": ["smooth-doco", "linear-doco"]},
                "L": _pos_int,
                "K": {"type": "integer", "minimum": 0},
                "theta": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "eta": {"type": "number", "minimum": 0},
                "inner_L": _pos_int,
            },
        },
        "offline": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "resolution": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "method": {"enum": ["auto", "grid", "ascent"]},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "trace": {"type": "string"},
                "decisions": {"type": "boolean"},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T": {"type": "array", "items": _pos_int, "minItems": 1},
                "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            },
        },
    },
}


def validate(cfg):
    """Check ``cfg`` against the schema and the cross-field rules."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    algo, rewards, dset = cfg["algorithm"], cfg["rewards"], cfg["set"]
    if rewards["mode"] == "linear" and algo["reduction"] != "none":
        raise ConfigError("linear rewards are only used with reduction 'none'")
    if algo["reduction"] == "none" and rewards["mode"] != "linear":
        raise ConfigError("reduction 'none' needs linear rewards")
    if algo["reduction"] == "dmfw" and dset["kind"] == "box" and any(v != 0 for v in dset.get("lower", [0])):
        raise ConfigError("meta Frank-Wolfe needs a downward-closed set (box lower corner must be 0)")
    if "mode" in algo and algo["reduction"] != "boosting":
        raise ConfigError("'mode' only applies to the boosting reduction")
    if "role" in algo and algo["engine"] != "ad-ospa":
        raise ConfigError("'role' only applies to the ad-ospa engine")
    if "inner_L" in algo and algo["reduction"] != "dmfw":
        raise ConfigError("'inner_L' only applies to meta Frank-Wolfe")
    topo = cfg["topology"]
    if topo["kind"] == "grid" and topo.get("rows", 0) * topo.get("cols", 0) != cfg["n"]:
        raise ConfigError("grid rows * cols must equal n")
    return cfg


def load(path):
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate(cfg)


def canonical(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg, seed=None):
    """Short stable digest of the config (and the seed it runs with)."""
    payload = canonical({"config": cfg, "seed": seed})
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def with_overrides(cfg, **changes):
    out = copy.deepcopy(cfg)
    out.update(changes)
    return out


def example_config():
    """A small runnable configuration."""
    return {
        "version": CONFIG_VERSION,
        "T": 256,
        "n": 4,
        "d": 2,
        "seed": 0,
        "topology": {"kind": "ring"},
        "set": {"kind": "capped_simplex", "budget": 1.0},
        "rewards": {"mode": "nonmonotone", "density": 1.0, "noise": 0.1},
        "algorithm": {"reduction": "boosting", "engine": "d-ogd"},
    }

"""Experiment configuration: JSON schema, defaults and hypothesis checks."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import jsonschema

from .assembly import LayerGrid, build_grid, default_n_trans
from .model import BoundaryCoupling, from_preset, sup_norms

COMMANDS = ("assemble", "resolvent-sweep", "spectrum", "weak-coupling", "trajectory",
            "enclosure-check", "selftest")
RANDOMIZED = ("resolvent-sweep", "selftest")

_num = {"type": "number"}
_numlist = {"type": "array", "items": _num}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "robinlayer experiment",
    "type": "object",
    "required": ["command"],
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "coupling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"type": "string", "pattern": "^(constant|step|gauss|sampled:.+)$"},
                "alpha0": _num, "c": _num, "amplitude": _num, "sigma": _num,
                "half_width": _num, "smoothing": _num,
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d": {"type": "integer"},
                "L": _num,
                "n_lat": {"type": "integer"},
                "epsilon": _num,
                "n_trans": {"oneOf": [{"type": "integer"}, {"const": "auto"}]},
                "n_trans_floor": {"type": "integer", "minimum": 2},
                "lateral_bc": {"enum": ["dirichlet", "periodic"]},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"epsilons": _numlist, "c_values": _numlist},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "norm_method": {"enum": ["power", "lanczos"]},
                "seed": {"type": "integer", "minimum": 0},
                "probes": {"type": "integer", "minimum": 0},
                "margins": {"type": "boolean"},
                "operator": {"enum": ["H_eps", "H0"]},
                "k": {"type": "integer", "minimum": 1},
                "near": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "tolerance": _num,
                "samples": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "minItems": 1},
            },
        },
    },
}

DEFAULTS = {
    "coupling": {"preset": "gauss", "alpha0": 1.0, "amplitude": 0.5, "sigma": 1.0, "c": 1.0},
    "grid": {"d": 2, "L": 12.0, "n_lat": 241, "epsilon": 0.1, "n_trans": "auto",
             "n_trans_floor": 6, "lateral_bc": "dirichlet"},
    "sweep": {"epsilons": [0.2, 0.1, 0.05, 0.025], "c_values": []},
    "solver": {"norm_method": "lanczos", "probes": 50, "margins": False, "operator": "H_eps",
               "k": 6, "near": [0.0, 0.0], "tolerance": 1e-10, "samples": 1_000_000},
    "output": {"formats": ["csv", "json"]},
}


def load(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def with_defaults(cfg: dict) -> dict:
    """Fill missing blocks and keys; a given coupling block is kept as is."""
    out = copy.deepcopy(cfg)
    for key, block in DEFAULTS.items():
        if key == "coupling" and key in out:
            out[key].setdefault("preset", "gauss")
            continue
        merged = copy.deepcopy(block)
        merged.update(out.get(key, {}))
        out[key] = merged
    return out


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def coupling_of(cfg: dict) -> BoundaryCoupling:
    spec = dict(cfg["coupling"])
    return from_preset(spec.pop("preset"), **spec)


def grid_of(cfg: dict, epsilon=None) -> LayerGrid:
    g = cfg["grid"]
    eps = g["epsilon"] if epsilon is None else epsilon
    n_trans = g["n_trans"]
    if n_trans == "auto":
        bc = g["lateral_bc"]
        h = 2 * g["L"] / (g["n_lat"] if bc == "periodic" else g["n_lat"] - 1)
        n_trans = default_n_trans(eps, h, floor=g["n_trans_floor"])
    return build_grid(g["d"], g["L"], g["n_lat"], eps, n_trans, g["lateral_bc"])


def _diag(level, path, message):
    return {"level": level, "path": path, "message": message}


def diagnostics(cfg: dict) -> list[dict]:
    """Schema violations and hypothesis checks; empty for a valid config."""
    out = []
    validator = jsonschema.Draft202012Validator(SCHEMA)
    for err in sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path)):
        out.append(_diag("error", "/".join(map(str, err.absolute_path)), err.message))
    if out:
        return out
    full = with_defaults(cfg)
    command = full["command"]
    g = full["grid"]
    if g["d"] not in (2, 3):
        out.append(_diag("error", "grid/d", "d must be 2 or 3"))
    if isinstance(g["n_trans"], int) and g["n_trans"] < 2:
        out.append(_diag("error", "grid/n_trans", "n_trans must be >= 2 (both faces need nodes)"))
    if g["n_lat"] < 3:
        out.append(_diag("error", "grid/n_lat", "n_lat must be >= 3"))
    if g["L"] <= 0 or g["epsilon"] <= 0:
        out.append(_diag("error", "grid", "L and epsilon must be positive"))
    if any(e <= 0 for e in full["sweep"]["epsilons"]):
        out.append(_diag("error", "sweep/epsilons", "epsilons must be positive"))
    try:
        coupling = coupling_of(full)
    except (ValueError, OSError) as exc:
        out.append(_diag("error", "coupling", str(exc)))
        return out
    if coupling.kind == "sampled" and g["d"] != 2:
        out.append(_diag("error", "coupling/preset", "sampled couplings are one-dimensional (d = 2)"))
    if command == "resolvent-sweep":
        if sup_norms(coupling)[1] == float("inf"):
            out.append(_diag("error", "coupling/smoothing",
                             "alpha must be in W^1_inf: sharp step needs smoothing > 0"))
        if len(full["sweep"]["epsilons"]) < 4:
            out.append(_diag("error", "sweep/epsilons", "rate sweep needs at least 4 epsilons"))
    if command in RANDOMIZED and "seed" not in cfg.get("solver", {}):
        out.append(_diag("error", "solver/seed", "a seed is mandatory for randomized estimates"))
    if command in ("weak-coupling", "trajectory") and not full["sweep"]["c_values"]:
        out.append(_diag("error", "sweep/c_values", "c_values must not be empty"))
    if command in ("weak-coupling", "trajectory") and coupling.kind not in ("step_perturbation", "gaussian_bump"):
        out.append(_diag("error", "coupling/preset", "coupling sweeps need a step or gauss profile"))
    return out


def validate(path) -> list[dict]:
    """Diagnostics for a config file; raises ``OSError`` if it cannot be read."""
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        return [_diag("error", "", f"invalid JSON: {exc}")]
    return diagnostics(cfg)

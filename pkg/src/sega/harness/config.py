"""Experiment configuration: TOML files with a fixed, typed schema.

A config has the tables ``[problem]``, ``[regularizer]``, ``[run]``,
``[cost]``, ``[output]`` and one ``[[method]]`` entry per solver. Unknown
keys are rejected and every error names the offending field path, for
example ``method[1].sketch.kind``. See ``configs/`` for examples.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from typing import Any, Dict, List

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["ConfigError", "SCHEMA", "load_config", "parse_config", "apply_override",
           "validate", "config_hash"]


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


NUM = (int, float)

SKETCH = {"kind": (str, "coordinate"), "p": ((str, list), "uniform"), "b": (int, 1),
          "tau": (int, None)}
STEPSIZE = {"kind": (str, None), "alpha": (NUM, None), "sigma": (NUM, None),
            "G": (list, None), "v": (list, None), "use_mu": (bool, True)}
METHOD = {"name": (str, None), "solver": (str, None), "mode": (str, "sega"),
          "oracle": (str, "first"), "eps_rel": (NUM, 1e-6), "sketch": (dict, SKETCH),
          "stepsize": (dict, STEPSIZE), "metric": ((str, list), "identity"),
          "subspace": (bool, False), "K": (int, None)}
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "problem": {"type": (str, None), "n": (int, None), "spectrum": (int, 3), "top": (NUM, None),
                "d": (int, None), "seed": (int, None), "path": (str, None),
                "max_rows": (int, None), "mu": (NUM, None), "M": (list, None),
                "b": (list, None), "x0": (list, None)},
    "regularizer": {"kind": (str, "zero"), "radius": (NUM, 1.0), "center": (list, None),
                    "lam": (NUM, 0.0), "lo": ((NUM, list), None), "hi": ((NUM, list), None)},
    "run": {"name": (str, "experiment"), "K": (int, 1000), "seeds": (list, [0]),
            "record_every": (int, 1), "target_gap": (NUM, None)},
    "cost": {"X": (NUM, 0.0)},
    "output": {"dir": (str, "out"), "trajectory": (bool, False)},
}
REQUIRED = {"problem.type", "method.name", "method.solver"}

PROBLEM_TYPES = ("synthetic", "least_squares_subspace", "logistic", "libsvm", "quadratic")
REGULARIZERS = ("zero", "ball", "l1", "box")
SOLVERS = ("sega", "asega", "pgd", "cd", "rds")
SKETCH_KINDS = ("coordinate", "gaussian", "tau_nice", "optimal_subspace")
STEPSIZE_KINDS = ("general", "simple_uniform", "coordinate_nonacc", "importance_trace",
                  "metric_G", "subspace", "manual", "inverse_L", "inverse_nL", "inverse_trace")


def _typecheck(path, value, types):
    if types is NUM or (isinstance(types, tuple) and float in types):
        if isinstance(value, bool):
            raise ConfigError(path, f"expected a number, got {value!r}")
    if not isinstance(value, types):
        names = "/".join(t.__name__ for t in (types if isinstance(types, tuple) else (types,)))
        raise ConfigError(path, f"expected {names}, got {type(value).__name__} {value!r}")


def _fill(path, raw, schema):
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a table")
    out = {}
    for key in raw:
        if key not in schema:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")
    for key, (types, default) in schema.items():
        sub = f"{path}.{key}" if path else key
        generic = sub.split("[")[0] + ("." + sub.split("].", 1)[1] if "]." in sub else "")
        if key in raw:
            val = raw[key]
            if isinstance(default, dict):
                out[key] = _fill(sub, val, default)
                continue
            _typecheck(sub, val, types)
            out[key] = val
        elif isinstance(default, dict):
            out[key] = _fill(sub, {}, default)
        elif generic in REQUIRED:
            raise ConfigError(sub, "required key missing")
        else:
            out[key] = copy.deepcopy(default)
    return out


def _choice(path, value, options):
    if value not in options:
        raise ConfigError(path, f"must be one of {', '.join(options)}; got {value!r}")


def validate(raw: Dict[str, Any]) -> Dict[str, Any]:
    """Fill defaults and check types, choices and cross-field constraints."""
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a table")
    for key in raw:
        if key not in SCHEMA and key != "method":
            raise ConfigError(key, "unknown key")
    cfg = {sec: _fill(sec, raw.get(sec, {}), schema) for sec, schema in SCHEMA.items()}
    methods = raw.get("method")
    if not isinstance(methods, list) or not methods:
        raise ConfigError("method", "at least one [[method]] entry is required")
    cfg["method"] = [_fill(f"method[{j}]", m, METHOD) for j, m in enumerate(methods)]

    pr = cfg["problem"]
    _choice("problem.type", pr["type"], PROBLEM_TYPES)
    if pr["type"] in ("synthetic", "least_squares_subspace") and pr["n"] is None:
        raise ConfigError("problem.n", "required for this problem type")
    if pr["type"] == "synthetic" and pr["spectrum"] not in (1, 2, 3, 4):
        raise ConfigError("problem.spectrum", "must be 1, 2, 3 or 4")
    if pr["type"] == "least_squares_subspace" and pr["d"] is None:
        raise ConfigError("problem.d", "required for least_squares_subspace")
    if pr["type"] in ("logistic", "libsvm") and pr["path"] is None:
        raise ConfigError("problem.path", "required for this problem type")
    if pr["type"] in ("logistic", "libsvm") and pr["mu"] is None:
        raise ConfigError("problem.mu", "required for this problem type")
    if pr["type"] == "quadratic" and (pr["M"] is None or pr["b"] is None):
        raise ConfigError("problem.M", "quadratic problems need M and b")
    if pr["n"] is not None and pr["n"] < 1:
        raise ConfigError("problem.n", "must be positive")
    _choice("regularizer.kind", cfg["regularizer"]["kind"], REGULARIZERS)
    if cfg["regularizer"]["radius"] <= 0:
        raise ConfigError("regularizer.radius", "must be positive")
    run = cfg["run"]
    if run["K"] < 0:
        raise ConfigError("run.K", "must be nonnegative")
    if run["record_every"] < 1:
        raise ConfigError("run.record_every", "must be at least 1")
    if not run["seeds"]:
        raise ConfigError("run.seeds", "must be nonempty")
    for j, s in enumerate(run["seeds"]):
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise ConfigError(f"run.seeds[{j}]", f"seeds are nonnegative integers, got {s!r}")
    if cfg["cost"]["X"] < 0:
        raise ConfigError("cost.X", "must be nonnegative")
    names = set()
    for j, m in enumerate(cfg["method"]):
        base = f"method[{j}]"
        if m["name"] in names:
            raise ConfigError(f"{base}.name", f"duplicate method name {m['name']!r}")
        names.add(m["name"])
        _choice(f"{base}.solver", m["solver"], SOLVERS)
        _choice(f"{base}.mode", m["mode"], ("sega", "bias", "cd"))
        _choice(f"{base}.oracle", m["oracle"], ("first", "zeroth"))
        _choice(f"{base}.sketch.kind", m["sketch"]["kind"], SKETCH_KINDS)
        p = m["sketch"]["p"]
        if isinstance(p, str):
            _choice(f"{base}.sketch.p", p, ("uniform", "importance", "sqrt"))
        if m["stepsize"]["kind"] is not None:
            _choice(f"{base}.stepsize.kind", m["stepsize"]["kind"], STEPSIZE_KINDS)
        if m["K"] is not None and m["K"] < 0:
            raise ConfigError(f"{base}.K", "must be nonnegative")
        if isinstance(m["metric"], str) and m["metric"] != "identity":
            raise ConfigError(f"{base}.metric", "must be 'identity' or a list of diagonal entries")
    return cfg


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(raw: Dict[str, Any], spec: str) -> Dict[str, Any]:
    """Apply ``a.b.c=value`` to the raw config; methods are addressed by index or name.

    The value is parsed as a TOML value, falling back to a bare string.
    """
    if "=" not in spec:
        raise ConfigError("override", f"expected key=value, got {spec!r}")
    key, text = spec.split("=", 1)
    parts = [s for s in key.strip().split(".") if s]
    if not parts:
        raise ConfigError("override", f"empty key in {spec!r}")
    node: Any = raw
    path = ""
    for j, part in enumerate(parts[:-1]):
        path = f"{path}.{part}" if path else part
        if isinstance(node, list):
            if part.isdigit() and int(part) < len(node):
                node = node[int(part)]
            else:
                hits = [m for m in node if isinstance(m, dict) and m.get("name") == part]
                if not hits:
                    raise ConfigError(path, "no such list entry")
                node = hits[0]
        else:
            if part not in node:
                node[part] = {}
            node = node[part]
        if not isinstance(node, (dict, list)):
            raise ConfigError(path, "cannot descend into a scalar")
    if isinstance(node, list):
        raise ConfigError(key, "cannot replace a list entry")
    node[parts[-1]] = _parse_value(text.strip())
    return raw


def parse_config(text: str, overrides: List[str] = (), seed=None) -> Dict[str, Any]:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"invalid TOML: {exc}") from None
    for spec in overrides:
        apply_override(raw, spec)
    if seed is not None:
        raw.setdefault("run", {})["seeds"] = [int(seed)]
    return validate(raw)


def load_config(path, overrides: List[str] = (), seed=None) -> Dict[str, Any]:
    """Read, override and validate a config file."""
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    cfg = parse_config(text, overrides, seed)
    base = os.path.dirname(os.path.abspath(path))
    if cfg["problem"]["path"] is not None and not os.path.isabs(cfg["problem"]["path"]):
        cfg["problem"]["path"] = os.path.join(base, cfg["problem"]["path"])
    return cfg


def config_hash(cfg: Dict[str, Any]) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]

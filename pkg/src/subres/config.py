"""Experiment configuration: loading, validation and defaults.

A config is one TOML file (JSON is accepted as the canonical machine form,
with the same keys).  Grammar::

    name = "cat_lyapunov"          # optional; defaults to the file stem
    task = "lyapunov"              # lyapunov | flags | adapted_norm | stable_manifold
                                   # | normal_form | holonomy | algebra_suite
    seed = 0                       # unsigned 64-bit, default 0
    precision = "double"           # double | extended | rational (task default if omitted)

    [system]                       # exactly one of builtin / map / matrix
    builtin = "cat"                # cat | twisted_cat
    params = { kappa = 0.3 }       # builtin parameters
    # map = "x <- 1/2 * x ; y <- 2 * y + x^2"
    # coords = ["x", "y"]
    # kind = "polynomial"          # polynomial | jet
    # matrix = [[2, 1], [1, 1]]    # integer toral automorphism

    [params]                       # task parameters, see TASK_PARAMS
    horizon = 10000

    [output]
    dir = "out"
    csv = true

Rationals (weights, points) may be given as integers or strings such as
``"3/2"``.  Validation errors name the offending field.
"""
from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TASKS = ("lyapunov", "flags", "adapted_norm", "stable_manifold", "normal_form", "holonomy", "algebra_suite")
PRECISIONS = ("double", "extended", "rational")
BUILTINS = ("cat", "twisted_cat")

# name -> (type, default); default None means optional with no value
TASK_PARAMS: Dict[str, Dict[str, tuple]] = {
    "lyapunov": {"horizon": (int, 10000), "q0": (list, ["1/7", "2/9"]), "burn_in": (int, None)},
    "flags": {"horizon": (int, 1000), "q0": (list, ["1/7", "2/9"]), "threshold": (float, None)},
    "adapted_norm": {"horizon": (int, 1000), "q0": (list, ["1/7", "2/9"]), "eps": (float, 0.05),
                     "n_vectors": (int, 1000), "closed_form_exponent": (float, 0.7)},
    "stable_manifold": {"degree": (int, 4), "tol": (float, 1e-9)},
    "normal_form": {"degree": (int, 4), "weights": (list, None), "method": (str, "both"),
                    "horizon": (int, 60), "tol": (float, 1e-9)},
    "holonomy": {"t_max": (int, 50), "x0": (list, ["1/7", "2/9"]), "s": (float, 1e-3),
                 "blocks": (list, None)},
    "algebra_suite": {"profiles": (list, [[1], [2, 1], [3, 2, 1], [3, 2, 2, 1]]), "samples": (int, 500),
                      "nilpotent_samples": (int, 200), "include": (list, ["algebra", "nilpotent"])},
}
TASK_PRECISION = {
    "lyapunov": ("double", "extended"),
    "flags": ("double",),
    "adapted_norm": ("double",),
    "stable_manifold": ("rational", "double"),
    "normal_form": ("rational", "double"),
    "holonomy": ("double",),
    "algebra_suite": ("rational",),
}
SYSTEM_TASKS = ("lyapunov", "flags", "adapted_norm", "stable_manifold", "normal_form", "holonomy")


class ConfigError(ValueError):
    """Validation failure; ``field`` is the dotted path of the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ConfigParseError(ValueError):
    pass


@dataclass
class SystemSpec:
    builtin: Optional[str] = None
    params: Dict[str, float] = field(default_factory=dict)
    map: Optional[str] = None
    coords: Optional[List[str]] = None
    kind: str = "polynomial"
    matrix: Optional[List[List[int]]] = None


@dataclass
class OutputSpec:
    dir: str = "out"
    csv: bool = False


@dataclass
class ExperimentConfig:
    task: str
    name: str = "experiment"
    seed: int = 0
    precision: str = "double"
    system: Optional[SystemSpec] = None
    params: Dict[str, Any] = field(default_factory=dict)
    output: OutputSpec = field(default_factory=OutputSpec)

    def echo(self) -> dict:
        """Normalized config as stored in the report (output paths excluded)."""
        d = asdict(self)
        d.pop("output")
        return d


def rational(value, where: str, positive: bool = False) -> Fraction:
    if isinstance(value, bool):
        raise ConfigError(where, "expected a rational number")
    try:
        q = Fraction(str(value)) if isinstance(value, float) else Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError):
        raise ConfigError(where, f"cannot read {value!r} as a rational number") from None
    if positive and q <= 0:
        raise ConfigError(where, f"must be a positive rational, got {value!r}")
    return q


def weight_list(values, where: str, non_increasing: bool = True) -> List[Fraction]:
    if not isinstance(values, list) or not values:
        raise ConfigError(where, "expected a non-empty list of weights")
    ws = [rational(v, f"{where}[{k}]", positive=True) for k, v in enumerate(values)]
    if non_increasing:
        for k in range(1, len(ws)):
            if ws[k] > ws[k - 1]:
                raise ConfigError(f"{where}[{k}]", "weights must be non-increasing")
    return ws


def parse_file(path: Path) -> dict:
    """Raw dict from a TOML or JSON file; raises ConfigParseError or OSError."""
    raw = Path(path).read_bytes()
    try:
        if Path(path).suffix.lower() == ".json":
            data = json.loads(raw.decode("utf-8"))
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigParseError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigParseError(f"{path}: top level must be a table")
    return data


def _check_type(value, typ, where):
    if typ is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif typ is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, typ)
    if not ok:
        raise ConfigError(where, f"expected {typ.__name__}, got {type(value).__name__}")
    return float(value) if typ is float else value


def _system(data, task: str) -> Optional[SystemSpec]:
    if task not in SYSTEM_TASKS:
        if data is not None:
            raise ConfigError("system", f"task {task!r} takes no system")
        return None
    if data is None:
        if task == "holonomy":
            return SystemSpec(builtin="twisted_cat")
        raise ConfigError("system", f"task {task!r} needs a [system] table")
    if not isinstance(data, dict):
        raise ConfigError("system", "expected a table")
    unknown = set(data) - {"builtin", "params", "map", "coords", "kind", "matrix"}
    if unknown:
        raise ConfigError(f"system.{sorted(unknown)[0]}", "unknown key")
    given = [k for k in ("builtin", "map", "matrix") if k in data]
    if len(given) != 1:
        raise ConfigError("system", "give exactly one of builtin, map, matrix")
    spec = SystemSpec()
    if "builtin" in data:
        if data["builtin"] not in BUILTINS:
            raise ConfigError("system.builtin", f"unknown builtin {data['builtin']!r}; choose from {BUILTINS}")
        spec.builtin = data["builtin"]
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("system.params", "expected a table")
        allowed = {"cat": set(), "twisted_cat": {"kappa", "beta", "shift"}}[spec.builtin]
        for k, v in params.items():
            if k not in allowed:
                raise ConfigError(f"system.params.{k}", f"not a parameter of {spec.builtin}")
            spec.params[k] = _check_type(v, float, f"system.params.{k}")
    elif "map" in data:
        spec.map = _check_type(data["map"], str, "system.map")
        coords = data.get("coords")
        if coords is not None:
            if not isinstance(coords, list) or not all(isinstance(c, str) and c for c in coords):
                raise ConfigError("system.coords", "expected a list of names")
            if len(set(coords)) != len(coords):
                raise ConfigError("system.coords", "names must be distinct")
            spec.coords = list(coords)
        spec.kind = data.get("kind", "polynomial")
        if spec.kind not in ("polynomial", "jet"):
            raise ConfigError("system.kind", "must be 'polynomial' or 'jet'")
    else:
        M = data["matrix"]
        if (not isinstance(M, list) or not M or any(not isinstance(r, list) or len(r) != len(M) for r in M)
                or any(not isinstance(x, int) or isinstance(x, bool) for r in M for x in r)):
            raise ConfigError("system.matrix", "expected a square integer matrix")
        spec.matrix = [list(r) for r in M]
        spec.kind = "toral"
    return spec


def _params(data, task: str, system: Optional[SystemSpec]) -> Dict[str, Any]:
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError("params", "expected a table")
    schema = TASK_PARAMS[task]
    for k in data:
        if k not in schema:
            raise ConfigError(f"params.{k}", f"unknown parameter for task {task!r}")
    out: Dict[str, Any] = {}
    for k, (typ, default) in schema.items():
        v = data.get(k, default)
        if v is None:
            continue
        out[k] = _check_type(v, typ, f"params.{k}")
    for k in ("horizon", "t_max", "degree", "n_vectors"):
        if k in out and out[k] < 1:
            raise ConfigError(f"params.{k}", "must be >= 1")
    for k in ("samples", "nilpotent_samples", "burn_in"):
        if k in out and out[k] < 0:
            raise ConfigError(f"params.{k}", "must be >= 0")
    for k in ("eps", "tol"):
        if k in out and not out[k] > 0:
            raise ConfigError(f"params.{k}", "must be positive")
    for k in ("q0", "x0"):
        if k in out:
            out[k] = [str(rational(v, f"params.{k}[{j}]")) for j, v in enumerate(out[k])]
    if task == "stable_manifold":
        if out["degree"] < 2:
            raise ConfigError("params.degree", "must be >= 2")
    if task == "normal_form":
        if system is None or system.map is None:
            raise ConfigError("system.map", "normal_form needs an inline jet")
        if "weights" not in out:
            raise ConfigError("params.weights", "normal_form needs one weight per coordinate")
        out["weights"] = [str(w) for w in weight_list(out["weights"], "params.weights", non_increasing=False)]
        if out["method"] not in ("fixed_point", "orbit", "both"):
            raise ConfigError("params.method", "must be fixed_point, orbit or both")
    if task == "holonomy":
        if system is None or system.builtin not in ("cat", "twisted_cat"):
            raise ConfigError("system.builtin", "holonomy runs on the cat map or its twisted cocycle")
        if "blocks" in out:
            bl = out["blocks"]
            if not all(isinstance(b, int) and not isinstance(b, bool) and b > 0 for b in bl) or sum(bl) != 2:
                raise ConfigError("params.blocks", "block sizes must be positive integers adding up to 2")
    if task == "algebra_suite":
        profs = out["profiles"]
        if not profs:
            raise ConfigError("params.profiles", "expected at least one weight profile")
        out["profiles"] = [[str(w) for w in weight_list(p, f"params.profiles[{j}]")] for j, p in enumerate(profs)]
        for j, part in enumerate(out["include"]):
            if part not in ("algebra", "nilpotent"):
                raise ConfigError(f"params.include[{j}]", "must be 'algebra' or 'nilpotent'")
    return out


def validate(data: dict, default_name: str = "experiment") -> ExperimentConfig:
    unknown = set(data) - {"name", "task", "seed", "precision", "system", "params", "output"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level key")
    task = data.get("task")
    if task not in TASKS:
        raise ConfigError("task", f"expected one of {TASKS}, got {task!r}")
    name = data.get("name", default_name)
    if not isinstance(name, str) or not name or "/" in name:
        raise ConfigError("name", "expected a plain file name")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("seed", "expected an unsigned 64-bit integer")
    precision = data.get("precision", TASK_PRECISION[task][0])
    if precision not in PRECISIONS:
        raise ConfigError("precision", f"expected one of {PRECISIONS}")
    if precision not in TASK_PRECISION[task]:
        raise ConfigError("precision", f"task {task!r} supports {TASK_PRECISION[task]}, got {precision!r}")
    system = _system(data.get("system"), task)
    params = _params(data.get("params"), task, system)
    out = data.get("output", {})
    if not isinstance(out, dict) or set(out) - {"dir", "csv"}:
        raise ConfigError("output", "expected a table with keys dir, csv")
    output = OutputSpec(dir=str(out.get("dir", "out")), csv=bool(out.get("csv", False)))
    return ExperimentConfig(task, name, seed, precision, system, params, output)


def load(path) -> ExperimentConfig:
    path = Path(path)
    return validate(parse_file(path), default_name=path.stem)

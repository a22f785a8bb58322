"""Command line runner: ``subres run <config>``.

Exit codes: 0 success, 2 config parse error, 3 validation error, 4 numeric
failure (the report is still written, with ``status = "failed"`` and the
divergence, resonance or counterexample embedded), 5 I/O error.  On exit
codes 2, 3 and 5 nothing is written.

Reports are JSON with sorted keys and carry no wall-clock data, so the same
config and seed always give byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__, batteries, cocyc, nform
from . import sralg
from .config import ConfigError, ConfigParseError, ExperimentConfig, parse_file, validate
from .errors import DivergenceError, NumericalFailure, SmallDivisor, UnresolvedFlag
from .rng import SplitMix64

SCHEMA = "subres.report/v1"
EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4, 5

log = logging.getLogger("subres")


@dataclass
class TaskOutput:
    results: Optional[dict]
    diagnostics: dict = field(default_factory=dict)
    table: Optional[List[List[Any]]] = None     # first row is the header
    failure: Optional[dict] = None


# -- helpers -------------------------------------------------------------------------

def build_system(cfg: ExperimentConfig) -> cocyc.SystemDef:
    spec = cfg.system
    if spec.builtin == "cat":
        return cocyc.cat_map()
    if spec.builtin == "twisted_cat":
        return cocyc.twisted_cat(**spec.params)
    if spec.matrix is not None:
        try:
            return cocyc.SystemDef("toral", len(spec.matrix), tuple(tuple(r) for r in spec.matrix), name="toral")
        except ValueError as exc:
            raise ConfigError("system.matrix", str(exc)) from None
    F = parse_map(cfg)
    return cocyc.polynomial_system(F.comps, name=cfg.name, kind=spec.kind)


def parse_map(cfg: ExperimentConfig, weights: Optional[Sequence] = None) -> sralg.PolyMap:
    spec = cfg.system
    n = len(spec.coords) if spec.coords else len([p for p in spec.map.split(";") if p.strip()])
    if weights is not None and len(weights) != n:
        raise ConfigError("params.weights", f"expected {n} weights, one per coordinate")
    try:
        # parsing only needs the names; placeholder weights are never used for classification
        space = sralg.WeightedSpace.from_weights([1] * n, spec.coords)
        return sralg.parse_text(spec.map, space)
    except (ValueError, KeyError) as exc:
        raise ConfigError("system.map", str(exc)) from None


def _point(values: Sequence[str], dim: int, where: str) -> List[Fraction]:
    if len(values) != dim:
        raise ConfigError(where, f"expected {dim} coordinates, got {len(values)}")
    return [Fraction(v) for v in values]


def _poly_text(comp: dict, names: Sequence[str]) -> str:
    if not comp:
        return "0"
    terms = []
    for e in sorted(comp, key=lambda e: (sum(e), tuple(-k for k in e))):
        c = comp[e]
        mono = " * ".join(n if k == 1 else f"{n}^{k}" for n, k in zip(names, e) if k) or "1"
        terms.append(f"{c} * {mono}")
    return " + ".join(terms)


def _floats(x) -> List[float]:
    return [float(v) for v in np.asarray(x).ravel()]


def _failure(exc: Exception) -> dict:
    d = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, SmallDivisor):
        d["slot"] = [exc.slot[0], list(exc.slot[1])] if isinstance(exc.slot, tuple) and len(exc.slot) == 2 \
            else str(exc.slot)
        d["divisor"] = str(exc.divisor)
    return d


# -- tasks ----------------------------------------------------------------------------

def task_lyapunov(cfg: ExperimentConfig, **_) -> TaskOutput:
    p = cfg.params
    sys_ = build_system(cfg)
    q0 = _point(p["q0"], sys_.dim, "params.q0")
    trace = cocyc.make_trace(sys_, q0, p["horizon"])
    if not np.all(np.isfinite(trace.matrices)):
        raise NumericalFailure("orbit left the domain: non-finite cocycle values")
    burn = p.get("burn_in")
    hist = None
    if cfg.precision == "extended":
        ex = cocyc.lyapunov_qr(trace, burn, precision="extended")
    else:
        ex, hist = cocyc.lyapunov_qr(trace, burn, precision="double", return_history=True)
    res = {"exponents": _floats(ex), "sum": float(np.sum(ex)),
           "log_det_average": cocyc.log_det_average(trace, burn)}
    if cfg.system.builtin == "cat" or (cfg.system.matrix is not None and sys_.matrix == cocyc.CAT):
        ref = [cocyc.CAT_EXPONENT, -cocyc.CAT_EXPONENT]
        res["reference"] = ref
        res["max_error"] = float(max(abs(a - b) for a, b in zip(ex, ref)))
    diag = {"burn_in": len(trace.matrices) // 10 if burn is None else burn, "steps": len(trace.matrices)}
    table = None
    if hist is not None:
        stride = max(1, len(hist) // 1000)
        b0 = diag["burn_in"]
        table = [["step"] + [f"lambda_{i + 1}" for i in range(len(ex))]]
        for n in range(0, len(hist), stride):
            table.append([b0 + n + 1] + sorted(_floats(hist[n]), reverse=True))
    return TaskOutput(res, diag, table)


def _eigen_flags(M, fr: cocyc.FlagResult) -> Optional[dict]:
    w, V = np.linalg.eig(np.asarray(M, dtype=float))
    if np.any(np.abs(w.imag) > 0):
        return None
    order = np.argsort(-np.abs(w.real))
    V = V[:, order].real
    sizes = [len(g) for g in fr.levels]
    fwd, bwd = [], []
    for i in range(len(sizes)):
        above = sum(sizes[:i])
        fwd.append(cocyc.subspace_angle(fr.forward[i], V[:, above:]))
        if fr.backward:
            bwd.append(cocyc.subspace_angle(fr.backward[i], V[:, : above + sizes[i]]))
    return {"forward_angles": fwd, "backward_angles": bwd, "max_angle": max(fwd + bwd)}


def task_flags(cfg: ExperimentConfig, **_) -> TaskOutput:
    p = cfg.params
    sys_ = build_system(cfg)
    q0 = _point(p["q0"], sys_.dim, "params.q0")
    t = p["horizon"]
    trace = cocyc.make_trace(sys_, q0, t, back=t if sys_.invertible else 0)
    fr = cocyc.oseledets_flags(trace, t=t, threshold=p.get("threshold"))
    res = fr.to_json()
    if sys_.kind == "toral" and sys_.cocycle is None:
        cmp = _eigen_flags(sys_.matrix, fr)
        if cmp is not None:
            res["eigenline_check"] = cmp
    table = [["level", "exponent"]] + [[i, float(np.mean([fr.exponents[j] for j in g]))]
                                        for i, g in enumerate(fr.levels)]
    return TaskOutput(res, {"horizon": t, "back": t if sys_.invertible else 0}, table)


def task_adapted_norm(cfg: ExperimentConfig, **_) -> TaskOutput:
    p = cfg.params
    sys_ = build_system(cfg)
    q0 = _point(p["q0"], sys_.dim, "params.q0")
    eps = p["eps"]
    trace = cocyc.make_trace(sys_, q0, p["horizon"])
    try:
        an = cocyc.adapted_norm(trace, eps)
    except ValueError as exc:
        raise ConfigError("params.eps", str(exc)) from None
    rng = SplitMix64(cfg.seed)
    V = np.array([[rng.normal() for _ in range(trace.fiber_dim)] for _ in range(p["n_vectors"])])
    cc = cocyc.contraction_check(an, V)
    logenv = [math.log(an.envelope(n)) for n in range(len(an))]
    temp = cocyc.check_tempered(logenv, eps)
    # pure exponential block: scalar cocycle e^a, the form is a geometric sum
    a = p["closed_form_exponent"]
    an1 = cocyc.adapted_norm(cocyc.constant_trace([[math.exp(a)]], p["horizon"]), eps)
    n_last = len(an1) - 1
    g_last = float(an1.grams[-1][0][0, 0])
    closed = {
        "exponent": a,
        "window_end": n_last,
        "gram": g_last,
        "finite_sum": cocyc.geometric_closed_form(eps, n_last),
        "limit": cocyc.geometric_closed_form(eps),
        "error_finite": abs(g_last - cocyc.geometric_closed_form(eps, n_last)),
        "error_limit": abs(g_last - cocyc.geometric_closed_form(eps)),
    }
    res = {"eps": eps, "block_exponents": [an.block_exponent(i) for i in range(an.nblocks)],
           "contraction": cc, "envelope_tempered": temp.to_json(), "closed_form": closed,
           "window": len(an)}
    out = TaskOutput(res, {"envelope_max": float(max(np.exp(logenv)))},
                     [["step", "log_envelope"]] + [[n, v] for n, v in enumerate(logenv)])
    if cc["violations"]:
        out.failure = {"type": "ContractionViolation", "message": f"{cc['violations']} vectors broke the bound"}
    return out


def task_stable_manifold(cfg: ExperimentConfig, **_) -> TaskOutput:
    p = cfg.params
    sys_ = build_system(cfg)
    mode = "rational" if cfg.precision == "rational" else "float"
    jet = cocyc.local_stable_manifold(sys_, p["degree"], mode=mode, tol=p["tol"])
    res = jet.to_json()
    if mode == "rational" and cfg.system.map is not None:
        names = parse_map(cfg).source.coords
        s_idx, u_idx = cocyc.split_linear(sys_.linear_part(), True)
        s_names = [names[i] for i in s_idx]
        res["graph"] = {names[j]: _poly_text(comp, s_names) for j, comp in zip(u_idx, jet.coeffs)}
    return TaskOutput(res, {"mode": mode})


def task_normal_form(cfg: ExperimentConfig, **_) -> TaskOutput:
    p = cfg.params
    weights = [Fraction(w) for w in p["weights"]]
    F = parse_map(cfg, weights)
    D = p["degree"]
    try:
        A = nform.Jet(tuple(F.comps), D, tuple(weights))
    except ValueError as exc:
        raise ConfigError("system.map", str(exc)) from None
    if cfg.precision == "double":
        A = A.to_float()
    res: Dict[str, Any] = {}
    table = None
    failure = None
    fp = orb = None
    if p["method"] in ("fixed_point", "both"):
        fp = nform.normal_form_fixed_point(A, weights, D, tol=p["tol"])
        res["fixed_point"] = fp.to_json()
    if p["method"] in ("orbit", "both"):
        orb = nform.normal_form_orbit([A] * p["horizon"], weights, D, tol=p["tol"])
        res["orbit"] = orb.to_json()
        # the orbit limit conjugates the other way round: compare its inverse
        res["orbit"]["N_inverse_text"] = nform.jet_invert(orb.N).to_text()
        table = [["iteration", "deviation"]] + [[k + 1, d] for k, d in enumerate(orb.deviations)]
        if orb.verdict == "diverged":
            failure = {"type": "DivergenceError", "message": f"orbit iteration diverged, fitted rate {orb.rate:.6g}",
                       "rate": orb.rate}
    if fp is not None and orb is not None:
        diff = nform.jet_invert(orb.N) - fp.N
        res["agreement"] = max((abs(float(c)) for comp in diff for c in comp.values()), default=0.0)
    return TaskOutput(res, {"degree": D}, table, failure)


def task_holonomy(cfg: ExperimentConfig, **_) -> TaskOutput:
    p = cfg.params
    sys_ = build_system(cfg)
    x0 = _point(p["x0"], 2, "params.x0")
    T = p["t_max"]
    X, Y = cocyc.stable_leaf_pair(x0, p["s"], T)
    mx, my = cocyc.cocycle_along(sys_, X), cocyc.cocycle_along(sys_, Y)
    blocks = p.get("blocks") or ([1, 1] if sys_.cocycle == "twisted" else [2])
    hxy = nform.holonomy_graded(mx, my, T, blocks)
    hyx = nform.holonomy_graded(my, mx, T, blocks)
    hxx = nform.holonomy_graded(mx, mx, T, blocks)
    prod = hxy.H @ hyx.H
    res = {
        "H_xy": hxy.to_json(), "H_yx": hyx.to_json(),
        "H_xx_is_identity": bool(np.array_equal(hxx.H, np.eye(2))),
        "inverse_error": float(np.abs(prod - np.eye(2)).max()),
        "stable_exponent": cocyc.CAT_EXPONENT,
        "expected_ratio": math.exp(-cocyc.CAT_EXPONENT),
    }
    table = [["step", "increment"]] + [[n + 1, v] for n, v in enumerate(hxy.increments)]
    out = TaskOutput(res, {"blocks": blocks, "s": p["s"]}, table)
    if hxy.verdict != "converged" or hyx.verdict != "converged":
        out.failure = {"type": "DivergenceError", "message": "holonomy increments are not summable",
                       "ratio": hxy.ratio}
    return out


def task_algebra_suite(cfg: ExperimentConfig, compose_fn: Callable = sralg.compose, **_) -> TaskOutput:
    p = cfg.params
    rep = batteries.algebra_suite([[Fraction(w) for w in prof] for prof in p["profiles"]], p["samples"], cfg.seed,
                                  compose_fn=compose_fn, nilpotent_samples=p["nilpotent_samples"],
                                  include=tuple(p["include"]))
    table = [["profile", "law", "passed", "failed"]]
    for prof, per in rep.laws.items():
        for law, t in per.items():
            table.append([prof, law, t.passed, t.failed])
    out = TaskOutput(rep.to_json(), {"warnings": rep.warnings}, table)
    if not rep.ok:
        out.failure = {"type": "LawFailure", "message": "exact law battery failed",
                       "counterexamples": rep.counterexamples()}
    return out


TASKS: Dict[str, Callable[..., TaskOutput]] = {
    "lyapunov": task_lyapunov,
    "flags": task_flags,
    "adapted_norm": task_adapted_norm,
    "stable_manifold": task_stable_manifold,
    "normal_form": task_normal_form,
    "holonomy": task_holonomy,
    "algebra_suite": task_algebra_suite,
}


# -- reports ----------------------------------------------------------------------------

def _clean(x):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, Fraction):
        return str(x)
    return x


def execute(cfg: ExperimentConfig, **hooks) -> tuple:
    """Run the task; returns ``(report dict, csv text or None, exit code)``."""
    try:
        out = TASKS[cfg.task](cfg, **hooks)
    except (NumericalFailure, DivergenceError, SmallDivisor, UnresolvedFlag, np.linalg.LinAlgError) as exc:
        out = TaskOutput(None, {}, None, _failure(exc))
    report = {
        "schema": SCHEMA,
        "build": __version__,
        "config": cfg.echo(),
        "status": "failed" if out.failure else "ok",
        "results": out.results,
        "diagnostics": out.diagnostics,
    }
    if out.failure:
        report["failure"] = out.failure
    text = None
    if out.table is not None and cfg.output.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in out.table:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        text = buf.getvalue()
    return _clean(report), text, EXIT_NUMERIC if out.failure else EXIT_OK


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def run(config_path, out_dir=None, seed=None, precision=None, **hooks) -> int:
    try:
        data = parse_file(Path(config_path))
    except ConfigParseError as exc:
        log.error("parse error: %s", exc)
        return EXIT_PARSE
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_IO
    if seed is not None:
        data["seed"] = seed
    if precision is not None:
        data["precision"] = precision
    try:
        cfg = validate(data, default_name=Path(config_path).stem)
        if out_dir is not None:
            cfg.output.dir = str(out_dir)
        report, table, code = execute(cfg, **hooks)
    except ConfigError as exc:
        log.error("invalid config: %s", exc)
        return EXIT_VALIDATION
    if code == EXIT_NUMERIC:
        log.error("numeric failure: %s", report["failure"].get("message"))
    try:
        d = Path(cfg.output.dir)
        d.mkdir(parents=True, exist_ok=True)
        _write(d / f"{cfg.name}.json", dumps(report))
        if table is not None:
            _write(d / f"{cfg.name}.csv", table)
    except OSError as exc:
        log.error("cannot write report: %s", exc)
        return EXIT_IO
    log.info("wrote %s", Path(cfg.output.dir) / f"{cfg.name}.json")
    return code


def _u64(s: str) -> int:
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="subres", description="Run a configured experiment and write a JSON report.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one config file (TOML or JSON)")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides output.dir)")
    r.add_argument("--seed", type=_u64, help="override the config seed")
    r.add_argument("--precision", choices=("double", "extended", "rational"))
    r.add_argument("--verbose", action="store_true")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return run(args.config, args.out, args.seed, args.precision)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Every run resolves a JSON configuration (built-in defaults, then an
optional ``--config`` file, then command-line flags), validates it against
:data:`SCHEMA`, writes the resolved configuration next to its results and
stamps every output with the configuration's SHA-256.  The hash covers
everything except ``threads`` and ``output.directory``, which cannot change
results.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 numeric
domain error, 1 anything else.  Failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema

from . import _svg
from . import observables as obs
from . import oracle
from .activation import Activation
from .errors import (ConfigError, InvalidArgumentError, NumericDomainError, SolverDivergenceError,
                     TensorGLMError, UnsupportedPriorError, UnsupportedSizeError)
from .potential import ModelParams, OverlapPoint, psi
from .prior import Prior
from .solver import FixedPointConfig, mmse_from_overlap, solve_variational

COMMANDS = ("potential", "solve", "sweep-lambda", "phase-diagram", "limit-curve", "oracle", "immse-check")
SWEEP_FIELDS = ("lambda", "alpha", "q_x", "q_s", "r_s", "psi", "mmse", "near_degenerate")
ORACLE_FIELDS = ("lambda", "n", "p", "mi_est", "mi_se", "mmse_est", "mmse_se")
THREADS_ENV = "TENSORGLM_THREADS"

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_SOLVER, EXIT_DOMAIN = 0, 1, 2, 3, 4

# schema -------------------------------------------------------------------

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_posint = {"type": "integer", "minimum": 1}


def _kind(name, **props):
    return {"type": "object", "properties": {"kind": {"const": name}, **props},
            "required": ["kind"], "additionalProperties": False}


_grid = {
    "oneOf": [
        {"type": "array", "items": _pos, "minItems": 1},
        {"type": "object", "properties": {"start": _pos, "stop": _pos, "num": _posint},
         "required": ["start", "stop", "num"], "additionalProperties": False},
        {"type": "null"},
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "tensorglm run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "threads": _posint,
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "prior": {"oneOf": [
                    _kind("gaussian", mean=_num, variance=_nonneg),
                    _kind("two_point", v_plus=_num, v_minus=_num,
                          p_plus={"type": "number", "minimum": 0, "maximum": 1}),
                    _kind("finite_support", values={"type": "array", "items": _num, "minItems": 1},
                          probs={"type": "array", "items": _nonneg, "minItems": 1}),
                    _kind("rademacher"),
                    _kind("bernoulli_rademacher", rho={"type": "number", "exclusiveMinimum": 0, "maximum": 1}),
                ]},
                "activation": {"oneOf": [
                    _kind("linear"), _kind("sign"), _kind("sign_deadzone", epsilon=_nonneg)]},
                "rank": {"type": "integer", "minimum": 2},
                "lambda": _pos,
                "alpha": _pos,
                "quad_order": {"type": "integer", "minimum": 2},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "tol": _pos,
                "max_iter": _posint,
                "n_random": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "grid_nx": {"type": "integer", "minimum": 2},
                "grid_ns": {"type": "integer", "minimum": 2},
                "dq_step": {"oneOf": [_pos, {"type": "null"}]},
                "grid": {"enum": ["auto", "always", "never"]},
                "route_limit": {"type": "boolean"},
                "accelerate": {"type": "boolean"},
                "anderson_depth": _posint,
            },
        },
        "point": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"q_x": _nonneg, "q_s": _nonneg, "r_s": _nonneg},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"lambda": _grid, "alpha": _grid},
        },
        "detect": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"enabled": {"type": "boolean"},
                           "jump_threshold": {"oneOf": [_pos, {"type": "null"}]},
                           "width": _pos},
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n": _posint, "p": _posint, "mi_samples": _posint,
                           "mmse_samples": _posint, "dlambda": _pos},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string", "minLength": 1},
                "formats": {"type": "array", "items": {"enum": ["csv", "json", "svg"]}, "uniqueItems": True},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
    },
}

DEFAULTS = {
    "threads": 1,
    "model": {"prior": {"kind": "gaussian", "mean": 0.0, "variance": 1.0}, "activation": {"kind": "linear"},
              "rank": 3, "lambda": 1.0, "alpha": 1.0, "quad_order": 41},
    "solver": {"damping": 0.5, "tol": 1e-9, "max_iter": 2000, "n_random": 3, "seed": 0, "grid_nx": 64,
               "grid_ns": 64, "dq_step": None, "grid": "auto", "route_limit": True, "accelerate": True,
               "anderson_depth": 4},
    "point": {"q_x": 0.0, "q_s": 0.0, "r_s": 0.0},
    "grid": {"lambda": None, "alpha": None},
    "detect": {"enabled": True, "jump_threshold": None, "width": 1e-3},
    "oracle": {"n": 12, "p": 6, "mi_samples": oracle.MI_SAMPLES, "mmse_samples": oracle.MMSE_SAMPLES,
               "dlambda": 0.5},
    "output": {"directory": "tensorglm_out", "formats": ["csv", "json", "svg"], "seed": 0},
}

_PRIOR_DEFAULTS = {"gaussian": {"mean": 0.0, "variance": 1.0},
                   "two_point": {"v_plus": 1.0, "v_minus": -1.0, "p_plus": 0.5}}


class _Failure(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code, self.kind, self.message = code, kind, message


# configuration ------------------------------------------------------------


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("prior", "activation"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(cfg: dict) -> None:
    """Raise :class:`ConfigError` unless ``cfg`` conforms to :data:`SCHEMA`."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema error at {where}: {exc.message}") from None


def resolve(file_cfg: dict | None, overrides: dict | None = None) -> dict:
    """Defaults, then file values, then overrides; validated at each layer."""
    layer = dict(file_cfg or {})
    over = dict(overrides or {})
    command = over.get("command", layer.get("command"))
    validate({**layer, "command": command})
    validate({**over, "command": command})
    cfg = _merge(DEFAULTS, layer)
    cfg = _merge(cfg, over)
    prior = cfg["model"]["prior"]
    cfg["model"]["prior"] = {**_PRIOR_DEFAULTS.get(prior["kind"], {}), **prior}
    if cfg["model"]["activation"]["kind"] == "sign_deadzone":
        cfg["model"]["activation"].setdefault("epsilon", 0.0)
    validate(cfg)
    return cfg


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON of ``cfg`` without ``threads`` and ``output.directory``."""
    body = copy.deepcopy(cfg)
    body.pop("threads", None)
    body.get("output", {}).pop("directory", None)
    text = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode()).hexdigest()


def grid_values(spec) -> list[float]:
    if spec is None:
        return []
    if isinstance(spec, dict):
        a, b, n = float(spec["start"]), float(spec["stop"]), int(spec["num"])
        if n == 1:
            return [a]
        return [a + (b - a) * i / (n - 1) for i in range(n)]
    return [float(v) for v in spec]


def build_params(cfg: dict) -> ModelParams:
    m = cfg["model"]
    return ModelParams(float(m["lambda"]), float(m["alpha"]), Prior.from_config(m["prior"]),
                       Activation.from_config(m["activation"]), int(m["rank"]), int(m["quad_order"]))


def build_solver(cfg: dict) -> FixedPointConfig:
    return FixedPointConfig(**cfg["solver"])


# formatting ---------------------------------------------------------------


def fmt(v) -> str:
    """CSV cell: shortest round-trip decimal for floats, lower-case booleans."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        return _jsonable(v.item())
    return v


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def csv_text(fields, rows, tag: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config_sha256: {tag}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([fmt(row[f]) for f in fields])
    return buf.getvalue()


def _sweep_row(pt) -> dict:
    return {"lambda": pt.lam, "alpha": pt.alpha, "q_x": pt.q_x_star, "q_s": pt.q_s_star, "r_s": pt.r_s_star,
            "psi": pt.psi, "mmse": pt.mmse, "near_degenerate": bool(pt.near_degenerate)}


def _lambda_c_dict(lc):
    if lc is None:
        return None
    return {"lambda_c": lc.lambda_c, "is_discontinuous": lc.is_discontinuous, "bracket": list(lc.bracket),
            "q_below": lc.q_below, "q_above": lc.q_above}


# commands -----------------------------------------------------------------


def _need_grid(cfg, axis):
    vals = grid_values(cfg["grid"][axis])
    if not vals:
        raise ConfigError(f"schema error at grid/{axis}: a nonempty {axis} grid is required")
    return vals


def _cmd_potential(cfg, params, workers):
    pt = OverlapPoint(**{k: float(v) for k, v in cfg["point"].items()})
    value = psi(params, pt)
    return {"psi": value, "point": cfg["point"], "rho_x": params.rho_x}, None


def _cmd_solve(cfg, params, workers):
    res = solve_variational(params, build_solver(cfg))
    q = res.point
    mmse = mmse_from_overlap(params, q.q_x)
    out = {"q_x_star": q.q_x, "q_s_star": q.q_s, "r_s_star": q.r_s, "psi": res.psi_value,
           "mutual_information": res.psi_value, "mmse": mmse, "near_degenerate": res.near_degenerate,
           "converged": res.converged, "iterations": res.iterations, "method": res.method, "rho_x": params.rho_x}
    row = {"lambda": params.lam, "alpha": params.alpha, "q_x": q.q_x, "q_s": q.q_s, "r_s": q.r_s,
           "psi": res.psi_value, "mmse": mmse, "near_degenerate": res.near_degenerate}
    return out, ("solve", SWEEP_FIELDS, [row], None)


def _detect(cfg, points, resolve):
    d = cfg["detect"]
    if not d["enabled"]:
        return None
    return _lambda_c_dict(obs.detect_lambda_c(points, d["jump_threshold"], resolve=resolve, width=d["width"]))


def _line_plot(rows, title):
    lams = [r["lambda"] for r in rows]
    return lambda tag: _svg.line_chart(lams, {"q_x": [r["q_x"] for r in rows], "mmse": [r["mmse"] for r in rows]},
                                       title=title, xlabel="lambda", ylabel="value", tag=tag)


def _cmd_sweep(cfg, params, workers):
    lams = _need_grid(cfg, "lambda")
    scfg = build_solver(cfg)
    points = obs.sweep_lambda(params, lams, scfg, workers=workers)
    rows = [_sweep_row(p) for p in points]
    out = {"rows": rows, "lambda_c": _detect(cfg, points, obs.resolver(params, scfg)),
           "errors": [p.error for p in points if p.error],
           "monotone_ok": all(p.monotone_ok for p in points)}
    return out, ("sweep", SWEEP_FIELDS, rows, _line_plot(rows, f"overlap and MMSE, alpha={params.alpha!r}"))


def _cmd_limit(cfg, params, workers):
    lams = _need_grid(cfg, "lambda")
    pts = obs.limit_curve(lams, params.prior, params.activation, params.rule, params.rank)
    q_s = min(params.m_s**2, params.rho_s)
    rows = [{"lambda": p.lam, "alpha": 0.0, "q_x": p.q_x_star, "q_s": q_s, "r_s": 0.0, "psi": p.psi,
             "mmse": p.mmse, "near_degenerate": bool(p.near_degenerate)} for p in pts]
    resolve = obs.limit_resolver(params.prior, params.activation, params.rule, params.rank)
    out = {"rows": rows, "lambda_c": _detect(cfg, pts, resolve)}
    return out, ("limit_curve", SWEEP_FIELDS, rows, _line_plot(rows, "small-alpha limit"))


def _cmd_phase(cfg, params, workers):
    lams, alphas = _need_grid(cfg, "lambda"), _need_grid(cfg, "alpha")
    grid = obs.SweepGrid(tuple(lams), tuple(alphas), params)
    scfg = build_solver(cfg)
    table = obs.sweep_phase_diagram(grid, scfg, workers=workers)
    rows = [_sweep_row(p) for row in table for p in row]
    curve = []
    for alpha, row in zip(alphas, table):
        lc = _detect(cfg, row, obs.resolver(params.with_(alpha=alpha), scfg))
        curve.append({"alpha": alpha, "lambda_c": lc})
    top = params.rho_x ** params.rank

    def plot(tag):
        z = [[p.mmse for p in row] for row in table]
        return _svg.heatmap(lams, alphas, z, title="tensor MMSE", xlabel="lambda", ylabel="alpha",
                            vmin=0.0, vmax=top, tag=tag)

    return {"rows": rows, "lambda_c": curve}, ("phase_diagram", SWEEP_FIELDS, rows, plot)


def _oracle_point(job):
    params, n, p, mi_samples, mmse_samples, seed = job
    mi, mmse = oracle.mc_estimates(params, n, p, mi_samples, mmse_samples, seed)
    return {"lambda": params.lam, "n": n, "p": p, "mi_est": mi.estimate, "mi_se": mi.standard_error,
            "mmse_est": mmse.estimate, "mmse_se": mmse.standard_error}


def _cmd_oracle(cfg, params, workers):
    o = cfg["oracle"]
    lams = grid_values(cfg["grid"]["lambda"]) or [params.lam]
    seed = cfg["output"]["seed"]
    jobs = [(params.with_(lam=lam), o["n"], o["p"], o["mi_samples"], o["mmse_samples"], seed) for lam in lams]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_oracle_point, jobs))
    else:
        rows = [_oracle_point(j) for j in jobs]

    def plot(tag):
        return _svg.line_chart(lams, {"mi_est": [r["mi_est"] for r in rows], "mmse_est": [r["mmse_est"] for r in rows]},
                               title=f"oracle n={o['n']} p={o['p']}", xlabel="lambda", ylabel="value", tag=tag)

    return {"rows": rows}, ("oracle", ORACLE_FIELDS, rows, plot)


def _cmd_immse(cfg, params, workers):
    o = cfg["oracle"]
    rep = oracle.immse_check(params, o["n"], o["p"], o["mi_samples"], o["dlambda"], cfg["output"]["seed"],
                             o["mmse_samples"])
    return rep.to_dict(), None


_RUNNERS = {"potential": _cmd_potential, "solve": _cmd_solve, "sweep-lambda": _cmd_sweep,
            "phase-diagram": _cmd_phase, "limit-curve": _cmd_limit, "oracle": _cmd_oracle,
            "immse-check": _cmd_immse}


def run(cfg: dict, *, stdout=None) -> dict:
    """Execute a resolved configuration and write its outputs; returns the result object."""
    tag = config_hash(cfg)
    params = build_params(cfg)
    result, table = _RUNNERS[cfg["command"]](cfg, params, int(cfg["threads"]))
    result = {"command": cfg["command"], "config_sha256": tag, **result}
    outdir = Path(cfg["output"]["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    formats = cfg["output"]["formats"]
    written = {"resolved_config": str(outdir / "resolved_config.json")}
    _write(outdir / "resolved_config.json", dumps({"config_sha256": tag, "config": cfg}))
    stem = cfg["command"].replace("-", "_")
    if "json" in formats:
        written["json"] = str(outdir / f"{stem}.json")
        _write(outdir / f"{stem}.json", dumps(result))
    if table is not None:
        name, fields, rows, plot = table
        if "csv" in formats:
            written["csv"] = str(outdir / f"{name}.csv")
            _write(outdir / f"{name}.csv", csv_text(fields, rows, tag))
        if "svg" in formats and plot is not None:
            written["svg"] = str(outdir / f"{name}.svg")
            _write(outdir / f"{name}.svg", plot(tag))
    (stdout or sys.stdout).write(dumps({**result, "outputs": written}))
    return result


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# argument parsing ---------------------------------------------------------


def _parse_grid(text: str):
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {text!r} must be start:stop:num")
        try:
            return {"start": float(parts[0]), "stop": float(parts[1]), "num": int(parts[2])}
        except ValueError:
            raise ConfigError(f"grid {text!r} must be start:stop:num") from None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"grid {text!r} must be a comma-separated list of numbers") from None


def _parse_param(text: str):
    key, sep, val = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"prior parameter {text!r} must look like key=value")
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        raise ConfigError(f"prior parameter value {val!r} is not valid JSON") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Failure(EXIT_CONFIG, "ConfigError", message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tensorglm", description="Replica potentials, phase diagrams and finite-size oracles.")
    parser.add_argument("--print-schema", action="store_true", help="print the configuration schema and exit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file; flags override its values")
        p.add_argument("--threads", type=int, help=f"worker processes (default from ${THREADS_ENV}, else 1)")
        g = p.add_argument_group("model")
        g.add_argument("--prior", help="gaussian, two_point, finite_support, rademacher, bernoulli_rademacher")
        g.add_argument("--prior-param", action="append", default=[], metavar="KEY=JSON",
                       help="prior parameter, e.g. p_plus=0.6 or values=[-1,1]")
        g.add_argument("--activation", help="linear, sign or sign_deadzone")
        g.add_argument("--epsilon", type=float, help="dead-zone half width")
        g.add_argument("--rank", type=int)
        g.add_argument("--lambda", dest="lam", type=float)
        g.add_argument("--alpha", type=float)
        g.add_argument("--quad-order", type=int)
        g = p.add_argument_group("grids")
        g.add_argument("--lambda-grid", help="comma list or start:stop:num")
        g.add_argument("--alpha-grid", help="comma list or start:stop:num")
        g = p.add_argument_group("point")
        g.add_argument("--q-x", type=float)
        g.add_argument("--q-s", type=float)
        g.add_argument("--r-s", type=float)
        g = p.add_argument_group("solver")
        g.add_argument("--damping", type=float)
        g.add_argument("--tol", type=float)
        g.add_argument("--max-iter", type=int)
        g.add_argument("--n-random", type=int)
        g.add_argument("--solver-seed", type=int)
        g.add_argument("--grid-mode", choices=["auto", "always", "never"])
        g.add_argument("--route-limit", action=argparse.BooleanOptionalAction, default=None)
        g.add_argument("--accelerate", action=argparse.BooleanOptionalAction, default=None)
        g = p.add_argument_group("transition detection")
        g.add_argument("--detect", action=argparse.BooleanOptionalAction, default=None)
        g.add_argument("--jump-threshold", type=float)
        g.add_argument("--width", type=float)
        g = p.add_argument_group("oracle")
        g.add_argument("--n", type=int)
        g.add_argument("--p", type=int)
        g.add_argument("--mi-samples", type=int)
        g.add_argument("--mmse-samples", type=int)
        g.add_argument("--dlambda", type=float)
        g = p.add_argument_group("output")
        g.add_argument("--out", help="output directory")
        g.add_argument("--formats", help="comma list drawn from csv,json,svg")
        g.add_argument("--seed", type=int, help="oracle seed")
    return parser


_FLAG_PATHS = {
    "lam": ("model", "lambda"), "alpha": ("model", "alpha"), "rank": ("model", "rank"),
    "quad_order": ("model", "quad_order"),
    "q_x": ("point", "q_x"), "q_s": ("point", "q_s"), "r_s": ("point", "r_s"),
    "damping": ("solver", "damping"), "tol": ("solver", "tol"), "max_iter": ("solver", "max_iter"),
    "n_random": ("solver", "n_random"), "solver_seed": ("solver", "seed"), "grid_mode": ("solver", "grid"),
    "route_limit": ("solver", "route_limit"), "accelerate": ("solver", "accelerate"),
    "detect": ("detect", "enabled"), "jump_threshold": ("detect", "jump_threshold"), "width": ("detect", "width"),
    "n": ("oracle", "n"), "p": ("oracle", "p"), "mi_samples": ("oracle", "mi_samples"),
    "mmse_samples": ("oracle", "mmse_samples"), "dlambda": ("oracle", "dlambda"),
    "out": ("output", "directory"), "seed": ("output", "seed"),
}


def _overrides(args, file_cfg: dict) -> dict:
    over: dict = {"command": args.command}
    for dest, (sec, key) in _FLAG_PATHS.items():
        val = getattr(args, dest)
        if val is not None:
            over.setdefault(sec, {})[key] = val
    if args.threads is not None:
        over["threads"] = args.threads
    elif "threads" not in file_cfg and os.environ.get(THREADS_ENV):
        try:
            over["threads"] = int(os.environ[THREADS_ENV])
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    if args.prior is not None or args.prior_param:
        base = dict(file_cfg.get("model", {}).get("prior", DEFAULTS["model"]["prior"]))
        if args.prior is not None and args.prior != base.get("kind"):
            base = {"kind": args.prior}
        base.update(dict(_parse_param(t) for t in args.prior_param))
        over.setdefault("model", {})["prior"] = base
    if args.activation is not None or args.epsilon is not None:
        base = dict(file_cfg.get("model", {}).get("activation", DEFAULTS["model"]["activation"]))
        if args.activation is not None and args.activation != base.get("kind"):
            base = {"kind": args.activation}
        if args.epsilon is not None:
            base["epsilon"] = args.epsilon
        over.setdefault("model", {})["activation"] = base
    for dest, axis in (("lambda_grid", "lambda"), ("alpha_grid", "alpha")):
        val = getattr(args, dest)
        if val is not None:
            over.setdefault("grid", {})[axis] = _parse_grid(val)
    if args.formats is not None:
        over.setdefault("output", {})["formats"] = [f.strip() for f in args.formats.split(",") if f.strip()]
    return over


def _load(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, InvalidArgumentError, UnsupportedPriorError, UnsupportedSizeError)):
        return EXIT_CONFIG
    if isinstance(exc, SolverDivergenceError):
        return EXIT_SOLVER
    if isinstance(exc, NumericDomainError):
        return EXIT_DOMAIN
    return EXIT_OTHER


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.print_schema:
            sys.stdout.write(json.dumps(SCHEMA, indent=2, sort_keys=True) + "\n")
            return EXIT_OK
        if args.command is None:
            raise ConfigError("a command is required: " + ", ".join(COMMANDS))
        file_cfg = _load(args.config) if args.config else {}
        if "command" in file_cfg and file_cfg["command"] != args.command:
            raise ConfigError(f"config is for {file_cfg['command']!r}, not {args.command!r}")
        cfg = resolve(file_cfg, _overrides(args, file_cfg))
        run(cfg)
        return EXIT_OK
    except _Failure as exc:
        err = {"error": exc.kind, "message": exc.message, "exit_code": exc.code}
    except (TensorGLMError, ValueError, ArithmeticError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": _code(exc)}
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return err["exit_code"]


if __name__ == "__main__":
    sys.exit(main())

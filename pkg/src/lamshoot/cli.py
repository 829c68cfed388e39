"""``lamshoot`` command line: shoot, classify sweeps, searches and scans.

Every command writes into ``--out DIR`` and finishes with a ``manifest.json``
holding the effective configuration and a checksum per file. Settings come
from flags, then a ``--config`` key=value file, then built-in defaults.

Exit codes: 0 success, 2 usage or domain error, 3 no bracket, 4 precision
limit, 5 step failure. Errors are reported on stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io
from .classify import summarize, label_from_summary
from .errors import (ConfigurationError, DistinctRootsError, DomainError, InsufficientDataError,
                     NoBracketError, NotClosableError, PrecisionLimitError, ShootingError,
                     UnsupportedDimensionError)
from .geometry import (curvature_arrays, reflect_close, revolve_mesh, symmetric_extension,
                       torus_comparison)
from .ode_core import STEP_FAILURE, IntegratorControls, Params, integrate
from .search import (find_cylinder_delta, find_torus_deltas, label_transitions,
                     lambda_threshold_scan, sweep)

EXIT_OK, EXIT_USAGE, EXIT_NO_BRACKET, EXIT_PRECISION, EXIT_STEP_FAILURE = 0, 2, 3, 4, 5

CONTROL_KEYS = ("rel_tol", "abs_tol", "s_max", "r_max", "x_max", "event_tol", "max_steps",
                "sample_ds")

# key -> (type, default); the config file uses the same keys ("lambda" for lam)
SETTINGS = {
    "n": (int, 2),
    "lam": (float, 0.0),
    "out": (str, "lamshoot-out"),
    "report_flipped": (bool, False),
    "workers": (int, 1),
    "rel_tol": (float, None),
    "abs_tol": (float, None),
    "s_max": (float, None),
    "r_max": (float, None),
    "x_max": (float, None),
    "event_tol": (float, None),
    "max_steps": (int, None),
    "sample_ds": (float, None),
    "delta": (float, None),
    "full": (bool, False),
    "tol": (float, None),
    "closure_tol": (float, None),
    "segments": (int, 64),
    "grid": (int, 50),
    "lo": (float, 0.02),
    "hi": (float, 0.99),
    "lambdas": (str, "-0.05,-0.24,-0.4"),
}

DEFAULT_TOL = {"find-cylinder": 1e-10, "find-torus": 1e-12, "scan": 1e-12}


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, **detail):
        super().__init__(message)
        self.code, self.kind, self.detail = code, kind, detail


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, "usage", message)


def _parse_bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


def _convert(key: str, value):
    typ = SETTINGS[key][0]
    if typ is bool:
        return value if isinstance(value, bool) else _parse_bool(value)
    try:
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{key}: cannot read {value!r} as {typ.__name__}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("model and output")
    g.add_argument("--n", type=int, help="dimension of the hypersurface (default 2)")
    g.add_argument("--lambda", dest="lam", type=float, help="the constant lambda (default 0)")
    g.add_argument("--out", help="output directory (default lamshoot-out)")
    g.add_argument("--config", help="key=value file; flags override it")
    g.add_argument("--report-flipped", dest="report_flipped", action="store_const", const=True,
                   help="report lambda, H and curvatures for the opposite normal")
    g.add_argument("--workers", type=int, help="processes for sweeps (default 1)")
    c = common.add_argument_group("integrator")
    for key in CONTROL_KEYS:
        c.add_argument("--" + key.replace("_", "-"), dest=key,
                       type=SETTINGS[key][0], help=f"IntegratorControls.{key}")

    parser = _Parser(prog="lamshoot", description="Shooting toolkit for rotationally "
                     "symmetric lambda-hypersurfaces.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("shoot", parents=[common], help="integrate one profile curve")
    p.add_argument("--delta", type=float, help="launch radius")
    p.add_argument("--full", action="store_const", const=True,
                   help="keep integrating past s1")

    p = sub.add_parser("find-cylinder", parents=[common], help="locate the cylinder-type shot")
    p.add_argument("--tol", type=float, help="bracket width (default 1e-10)")

    p = sub.add_parser("find-torus", parents=[common], help="locate both torus shots")
    p.add_argument("--tol", type=float, help="bracket width (default 1e-12)")
    p.add_argument("--closure-tol", dest="closure_tol", type=float,
                   help="closure tolerance (default 1e-8 max(1, r(s1)))")
    p.add_argument("--segments", type=int, help="mesh segments around the axis (default 64)")

    p = sub.add_parser("sweep", parents=[common], help="classify a uniform grid of deltas")
    p.add_argument("--grid", type=int, help="number of deltas (default 50)")
    p.add_argument("--lo", type=float, help="lowest delta as a fraction of R_lambda (0.02)")
    p.add_argument("--hi", type=float, help="highest delta as a fraction of R_lambda (0.99)")

    p = sub.add_parser("scan", parents=[common], help="run both searches over a lambda grid")
    p.add_argument("--lambdas", help="comma-separated lambda values")
    p.add_argument("--tol", type=float, help="bracket width (default 1e-12)")
    p.add_argument("--closure-tol", dest="closure_tol", type=float)
    return parser


def effective_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (in increasing precedence)."""
    conf = {k: d for k, (_, d) in SETTINGS.items()}
    if args.config:
        for key, value in io.read_config(Path(args.config)).items():
            key = "lam" if key == "lambda" else key
            if key not in SETTINGS:
                raise ConfigurationError(f"unknown config key {key!r}")
            conf[key] = _convert(key, value)
    for key in SETTINGS:
        value = getattr(args, key, None)
        if value is not None:
            conf[key] = _convert(key, value)
    if conf["tol"] is None and args.command in DEFAULT_TOL:
        conf["tol"] = DEFAULT_TOL[args.command]
    return conf


def _controls(conf: dict) -> IntegratorControls:
    given = {k: conf[k] for k in CONTROL_KEYS if conf[k] is not None}
    return IntegratorControls(**given)


def _echo(conf: dict, command: str, params: Params | None, controls: IntegratorControls) -> dict:
    keep = {"shoot": ("delta", "full"), "find-cylinder": ("tol",),
            "find-torus": ("tol", "closure_tol", "segments"),
            "sweep": ("grid", "lo", "hi", "workers"), "scan": ("lambdas", "tol", "closure_tol")}
    out = {"n": conf["n"], "report_flipped": conf["report_flipped"]}
    if command != "scan":
        out["lambda"] = conf["lam"]
    out.update({k: conf[k] for k in keep[command]})
    ctl = controls.resolved(params) if params is not None else controls
    out["controls"] = {f.name: getattr(ctl, f.name) for f in fields(ctl)}
    return out


def _reported_lambda(conf: dict) -> float:
    return -conf["lam"] if conf["report_flipped"] else conf["lam"]


def _label_dict(label) -> dict:
    return {"delta": label.delta, "label": str(label.label), "margin": io.json_number(label.margin)}


def _search_json(res, conf: dict) -> dict:
    rep = res.report()
    rep["closure_error"] = io.json_number(rep["closure_error"])
    rep.update({"lo_label": _label_dict(res.lo_label), "hi_label": _label_dict(res.hi_label),
                "reported_lambda": _reported_lambda(conf),
                "normal_flipped": conf["report_flipped"]})
    if res.type3_signature is not None:
        rep["type3_signature"] = res.type3_signature
    return rep


def cmd_shoot(conf, params, controls, out: Path) -> int:
    if conf["delta"] is None:
        raise CliError(EXIT_USAGE, "usage", "shoot needs --delta")
    delta = conf["delta"]
    if not (math.isfinite(delta) and delta > 0):
        raise DomainError(f"delta must be positive, got {delta!r}")
    traj = integrate(delta, params, controls, stop=None if conf["full"] else "s1")
    io.write_trajectory_csv(traj, out / "trajectory.csv")
    io.write_events_json(traj, out / "events.json")
    info = {"delta": delta, "termination": traj.termination, "samples": len(traj),
            "s_end": float(traj.s[-1])}
    radius = params.cylinder_radius
    if 0 < delta < radius and abs(delta - radius) > controls.degeneracy_margin * max(1.0, radius):
        summary = summarize(traj)
        info["label"] = str(label_from_summary(summary, controls.resolved(params), traj).label)
        info.update({k: io.json_number(getattr(summary, k)) for k in ("s1", "s2", "s3", "s4", "b")})
    io.dump_json(info, out / "summary.json")
    if traj.termination == STEP_FAILURE:
        raise CliError(EXIT_STEP_FAILURE, "step-failure",
                       f"integration failed at s={float(traj.s[-1])!r}", s=float(traj.s[-1]))
    return EXIT_OK


def cmd_find_cylinder(conf, params, controls, out: Path) -> int:
    res = find_cylinder_delta(params, conf["tol"], controls)
    io.dump_json(_search_json(res, conf), out / "search.json")
    curve = symmetric_extension(res.trajectory)
    io.write_trajectory_csv(curve, out / "curve.csv",
                            curvature_arrays(curve, flip=conf["report_flipped"]))
    if params.n == 2:
        io.write_obj(revolve_mesh(curve, conf["segments"]), out / "cylinder.obj")
    return EXIT_OK


def cmd_find_torus(conf, params, controls, out: Path) -> int:
    lower, upper = find_torus_deltas(params, conf["tol"], controls, conf["closure_tol"])
    io.dump_json([_search_json(r, conf) for r in (lower, upper)], out / "search.json")
    tol = conf["closure_tol"]
    curves = []
    for tag, res in (("lower", lower), ("upper", upper)):
        curve = reflect_close(res.trajectory, tol if tol is not None else None)
        curves.append(curve)
        io.write_trajectory_csv(curve, out / f"torus_{tag}.csv",
                                curvature_arrays(curve, flip=conf["report_flipped"]))
        if params.n == 2:
            io.write_obj(revolve_mesh(curve, conf["segments"]), out / f"torus_{tag}.obj")
    io.dump_json(torus_comparison(curves), out / "comparison.json")
    return EXIT_OK


def cmd_sweep(conf, params, controls, out: Path) -> int:
    if conf["grid"] < 1 or not 0 < conf["lo"] <= conf["hi"] < 1:
        raise ConfigurationError("need grid >= 1 and 0 < lo <= hi < 1")
    radius = params.cylinder_radius
    deltas = np.linspace(conf["lo"], conf["hi"], conf["grid"]) * radius
    rows = sweep(params, deltas, controls, workers=conf["workers"])
    io.write_classify_csv(rows, out / "sweep.csv")
    io.dump_json([{"delta_lo": a, "delta_hi": b, "from": la, "to": lb}
                  for a, b, la, lb in label_transitions(rows)], out / "transitions.json")
    return EXIT_OK


def cmd_scan(conf, params, controls, out: Path) -> int:
    try:
        grid = sorted(float(t) for t in conf["lambdas"].split(",") if t.strip())
    except ValueError as exc:
        raise ConfigurationError(f"bad --lambdas list {conf['lambdas']!r}") from exc
    table = lambda_threshold_scan(conf["n"], grid, controls, conf["tol"], conf["closure_tol"])
    header = ["lambda", "cylinder_found", "tori_found", "delta_c", "delta_t1", "delta_t2"]
    rows = [[io.fmt(r.lam), str(r.cylinder_found).lower(), str(r.tori_found).lower(),
             io.fmt(r.delta_c), io.fmt(r.delta_t1), io.fmt(r.delta_t2)] for r in table.rows]
    io._write_rows(out / "scan.csv", header, rows)
    io.dump_json({"rows": [{"lambda": r.lam, "cylinder_found": r.cylinder_found,
                            "tori_found": r.tori_found, "delta_c": r.delta_c,
                            "delta_t1": r.delta_t1, "delta_t2": r.delta_t2,
                            "cylinder_error": r.cylinder_error, "torus_error": r.torus_error}
                           for r in table.rows],
                  "c1_estimate": table.c1_estimate, "c2_estimate": table.c2_estimate,
                  "note": table.note}, out / "scan.json")
    return EXIT_OK


COMMANDS = {"shoot": cmd_shoot, "find-cylinder": cmd_find_cylinder,
            "find-torus": cmd_find_torus, "sweep": cmd_sweep, "scan": cmd_scan}


def _error_payload(exc: Exception) -> tuple[int, dict]:
    if isinstance(exc, CliError):
        return exc.code, {"error": exc.kind, "message": str(exc), **exc.detail}
    if isinstance(exc, NoBracketError):
        return EXIT_NO_BRACKET, {"error": "no-bracket", "message": str(exc),
                                 "rows": [{"delta": r.delta, "label": r.label} for r in exc.rows]}
    if isinstance(exc, PrecisionLimitError):
        return EXIT_PRECISION, {"error": "precision-limit", "message": str(exc),
                                "bracket": list(exc.bracket) if exc.bracket else None}
    if isinstance(exc, (DistinctRootsError, NotClosableError)):
        return EXIT_PRECISION, {"error": "precision-limit", "message": str(exc)}
    if isinstance(exc, (DomainError, ConfigurationError, UnsupportedDimensionError,
                        InsufficientDataError)):
        return EXIT_USAGE, {"error": "usage", "message": str(exc)}
    return EXIT_USAGE, {"error": "usage", "message": f"{type(exc).__name__}: {exc}"}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        conf = effective_config(args)
        params = Params(conf["n"], conf["lam"]) if args.command != "scan" else None
        controls = _controls(conf)
        out = Path(conf["out"])
        out.mkdir(parents=True, exist_ok=True)
        try:
            code = COMMANDS[args.command](conf, params, controls, out)
        finally:
            io.write_manifest(out, args.command, _echo(conf, args.command, params, controls))
        return code
    except (CliError, ShootingError, ValueError) as exc:
        code, payload = _error_payload(exc)
        payload["exit_code"] = code
        print(json.dumps(payload, sort_keys=True, allow_nan=False, default=str), file=sys.stderr)
        return code


def main(argv=None) -> None:
    sys.exit(run(argv))

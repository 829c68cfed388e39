"""Plain-text serialisation: CSV, JSON sidecars, OBJ meshes and key=value configs.

Every writer is deterministic: fixed float formatting, sorted JSON keys and no
timestamps, so identical runs give byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .geometry import CurvatureArrays, ProfileCurve, TriangleMesh
from .ode_core import Trajectory

TRAJECTORY_COLUMNS = ("s", "x", "r", "theta", "theta_dot")
CURVATURE_COLUMNS = ("kappa_rot", "kappa_prof", "H", "residual")
CLASSIFY_COLUMNS = ("delta", "label", "s1", "s2", "s3", "s4", "b", "margin")


def fmt(value) -> str:
    """17 significant digits; ``inf``/``nan`` spelled out and ``None`` left empty."""
    if value is None:
        return ""
    return "%.17g" % value


def json_number(value):
    """JSON has no infinities: map non-finite floats to ``None``."""
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def dump_json(obj, path: Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_trajectory_csv(traj: Trajectory | ProfileCurve, path: Path,
                         curvature: CurvatureArrays | None = None) -> None:
    """``s,x,r,theta,theta_dot`` (plus curvature columns when given)."""
    cols = [traj.s, traj.x, traj.r, traj.theta, traj.theta_dot]
    header = list(TRAJECTORY_COLUMNS)
    if curvature is not None:
        cols += [curvature.kappa_rot, curvature.kappa_prof, curvature.H, curvature.residual]
        header += list(CURVATURE_COLUMNS)
    _write_rows(path, header, ([fmt(v) for v in row] for row in zip(*cols)))


def read_trajectory_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_events_json(traj: Trajectory, path: Path) -> None:
    dump_json([{k: (json_number(v) if k != "kind" else v) for k, v in ev.as_dict().items()}
               for ev in traj.events], path)


def write_classify_csv(rows, path: Path) -> None:
    """Sweep rows as ``delta,label,s1,s2,s3,s4,b,margin`` (plus ``error`` if any row failed)."""
    with_error = any(row.error for row in rows)
    header = list(CLASSIFY_COLUMNS) + (["error"] if with_error else [])
    out = []
    for row in rows:
        vals = [fmt(row.delta), row.label, fmt(row.s1), fmt(row.s2), fmt(row.s3), fmt(row.s4),
                fmt(row.b), fmt(row.margin)]
        if with_error:
            vals.append(row.error or "")
        out.append(vals)
    _write_rows(path, header, out)


def write_obj(mesh: TriangleMesh, path: Path) -> None:
    """ASCII OBJ with ``v``, ``vn`` and ``f v//vn`` records, 1-based, 9 significant digits."""
    lines = ["v %.9g %.9g %.9g" % tuple(v) for v in mesh.vertices]
    lines += ["vn %.9g %.9g %.9g" % tuple(v) for v in mesh.normals]
    lines += ["f %d//%d %d//%d %d//%d" % (a, a, b, b, c, c) for a, b, c in mesh.faces + 1]
    Path(path).write_text("\n".join(lines) + "\n")


def read_obj(path: Path) -> TriangleMesh:
    verts, norms, faces = [], [], []
    for line in Path(path).read_text().splitlines():
        tag, *rest = line.split()
        if tag == "v":
            verts.append([float(t) for t in rest])
        elif tag == "vn":
            norms.append([float(t) for t in rest])
        elif tag == "f":
            faces.append([int(t.split("/")[0]) - 1 for t in rest])
    return TriangleMesh(np.array(verts), np.array(faces, dtype=int), np.array(norms))


def read_config(path: Path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def write_manifest(out_dir: Path, command: str, config: dict) -> None:
    """List every file in ``out_dir`` with its SHA-256, plus the effective config."""
    out_dir = Path(out_dir)
    files = []
    for p in sorted(out_dir.iterdir()):
        if p.name == "manifest.json" or not p.is_file():
            continue
        files.append({"name": p.name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest()})
    dump_json({"command": command, "config": config, "files": files}, out_dir / "manifest.json")

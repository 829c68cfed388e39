"""Bracketed bisection over delta for the cylinder-type and torus-type shots.

Every search starts from a seed sweep, picks the first bracket whose ends carry
the labels of interest, and halves it until the width drops below
``delta_tol``. Labels near a boundary are often unresolved on the first try:
escaping candidates are re-shot with wider escape bounds, undetermined ones
with tighter integrator tolerances.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classify import (CLOSURE_BAND, UNRESOLVED, TypeLabel, TypeName, classify_delta,
                       has_type3_signature)
from .errors import (DistinctRootsError, DomainError, NoBracketError, PrecisionLimitError,
                     ShootingError)
from .ode_core import ESCAPE, THETA_PI, IntegratorControls, Params, Trajectory, integrate

CYLINDER = "cylinder"
TORUS_LOWER = "torus-lower"
TORUS_UPPER = "torus-upper"

SEED_COUNT = 64
SEED_EDGE = 1e-3
MAX_RETRIES = 3
CLOSURE_REL = 1e-8


@dataclass(frozen=True)
class SweepRow:
    delta: float
    label: str
    s1: float
    s2: float
    s3: float
    s4: float
    b: float | None
    margin: float
    error: str | None = None

    @classmethod
    def from_label(cls, delta: float, label: TypeLabel) -> "SweepRow":
        sm = label.summary
        return cls(delta, str(label.label), sm.s1, sm.s2, sm.s3, sm.s4, sm.b, label.margin)

    @classmethod
    def failed(cls, delta: float, message: str) -> "SweepRow":
        return cls(delta, str(TypeName.UNDETERMINED), UNRESOLVED, UNRESOLVED, UNRESOLVED,
                   UNRESOLVED, None, 0.0, message)


@dataclass(frozen=True)
class BisectionStep:
    lo: float
    hi: float
    mid: float
    label: str


@dataclass(frozen=True)
class SearchResult:
    target: str
    params: Params
    delta_star: float
    bracket: tuple[float, float]
    lo_label: TypeLabel
    hi_label: TypeLabel
    trajectory: Trajectory
    iterations: int
    history: tuple[BisectionStep, ...] = field(repr=False, default=())
    closure_error: float | None = None
    type3_signature: bool | None = None

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    def report(self) -> dict:
        return {"target": self.target, "n": self.params.n, "lambda": self.params.lam,
                "delta_star": self.delta_star, "bracket": list(self.bracket),
                "iterations": self.iterations, "closure_error": self.closure_error}


# -- sweeps -------------------------------------------------------------------

def _sweep_row(args) -> SweepRow:
    delta, params, controls, band = args
    try:
        return SweepRow.from_label(delta, resolve_label(delta, params, controls, band))
    except ShootingError as exc:
        return SweepRow.failed(delta, f"{type(exc).__name__}: {exc}")


def sweep(params: Params, deltas, controls: IntegratorControls | None = None,
          closure_band: float = CLOSURE_BAND, workers: int = 1) -> list[SweepRow]:
    """Classify each delta; rows come back sorted by delta.

    Labels are resolved as in :func:`resolve_label`, with ``closure_band``
    deciding 1.2. Shooting failures are recorded in the row's ``error`` field.
    With ``workers > 1`` rows are computed in a process pool.
    """
    deltas = sorted(float(d) for d in deltas)
    radius = params.cylinder_radius
    bad = [d for d in deltas if not 0 < d < radius]
    if bad:
        raise DomainError(f"sweep deltas must lie in (0, {radius}); offending: {bad[:5]}")
    controls = (controls or IntegratorControls()).resolved(params)
    jobs = [(d, params, controls, closure_band) for d in deltas]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_row, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_sweep_row(j) for j in jobs]


def label_transitions(rows: list[SweepRow]) -> list[tuple[float, float, str, str]]:
    """``(delta_lo, delta_hi, label_lo, label_hi)`` for each change between neighbouring rows."""
    return [(a.delta, b.delta, a.label, b.label)
            for a, b in zip(rows, rows[1:]) if a.label != b.label]


def seed_deltas(params: Params, count: int = SEED_COUNT) -> np.ndarray:
    """Log-spaced seeds in ``(1e-3 R, (1 - 1e-3) R)``."""
    radius = params.cylinder_radius
    return np.geomspace(SEED_EDGE * radius, (1 - SEED_EDGE) * radius, count)


def torus_seed_deltas(params: Params, count: int = SEED_COUNT) -> np.ndarray:
    """Log-spaced seeds merged with as many evenly spaced ones."""
    radius = params.cylinder_radius
    lin = np.linspace(SEED_EDGE * radius, (1 - SEED_EDGE) * radius, count)
    return np.unique(np.concatenate([seed_deltas(params, count), lin]))


# -- label resolution ---------------------------------------------------------------

def resolve_label(delta: float, params: Params, controls: IntegratorControls,
                  closure_band: float = 0.0, max_retries: int = MAX_RETRIES) -> TypeLabel:
    """Label of ``delta``, re-shooting unresolved outcomes.

    The default ``closure_band = 0`` gives the strict 1.1 / 1.3 split used by
    bisection.

    Escapes are retried with doubled escape bounds and anything else that is
    unresolved with tolerances tightened tenfold, each at most ``max_retries``
    times. The last label is returned even if still unresolved.
    """
    c = controls.resolved(params)
    label = classify_delta(delta, params, c, closure_band)
    widened = tightened = 0
    while not label.label.resolved:
        if label.summary.termination == ESCAPE:
            if widened == max_retries:
                break
            c, widened = c.widened(params), widened + 1
        else:
            if tightened == max_retries:
                break
            c, tightened = c.tightened(), tightened + 1
        label = classify_delta(delta, params, c, closure_band)
    return label


def _bisect(params, lo, hi, lo_label, hi_label, on_low_side, delta_tol, controls):
    history = []
    while hi - lo > delta_tol:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise PrecisionLimitError(
                f"bracket ({lo!r}, {hi!r}) cannot be split in double precision", (lo, hi))
        label = resolve_label(mid, params, controls)
        if not label.label.resolved:
            raise PrecisionLimitError(
                f"label at delta={mid!r} stayed {label.label} after retries", (lo, hi))
        history.append(BisectionStep(lo, hi, mid, str(label.label)))
        if on_low_side(label.label):
            lo, lo_label = mid, label
        else:
            hi, hi_label = mid, label
    return lo, hi, lo_label, hi_label, tuple(history)


def _seed_labels(params, deltas, controls):
    return [resolve_label(float(d), params, controls) for d in deltas]


def _rows_for_error(deltas, labels):
    return [SweepRow.from_label(float(d), lb) for d, lb in zip(deltas, labels)]


# -- cylinder -------------------------------------------------------------------

def find_cylinder_delta(params: Params, delta_tol: float = 1e-10,
                        controls: IntegratorControls | None = None) -> SearchResult:
    """Supremum of the initial type-2 run of delta.

    The shot there neither turns back (type 1) nor inflects (type 2) and
    escapes to infinity as a graph over the axis.
    """
    if not params.lam < 0:
        raise DomainError(f"the cylinder search shoots with lambda < 0, got {params.lam}")
    if not delta_tol > 0:
        raise DomainError(f"delta_tol must be positive, got {delta_tol!r}")
    controls = (controls or IntegratorControls()).resolved(params)
    deltas = seed_deltas(params)
    labels = _seed_labels(params, deltas, controls)
    if labels[0].label is not TypeName.TYPE2:
        raise NoBracketError(f"smallest seed delta={deltas[0]:.6g} is {labels[0].label}, not type2",
                             _rows_for_error(deltas, labels))
    k_lo = 0
    bracket = None
    for k in range(1, len(deltas)):
        lb = labels[k].label
        if lb is TypeName.TYPE2:
            k_lo = k
        elif lb.is_type1:
            bracket = (k_lo, k)
            break
    if bracket is None:
        raise NoBracketError("no type2 -> type1 transition among the seed deltas",
                             _rows_for_error(deltas, labels))
    i, j = bracket
    lo, hi, lo_label, hi_label, history = _bisect(
        params, float(deltas[i]), float(deltas[j]), labels[i], labels[j],
        lambda lb: lb is TypeName.TYPE2, delta_tol, controls)
    mid = 0.5 * (lo + hi)
    traj = integrate(mid, params, controls)
    return SearchResult(CYLINDER, params, mid, (lo, hi), lo_label, hi_label, traj,
                        len(history), history, None, has_type3_signature(traj))


# -- tori -------------------------------------------------------------------

def closure_error(traj: Trajectory) -> float:
    """``max(|x(s1)|, |theta(s1) - pi| r(s1))``; ``inf`` unless s1 is a theta = pi event."""
    ev = traj.first("theta-zero", THETA_PI)
    if ev is None or ev.kind != THETA_PI:
        return math.inf
    return max(abs(ev.state.x), abs(ev.state.theta - math.pi) * ev.state.r)


def _closed_result(target, params, lo, hi, lo_label, hi_label, history, controls, closure_tol):
    mid = 0.5 * (lo + hi)
    traj = integrate(mid, params, controls)
    err = closure_error(traj)
    ev = traj.first(THETA_PI)
    b = ev.state.r if ev is not None else 1.0
    tol = CLOSURE_REL * max(1.0, b) if closure_tol is None else closure_tol
    if not err < tol:
        if TypeName.TYPE2 in (lo_label.label, hi_label.label):
            raise PrecisionLimitError(
                f"{target}: the type1_1 run borders type2 directly at delta={mid!r}; the "
                "type1_3 band separating them is below double-precision resolution", (lo, hi))
        raise PrecisionLimitError(
            f"{target} shot at delta={mid!r} misses closure: error {err:.3g} >= {tol:.3g}", (lo, hi))
    return SearchResult(target, params, mid, (lo, hi), lo_label, hi_label, traj,
                        len(history), history, err, None)


def find_torus_deltas(params: Params, delta_tol: float = 1e-12,
                      controls: IntegratorControls | None = None,
                      closure_tol: float | None = None) -> tuple[SearchResult, SearchResult]:
    """Both ends of the first run of type-1.1 deltas.

    Each end is a shot whose profile meets the axis plane orthogonally at
    ``s1`` and closes up by reflection into an embedded torus. At
    ``lambda = 0`` there is no type-2 run below, so both searches collapse onto
    the single 1.1 / 1.3 transition and return the same result.

    ``closure_tol`` defaults to ``1e-8 max(1, r(s1))``.
    """
    if params.lam > 0:
        raise DomainError(f"the torus search shoots with lambda <= 0, got {params.lam}")
    if not delta_tol > 0:
        raise DomainError(f"delta_tol must be positive, got {delta_tol!r}")
    controls = (controls or IntegratorControls()).resolved(params)
    deltas = torus_seed_deltas(params)
    labels = _seed_labels(params, deltas, controls)
    is11 = [lb.label is TypeName.TYPE1_1 for lb in labels]
    if not any(is11):
        raise NoBracketError("no type1_1 seed delta", _rows_for_error(deltas, labels))
    i = is11.index(True)
    j = i
    while j + 1 < len(deltas) and (is11[j + 1] or not labels[j + 1].label.resolved):
        j += 1
    while not is11[j]:
        j -= 1
    if j + 1 == len(deltas):
        raise NoBracketError("type1_1 run reaches the largest seed delta",
                             _rows_for_error(deltas, labels))
    lo, hi, lo_label, hi_label, history = _bisect(
        params, float(deltas[j]), float(deltas[j + 1]), labels[j], labels[j + 1],
        lambda lb: lb is TypeName.TYPE1_1, delta_tol, controls)
    upper = _closed_result(TORUS_UPPER, params, lo, hi, lo_label, hi_label, history,
                           controls, closure_tol)
    if params.lam == 0:
        return (SearchResult(TORUS_LOWER, params, upper.delta_star, upper.bracket,
                             upper.lo_label, upper.hi_label, upper.trajectory,
                             upper.iterations, upper.history, upper.closure_error), upper)
    if i == 0:
        raise NoBracketError("type1_1 run starts at the smallest seed delta",
                             _rows_for_error(deltas, labels))
    k = i - 1
    while k > 0 and not labels[k].label.resolved:
        k -= 1
    lo, hi, lo_label, hi_label, history = _bisect(
        params, float(deltas[k]), float(deltas[i]), labels[k], labels[i],
        lambda lb: lb is not TypeName.TYPE1_1, delta_tol, controls)
    lower = _closed_result(TORUS_LOWER, params, lo, hi, lo_label, hi_label, history,
                           controls, closure_tol)
    if upper.delta_star - lower.delta_star < 10 * delta_tol:
        raise DistinctRootsError(
            f"torus parameters {lower.delta_star!r} and {upper.delta_star!r} are not distinct",
            (lower, upper))
    return lower, upper


# -- lambda scan -------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    lam: float
    cylinder_found: bool
    tori_found: bool
    delta_c: float | None = None
    delta_t1: float | None = None
    delta_t2: float | None = None
    cylinder_error: str | None = None
    torus_error: str | None = None


@dataclass(frozen=True)
class ScanTable:
    rows: tuple[ScanRow, ...]
    c1_estimate: float | None
    c2_estimate: float | None
    note: str = ("c1/c2 estimates are numerical lower bounds: the largest |lambda| on the grid "
                 "below which every grid point succeeded")


def _contiguous_bound(rows, key):
    best = None
    for row in sorted(rows, key=lambda rw: abs(rw.lam)):
        if row.lam >= 0:
            continue
        if not getattr(row, key):
            break
        best = abs(row.lam)
    return best


def lambda_threshold_scan(n: int, lambda_grid, controls: IntegratorControls | None = None,
                          delta_tol: float = 1e-12, closure_tol: float | None = None) -> ScanTable:
    """Run both searches at every grid value and record success per cell."""
    rows = []
    for lam in lambda_grid:
        params = Params(n, float(lam))
        cyl = dict(cylinder_found=False)
        try:
            res = find_cylinder_delta(params, max(delta_tol, 1e-10), controls)
            cyl = dict(cylinder_found=True, delta_c=res.delta_star)
        except ShootingError as exc:
            cyl["cylinder_error"] = f"{type(exc).__name__}: {exc}"
        tor = dict(tori_found=False)
        try:
            lo, hi = find_torus_deltas(params, delta_tol, controls, closure_tol)
            tor = dict(tori_found=lo.delta_star < hi.delta_star,
                       delta_t1=lo.delta_star, delta_t2=hi.delta_star)
            if lo.delta_star == hi.delta_star:
                tor["torus_error"] = "single torus parameter"
        except ShootingError as exc:
            tor["torus_error"] = f"{type(exc).__name__}: {exc}"
        rows.append(ScanRow(lam=float(lam), **cyl, **tor))
    return ScanTable(tuple(rows), _contiguous_bound(rows, "cylinder_found"),
                     _contiguous_bound(rows, "tori_found"))

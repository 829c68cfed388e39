"""Event summaries and type labels for shooting parameters in ``(0, R_lam)``.

For a shot launched at ``delta`` the first arc lengths where

* ``s1``: theta returns to 0 or reaches pi,
* ``s2``: theta' vanishes,
* ``s3``: theta returns to 0 or reaches pi/2,
* ``s4``: the curve recrosses the plane ``x = 0``

decide the type: 1 (``s3 < s1``; sub-typed by ``s4`` against ``s1``), 2
(``s2 < s1``) or 3 (nothing fires; the curve escapes). Scans that never fire
are reported as ``inf`` together with the termination reason.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError
from .ode_core import (ESCAPE, STEP_FAILURE, THETA_DOT_ZERO, THETA_HALF_PI, THETA_PI,
                       THETA_ZERO, X_ZERO, IntegratorControls, Params, Trajectory,
                       cylinder_radius, integrate)

UNRESOLVED = math.inf
CLOSURE_BAND = 1e-4


class TypeName(str, enum.Enum):
    TYPE1_1 = "type1_1"
    TYPE1_2 = "type1_2"
    TYPE1_3 = "type1_3"
    TYPE2 = "type2"
    TYPE3_CANDIDATE = "type3_candidate"
    UNDETERMINED = "undetermined"

    def __str__(self):
        return self.value

    @property
    def is_type1(self) -> bool:
        return self in (TypeName.TYPE1_1, TypeName.TYPE1_2, TypeName.TYPE1_3)

    @property
    def resolved(self) -> bool:
        return self not in (TypeName.TYPE3_CANDIDATE, TypeName.UNDETERMINED)


@dataclass(frozen=True)
class EventSummary:
    s1: float
    s2: float
    s3: float
    s4: float
    S: float
    b: float | None
    x_at_s1: float | None
    theta_at_s1: float | None
    termination: str
    s_end: float
    failed: bool = False

    @property
    def s1_resolved(self) -> bool:
        return math.isfinite(self.s1)


@dataclass(frozen=True)
class TypeLabel:
    label: TypeName
    margin: float
    summary: EventSummary | None = None
    delta: float | None = None

    def __str__(self):
        return str(self.label)


def _first_s(traj: Trajectory, *kinds: str) -> float:
    ev = traj.first(*kinds)
    return ev.s if ev is not None else UNRESOLVED


def summarize(traj: Trajectory) -> EventSummary:
    """Extract ``s1..s4``, ``S`` and ``b = r(s1)`` from a shot."""
    params, delta = traj.params, traj.delta
    radius = params.cylinder_radius
    if not 0 < delta < radius or abs(delta - radius) <= traj.controls.degeneracy_margin * max(1.0, radius):
        raise DomainError(f"summaries need 0 < delta < R_lam = {radius}, got {delta}")
    s1_event = traj.first(THETA_ZERO, THETA_PI)
    s_end = float(traj.s[-1])
    if s1_event is not None:
        s1, b = s1_event.s, s1_event.state.r
        x1, th1 = s1_event.state.x, s1_event.state.theta
    else:
        s1, b, x1, th1 = UNRESOLVED, None, None, None
    failed = traj.termination == STEP_FAILURE
    return EventSummary(
        s1=s1,
        s2=_first_s(traj, THETA_DOT_ZERO),
        s3=_first_s(traj, THETA_ZERO, THETA_HALF_PI),
        s4=_first_s(traj, X_ZERO),
        S=s_end if failed else UNRESOLVED,
        b=b, x_at_s1=x1, theta_at_s1=th1,
        termination=traj.termination, s_end=s_end, failed=failed)


def label_from_summary(summary: EventSummary, controls: IntegratorControls,
                       traj: Trajectory | None = None,
                       closure_band: float = CLOSURE_BAND) -> TypeLabel:
    """Apply the ordering rules to a summary.

    ``closure_band`` is the relative ``|x(s1)|`` band inside which a type-1
    shot is called 1.2; pass 0 for the strict 1.1 / 1.3 split used by bisection.
    """
    tol = controls.event_tol
    s1, s2, s3, s4 = summary.s1, summary.s2, summary.s3, summary.s4
    undetermined = TypeLabel(TypeName.UNDETERMINED, 0.0, summary)
    if summary.s1_resolved:
        if s2 < s1 and s3 < s1:
            # s2 < s1 forces s1 = s3; both firing strictly earlier is a numerical tie
            return TypeLabel(TypeName.UNDETERMINED, min(s1 - s2, s1 - s3), summary)
        if s3 < s1:
            gap = s1 - s3
            if gap <= tol:
                return TypeLabel(TypeName.UNDETERMINED, gap, summary)
            x1 = summary.x_at_s1
            if abs(x1) <= closure_band * max(1.0, summary.b):
                return TypeLabel(TypeName.TYPE1_2, gap, summary)
            if s4 < s1:
                return TypeLabel(TypeName.TYPE1_1, min(gap, s1 - s4), summary)
            return TypeLabel(TypeName.TYPE1_3, min(gap, abs(x1)), summary)
        if s2 < s1:
            gap = s1 - s2
            if gap <= tol:
                return TypeLabel(TypeName.UNDETERMINED, gap, summary)
            return TypeLabel(TypeName.TYPE2, gap, summary)
        return undetermined
    if summary.termination == ESCAPE and not math.isfinite(s2) and not math.isfinite(s3):
        if traj is None or _type3_signature(traj):
            return TypeLabel(TypeName.TYPE3_CANDIDATE, 0.0, summary)
    return undetermined


def _type3_signature(traj: Trajectory) -> bool:
    th, td = traj.theta[1:], traj.theta_dot
    c = traj.controls
    return bool(traj.termination == ESCAPE
                and (th > 0).all() and (th < 0.5 * math.pi).all() and (td > 0).all()
                and traj.r[-1] > c.r_max and traj.x[-1] > c.x_max)


def has_type3_signature(traj: Trajectory) -> bool:
    """Escape past both bounds with theta in (0, pi/2) and theta' > 0 throughout."""
    return _type3_signature(traj)


def classify_delta(delta: float, params: Params, controls: IntegratorControls | None = None,
                   closure_band: float = CLOSURE_BAND) -> TypeLabel:
    """Shoot at ``delta`` and label it."""
    radius = params.cylinder_radius
    if not (math.isfinite(delta) and 0 < delta < radius):
        raise DomainError(f"delta must lie in (0, R_lam) = (0, {radius}), got {delta!r}")
    controls = (controls or IntegratorControls()).resolved(params)
    traj = integrate(delta, params, controls)
    label = label_from_summary(summarize(traj), controls, traj, closure_band)
    return TypeLabel(label.label, label.margin, label.summary, delta)


def check_radius_bounds(summary: EventSummary, params: Params) -> list[tuple[str, bool]] | None:
    """Radius bounds at ``s1``: ``b > R_{-lam}`` after s3, ``b > R_lam`` after s2.

    Returns ``None`` (not applicable) when ``s1`` is unresolved.
    """
    if not summary.s1_resolved:
        return None
    out = []
    n, lam = params.n, params.lam
    if summary.s3 < summary.s1:
        bound = cylinder_radius(-lam, n)
        out.append((f"b > R_(-lam) = {bound:.17g}", summary.b > bound))
    if summary.s2 < summary.s1:
        bound = cylinder_radius(lam, n)
        out.append((f"b > R_lam = {bound:.17g}", summary.b > bound))
    return out

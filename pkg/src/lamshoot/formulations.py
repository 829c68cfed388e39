"""Graph-form ODEs and the small-delta rescaling, used as independent oracles.

Away from vertical tangents a profile curve is a graph ``r = u(x)``; away from
horizontal tangents it is a graph ``x = f(r)``. Both graph equations are
evaluated here directly and compared against finite differences of integrated
arc-length shots. The rescaled variables ``(xi, rho, alpha)`` zoom in on the
launch point; at ``delta = 0`` their flow is solvable by a single quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, InsufficientDataError
from .ode_core import (THETA_DOT_ZERO, IntegratorControls, Params, Trajectory,
                       integrate_rescaled)

MIN_ARC_SAMPLES = 5
SPACING_JUMP = 0.1


class GraphSampleU(NamedTuple):
    x: float
    u: float
    u1: float
    u2: float


class GraphSampleF(NamedTuple):
    r: float
    f: float
    f1: float
    f2: float
    f3: float


class RescaledState(NamedTuple):
    t: float
    xi: float
    rho: float
    alpha: float


def _require_positive(name, value):
    if not np.all(np.asarray(value) > 0):
        raise DomainError(f"{name} must be positive, got {value!r}")


def u_second(x, u, u1, params: Params):
    """``u''`` for a profile written as ``r = u(x)`` traversed with x increasing.

    Scalars or equal-shape arrays.
    """
    _require_positive("graph height u", u)
    w = 1.0 + u1 * u1
    return w * (x * u1 - u + (params.n - 1) / u + params.lam * np.sqrt(w))


def f_second(r, f, f1, params: Params):
    """``f''`` for a profile written as ``x = f(r)`` traversed with r increasing."""
    _require_positive("radius r", r)
    w = 1.0 + f1 * f1
    return w * ((r - (params.n - 1) / r) * f1 - f - params.lam * np.sqrt(w))


def f_third(r, f1, f2, params: Params):
    """``f'''`` from differentiating the f-graph equation once in r."""
    _require_positive("radius r", r)
    m = params.n - 1
    w = 1.0 + f1 * f1
    return w * (2.0 * f1 * f2 * f2 / (w * w) + (r - m / r) * f2 + m / (r * r) * f1
                - params.lam * f1 * f2 / np.sqrt(w))


def rescaled_rhs(state: RescaledState, delta: float, params: Params) -> tuple[float, float, float]:
    """``(xi', rho', alpha')`` of the blow-up at the launch point."""
    one_rho = 1.0 + state.rho
    if not one_rho > 0:
        raise DomainError(f"need 1 + rho > 0, got rho={state.rho!r}")
    c, s = math.cos(state.alpha), math.sin(state.alpha)
    return (c, s, (params.n - 1) / one_rho * c + params.lam * delta
            + delta * delta * (state.xi * s - one_rho * c))


def limit_profile_t_of_rho(rho: float, params: Params) -> float:
    """Arc parameter of the ``delta = 0`` limit curve at height ``rho``.

    ``t(rho) = int_0^rho (1+p)^(n-1) / sqrt((1+p)^(2(n-1)) - 1) dp``. The
    ``1/sqrt(p)`` endpoint singularity is removed by ``p = w^2``.
    """
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho!r}")
    m = params.n - 1

    def integrand(w):
        if w == 0.0:
            return 2.0 / math.sqrt(2.0 * m)
        lg = math.log1p(w * w)
        return 2.0 * w * math.exp(m * lg) / math.sqrt(math.expm1(2.0 * m * lg))

    value, _ = quad(integrand, 0.0, math.sqrt(rho), epsabs=1e-14, epsrel=1e-13, limit=200)
    return value


def limit_profile_rho_of_t(t: float, params: Params) -> float:
    """Inverse of :func:`limit_profile_t_of_rho`; ``rho(0) = 0``."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t!r}")
    if t == 0:
        return 0.0
    # the integrand is >= 1, so rho(t) <= t
    return brentq(lambda p: limit_profile_t_of_rho(p, params) - t, 1e-300, t,
                  xtol=1e-15, rtol=4 * np.finfo(float).eps)


def rescaled_deviation(delta: float, params: Params, t_end: float = 2.0, dt: float = 0.01,
                       controls: IntegratorControls | None = None) -> float:
    """``sup_{t in [0, t_end]} |rho_delta(t) - rho_0(t)|`` on a grid of spacing ``dt``."""
    traj = integrate_rescaled(delta, params, t_end, dt, controls)
    rho0 = np.array([limit_profile_rho_of_t(float(t), params) for t in traj.t])
    return float(np.max(np.abs(traj.rho - rho0)))


# -- finite-difference validation ---------------------------------------------------

def _fd_derivatives(a: np.ndarray, v: np.ndarray):
    """Centred first and second derivatives of v(a) at interior nodes of a non-uniform grid."""
    hm = a[1:-1] - a[:-2]
    hp = a[2:] - a[1:-1]
    vm, v0, vp = v[:-2], v[1:-1], v[2:]
    d1 = (hm * hm * vp + (hp * hp - hm * hm) * v0 - hp * hp * vm) / (hm * hp * (hm + hp))
    d2 = 2.0 * (hm * vp - (hm + hp) * v0 + hp * vm) / (hm * hp * (hm + hp))
    return d1, d2


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal ``[start, stop)`` index runs where mask holds."""
    out = []
    start = None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        elif not m and start is not None:
            out.append((start, i))
            start = None
    if start is not None:
        out.append((start, len(mask)))
    return out


@dataclass(frozen=True)
class ArcDefect:
    check: str
    arc: tuple[float, float]
    max_defect: float
    samples: int

    def record(self, tol: float) -> dict:
        return {"check": self.check, "arc": list(self.arc),
                "max_defect": self.max_defect, "pass": bool(self.max_defect < tol)}


def graph_defects(traj: Trajectory, theta_window: tuple[float, float] | None = None,
                  min_cos: float = 0.5) -> list[ArcDefect]:
    """Finite-difference defects of both graph equations on every eligible sub-arc.

    Without ``theta_window`` the u-graph is used where ``cos(theta) >= min_cos``
    and the f-graph where ``sin(theta) >= min_cos``; with the default 0.5 every
    point is covered by a graph of slope at most sqrt(3). A window restricts
    both graphs to ``theta`` inside it.

    Defects are in curvature units: the second-derivative mismatch is divided
    by ``(1 + slope^2)^(3/2)``, the factor that turns ``u''`` into ``theta'``.
    Raw ``f''`` grows like ``1/sin(theta)^3``, which would tie the budget to
    whichever graph is in use.
    """
    th, x, r = traj.theta, traj.x, traj.r
    params = traj.params
    if theta_window is not None:
        lo, hi = theta_window
        inside = (th > lo) & (th < hi)
        u_mask = inside & (np.cos(th) > 0)
        f_mask = inside & (np.sin(th) > 0)
    else:
        u_mask = np.cos(th) >= min_cos
        f_mask = np.sin(th) >= min_cos
    out = []
    for check, mask, absc, ordi, rule in (("u-graph", u_mask, x, r, u_second),
                                          ("f-graph", f_mask, r, x, f_second)):
        for i0, i1 in _runs(mask):
            if i1 - i0 < MIN_ARC_SAMPLES:
                continue
            a, v = absc[i0:i1], ordi[i0:i1]
            d1, d2 = _fd_derivatives(a, v)
            defect = np.abs(d2 - rule(a[1:-1], v[1:-1], d1, params)) / (1.0 + d1 * d1) ** 1.5
            # the stencil is second order only where the spacing varies smoothly;
            # off-grid event or stop samples break that and are skipped
            hs = np.diff(traj.s[i0:i1])
            smooth = np.abs(hs[1:] - hs[:-1]) <= SPACING_JUMP * np.maximum(hs[1:], hs[:-1])
            if not smooth.any():
                continue
            out.append(ArcDefect(check, (float(traj.s[i0]), float(traj.s[i1 - 1])),
                                 float(np.max(defect[smooth])), i1 - i0))
    return out


def cross_validate(traj: Trajectory, tol: float | None = None,
                   theta_window: tuple[float, float] | None = None) -> float:
    """Largest graph-equation defect over all eligible sub-arcs of ``traj``.

    ``tol`` is accepted for symmetry with :func:`validation_report`; the caller
    compares the returned defect to it.
    """
    arcs = graph_defects(traj, theta_window)
    if not arcs:
        raise InsufficientDataError(
            f"no sub-arc with at least {MIN_ARC_SAMPLES} samples ({len(traj)} samples in total)")
    return max(a.max_defect for a in arcs)


def validation_report(traj: Trajectory, tol: float,
                      theta_window: tuple[float, float] | None = None) -> list[dict]:
    return [a.record(tol) for a in graph_defects(traj, theta_window)]


# -- f-graph lemma checks ---------------------------------------------------------

@dataclass(frozen=True)
class FGraph:
    """``x = f(r)`` on the open arc ``0 < s < s1`` where r is strictly increasing."""

    s: np.ndarray
    r: np.ndarray
    f: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    inflections: tuple


def f_graph(traj: Trajectory) -> FGraph:
    """Exact ``f' = cot(theta)`` and ``f'' = -theta' / sin(theta)^3`` at each sample."""
    s1_ev = traj.first("theta-zero", "theta-pi")
    s_end = s1_ev.s if s1_ev is not None else float(traj.s[-1]) + 1.0
    keep = (traj.s > 0) & (traj.s < s_end) & (np.sin(traj.theta) > 0)
    th = traj.theta[keep]
    sn = np.sin(th)
    infl = tuple(ev for ev in traj.events if ev.kind == THETA_DOT_ZERO and ev.s < s_end)
    return FGraph(traj.s[keep], traj.r[keep], traj.x[keep], np.cos(th) / sn,
                  -traj.theta_dot[keep] / sn ** 3, infl)


def _sign_changes(values: np.ndarray) -> int:
    sg = np.sign(values)
    sg = sg[sg != 0]
    return int(np.count_nonzero(sg[1:] != sg[:-1]))


def lemma_violations(traj: Trajectory, guard: float | None = None,
                     f2_tol: float = 1e-3) -> dict[str, int]:
    """Count sampled violations of the f-graph sign lemmas on ``0 < s < s1``.

    * ``propagation``: ``f' f''`` must be negative on an initial r-interval and
      positive after it (one change, from - to +, at most).
    * ``single_inflection``: ``f''`` changes sign at most once.
    * ``inflection_sign``: at each inflection ``f' f''' > 0``, with ``f'''``
      taken both from the differentiated graph equation and from a finite
      difference of ``f''`` across the inflection; also at every sample with
      ``|f''| < f2_tol`` and ``|f'| > 10 f2_tol``.

    Samples within ``guard`` (default ``10 * event_tol``) in arc length of an
    inflection are ignored.
    """
    g = f_graph(traj)
    guard = 10 * traj.controls.event_tol if guard is None else guard
    keep = np.ones(len(g.s), dtype=bool)
    for ev in g.inflections:
        keep &= np.abs(g.s - ev.s) > guard
    prod = (g.f1 * g.f2)[keep]
    sg = np.sign(prod)
    sg = sg[sg != 0]
    bad_prop = 0
    if len(sg):
        seen_pos = False
        for v in sg:
            if v > 0:
                seen_pos = True
            elif seen_pos:
                bad_prop += 1
    bad_infl = max(0, _sign_changes(g.f2[keep]) - 1)
    params = traj.params
    # sampled near-inflection points: |f''| small while |f'| is not
    near = keep & (np.abs(g.f2) < f2_tol) & (np.abs(g.f1) > 10 * f2_tol)
    bad_sign = int(np.count_nonzero(
        g.f1[near] * f_third(g.r[near], g.f1[near], g.f2[near], params) <= 0))
    for ev in g.inflections:
        th, r = ev.state.theta, ev.state.r
        f1 = math.cos(th) / math.sin(th)
        f3_model = f_third(r, f1, 0.0, params)
        i = int(np.searchsorted(g.s, ev.s))
        if 0 < i < len(g.s):
            f3_fd = (g.f2[i] - g.f2[i - 1]) / (g.r[i] - g.r[i - 1])
        else:
            f3_fd = f3_model
        if not (f1 * f3_model > 0 and f1 * f3_fd > 0):
            bad_sign += 1
    return {"propagation": bad_prop, "single_inflection": bad_infl, "inflection_sign": bad_sign}

"""Arc-length profile system and its adaptive integrator.

A hypersurface of revolution about the x-axis is generated by a profile curve
``(x(s), r(s))`` in the half plane ``r > 0``. Writing ``theta`` for the angle of
the unit tangent, the hypersurface satisfies ``H + <X, nu> = lam`` exactly when

    x'     = cos(theta)
    r'     = sin(theta)
    theta' = ((n - 1)/r - r) cos(theta) + x sin(theta) + lam

Shooting launches the curve horizontally from ``(0, delta)`` and integrates with
an embedded Dormand-Prince 5(4) pair under PI step control. Crossings of the
event functions ``theta``, ``theta - pi/2``, ``theta - pi``, ``theta'`` and ``x``
are bracketed on accepted steps and refined by Brent's method on exact sub-steps
from the step start, so event locations carry the integrator's accuracy rather
than that of an interpolant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError, DomainError

HALF_PI = 0.5 * math.pi

THETA_ZERO = "theta-zero"
THETA_HALF_PI = "theta-half-pi"
THETA_PI = "theta-pi"
THETA_DOT_ZERO = "theta-dot-zero"
X_ZERO = "x-zero"
EVENT_KINDS = (THETA_ZERO, THETA_HALF_PI, THETA_PI, THETA_DOT_ZERO, X_ZERO)

EVENT_STOP = "event-stop"
ARC_BUDGET = "arc-budget"
ESCAPE = "escape"
STEP_FAILURE = "step-failure"

R_FLOOR = 1e-12


def cylinder_radius(lam: float, n: int) -> float:
    """Radius of the equilibrium cylinder, ``(lam + sqrt(lam^2 + 4(n-1))) / 2``."""
    return 0.5 * (lam + math.sqrt(lam * lam + 4.0 * (n - 1)))


def sphere_radius(lam: float, n: int) -> float:
    """Radius of the round sphere solution (inward normal), ``(-lam + sqrt(lam^2 + 4n)) / 2``."""
    return 0.5 * (-lam + math.sqrt(lam * lam + 4.0 * n))


@dataclass(frozen=True)
class Params:
    """Problem instance: hypersurface dimension ``n`` and the constant ``lam``."""

    n: int
    lam: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n!r}")
        if not math.isfinite(self.lam):
            raise DomainError(f"lambda must be finite, got {self.lam!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def cylinder_radius(self) -> float:
        return cylinder_radius(self.lam, self.n)

    def flipped(self) -> "Params":
        """The same surface described with the opposite unit normal."""
        return Params(self.n, -self.lam)


class ProfileState(NamedTuple):
    s: float
    x: float
    r: float
    theta: float


@dataclass(frozen=True)
class EventRecord:
    kind: str
    s: float
    state: ProfileState
    theta_dot: float

    def as_dict(self) -> dict:
        return {"kind": self.kind, "s": self.s, "x": self.state.x,
                "r": self.state.r, "theta": self.state.theta}


def default_escape_bounds(params: Params) -> tuple[float, float]:
    """Escape radius and axial bound used when the controls leave them unset.

    Near the cylinder-type shot the linearised flow amplifies perturbations by
    ``exp(|X|^2 / 2)``, so no double-precision shot can track that curve much
    past ``|X| ~ 8``. A shot within 5e-9 of that curve must still show the
    escape signature, which caps the radius bound near 4.5; it is kept at
    least two units beyond the equilibrium cylinder. An escaping curve with
    ``theta' > 0`` must pass ``x = -lam`` (otherwise theta' turns negative as
    r grows), which fixes the axial bound.
    """
    return (max(4.0, cylinder_radius(abs(params.lam), params.n) + 2.0),
            max(abs(params.lam), 1e-3))


@dataclass(frozen=True)
class IntegratorControls:
    """Step control, budgets and event tolerance for one shot.

    ``r_max`` and ``x_max`` default to :func:`default_escape_bounds`. With
    ``sample_ds`` set, samples are emitted on the uniform grid ``k * sample_ds``
    (landed exactly by sub-steps) instead of at accepted steps.
    """

    rel_tol: float = 1e-11
    abs_tol: float = 1e-12
    s_max: float = 100.0
    r_max: float | None = None
    x_max: float | None = None
    event_tol: float = 1e-12
    max_steps: int = 10**7
    sample_ds: float | None = None
    safety: float = 0.9
    h_init: float = 1e-3
    degeneracy_margin: float = 1e-13

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "s_max", "event_tol", "safety", "h_init"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be a positive finite number, got {value!r}")
        for name in ("r_max", "x_max", "sample_ds"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value!r}")
        if int(self.max_steps) != self.max_steps or self.max_steps <= 0:
            raise ConfigurationError(f"max_steps must be a positive integer, got {self.max_steps!r}")
        if not self.safety < 1:
            raise ConfigurationError("safety factor must lie in (0, 1)")
        if self.degeneracy_margin < 0:
            raise ConfigurationError("degeneracy_margin must be >= 0")

    def resolved(self, params: Params) -> "IntegratorControls":
        r_def, x_def = default_escape_bounds(params)
        return replace(self,
                       r_max=r_def if self.r_max is None else self.r_max,
                       x_max=x_def if self.x_max is None else self.x_max)

    def tightened(self, factor: float = 10.0) -> "IntegratorControls":
        return replace(self, rel_tol=self.rel_tol / factor, abs_tol=self.abs_tol / factor)

    def widened(self, params: Params, factor: float = 2.0) -> "IntegratorControls":
        c = self.resolved(params)
        return replace(c, r_max=c.r_max * factor, x_max=c.x_max * factor)


def _check_state(x: float, r: float, theta: float) -> None:
    if not (math.isfinite(x) and math.isfinite(r) and math.isfinite(theta)):
        raise DomainError("state must be finite")
    if r <= 0:
        raise DomainError(f"radius must be positive, got r={r!r}")


def rhs(state: ProfileState, params: Params) -> tuple[float, float, float]:
    """Right-hand side ``(x', r', theta')`` of the profile system at ``state``."""
    _check_state(state.x, state.r, state.theta)
    c, s = math.cos(state.theta), math.sin(state.theta)
    return c, s, ((params.n - 1) / state.r - state.r) * c + state.x * s + params.lam


def theta_dot(state: ProfileState, params: Params) -> float:
    return rhs(state, params)[2]


def initial_theta_dot(delta: float, params: Params) -> float:
    """``theta'(0) = -(delta^2 - lam*delta - (n-1)) / delta``; positive iff delta < R_lam."""
    if not (math.isfinite(delta) and delta > 0):
        raise DomainError(f"delta must be positive, got {delta!r}")
    return -(delta * delta - params.lam * delta - (params.n - 1)) / delta


def profile_field(params: Params) -> Callable[[Sequence[float]], tuple]:
    """Fast unchecked vector field on ``(x, r, theta)`` tuples."""
    m, lam = params.n - 1, params.lam
    cos, sin = math.cos, math.sin

    def f(y):
        x, r, th = y
        c, s = cos(th), sin(th)
        return (c, s, (m / r - r) * c + x * s + lam)

    return f


# Dormand-Prince 5(4) tableau.
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                                -17253 / 339200, 22 / 525, -1 / 40)


def _dp_step(f, y, k1, h):
    """One Dormand-Prince step; returns ``(y_new, k7, err_vector)``."""
    k2 = f([a + h * _A21 * b for a, b in zip(y, k1)])
    k3 = f([a + h * (_A31 * b + _A32 * c) for a, b, c in zip(y, k1, k2)])
    k4 = f([a + h * (_A41 * b + _A42 * c + _A43 * d) for a, b, c, d in zip(y, k1, k2, k3)])
    k5 = f([a + h * (_A51 * b + _A52 * c + _A53 * d + _A54 * e)
            for a, b, c, d, e in zip(y, k1, k2, k3, k4)])
    k6 = f([a + h * (_A61 * b + _A62 * c + _A63 * d + _A64 * e + _A65 * g)
            for a, b, c, d, e, g in zip(y, k1, k2, k3, k4, k5)])
    y_new = [a + h * (_B1 * b + _B3 * d + _B4 * e + _B5 * g + _B6 * q)
             for a, b, d, e, g, q in zip(y, k1, k3, k4, k5, k6)]
    k7 = f(y_new)
    err = [h * (_E1 * b + _E3 * d + _E4 * e + _E5 * g + _E6 * q + _E7 * w)
           for b, d, e, g, q, w in zip(k1, k3, k4, k5, k6, k7)]
    return y_new, k7, err


def _sub_step(f, y, k1, h):
    """Land exactly at ``t0 + h`` from a step start; ``h == 0`` returns the start."""
    if h == 0.0:
        return list(y), k1
    y_new, k7, _ = _dp_step(f, y, k1, h)
    return y_new, k7


@dataclass
class _Run:
    t: list = field(default_factory=list)
    y: list = field(default_factory=list)
    dy: list = field(default_factory=list)
    events: list = field(default_factory=list)
    termination: str = ARC_BUDGET


def _march(f, y0, t_end, controls, event_funcs=(), initial_signs=(), terminal=(),
           escape=None, positive_index=None):
    """Adaptive integration from ``t = 0``.

    ``event_funcs`` are ``(name, g(y, dy))`` pairs; ``initial_signs`` gives the
    sign each event function takes just after ``t = 0`` (needed where it starts
    at an exact zero). Events named in ``terminal`` stop the run at the first
    crossing. ``escape(y)`` returning True stops with ``ESCAPE``. Component
    ``positive_index`` must stay above ``R_FLOOR``; stages violating it are
    rejected and shrink the step.
    """
    rtol, atol = controls.rel_tol, controls.abs_tol
    run = _Run()
    y = list(y0)
    k1 = f(y)
    t = 0.0
    run.t.append(t), run.y.append(tuple(y)), run.dy.append(tuple(k1))
    signs = list(initial_signs)
    grid_ds = controls.sample_ds
    next_grid = 1
    h = min(controls.h_init, t_end)
    err_old = 1e-4
    beta, expo = 0.04, 0.2 - 0.04 * 0.75
    n_steps = 0
    dim = len(y)

    while True:
        if t >= t_end:
            run.termination = ARC_BUDGET
            break
        if n_steps >= controls.max_steps:
            run.termination = STEP_FAILURE
            break
        h = min(h, t_end - t)
        if h < 1e-14 * max(1.0, abs(t)):
            run.termination = STEP_FAILURE
            break
        n_steps += 1
        try:
            y_new, k7, err_vec = _dp_step(f, y, k1, h)
            ok = positive_index is None or y_new[positive_index] > R_FLOOR
            if ok:
                err = math.sqrt(sum(
                    (e / (atol + rtol * max(abs(a), abs(b)))) ** 2
                    for e, a, b in zip(err_vec, y, y_new)) / dim)
                ok = math.isfinite(err)
        except (ZeroDivisionError, OverflowError, ValueError):
            ok = False
        if not ok:
            h *= 0.25
            continue
        if err > 1.0:
            h /= min(10.0, err ** expo / controls.safety)
            continue

        t_new = t if h == 0 else t + h
        if t_new == t:
            run.termination = STEP_FAILURE
            break

        # events on the accepted step
        found = []
        for idx, (name, g) in enumerate(event_funcs):
            g1 = g(y_new, k7)
            if signs[idx] * g1 <= 0:
                found.append((idx, name, g, g1))
        stop_at = None
        located = []
        for idx, name, g, g1 in found:
            sign0 = signs[idx]
            if g1 == 0.0:
                root = t_new
            else:
                y_start, k_start, t_start = y, k1, t
                g0 = g(y, k1)
                if g0 * sign0 <= 0:
                    g0 = sign0 * 1e-300

                def phi(tau, g=g, g0=g0, g1=g1):
                    if tau <= t_start:
                        return g0
                    if tau >= t_new:
                        return g1
                    ys, ks = _sub_step(f, y_start, k_start, tau - t_start)
                    return g(ys, ks)

                root = brentq(phi, t, t_new, xtol=controls.event_tol, rtol=4 * np.finfo(float).eps)
            signs[idx] = -sign0
            located.append((root, name))
            if name in terminal and (stop_at is None or root < stop_at):
                stop_at = root
        located.sort()

        if stop_at is not None:
            t_new = stop_at
            y_new, k7 = _sub_step(f, y, k1, stop_at - t)
        for root, name in located:
            if stop_at is not None and root > stop_at:
                continue
            ys, ks = _sub_step(f, y, k1, root - t)
            run.events.append((name, root, tuple(ys), tuple(ks)))

        if grid_ds is not None:
            while next_grid * grid_ds <= t_new:
                tg = next_grid * grid_ds
                if tg > t:
                    ys, ks = _sub_step(f, y, k1, tg - t)
                    run.t.append(tg), run.y.append(tuple(ys)), run.dy.append(tuple(ks))
                next_grid += 1
            if (stop_at is not None or t_new >= t_end) and run.t[-1] != t_new:
                run.t.append(t_new), run.y.append(tuple(y_new)), run.dy.append(tuple(k7))
        else:
            run.t.append(t_new), run.y.append(tuple(y_new)), run.dy.append(tuple(k7))

        t, y, k1 = t_new, y_new, k7
        if stop_at is not None:
            run.termination = EVENT_STOP
            break
        if escape is not None and escape(y):
            if grid_ds is not None and run.t[-1] != t:
                run.t.append(t), run.y.append(tuple(y)), run.dy.append(tuple(k1))
            run.termination = ESCAPE
            break

        err = max(err, 1e-10)
        fac = err ** expo / err_old ** beta / controls.safety
        h /= max(0.1, min(5.0, fac))
        err_old = max(err, 1e-4)

    if grid_ds is not None and run.t[-1] != t:
        run.t.append(t), run.y.append(tuple(y)), run.dy.append(tuple(k1))
    return run


_EVENT_FUNCS = (
    (THETA_ZERO, lambda y, dy: y[2]),
    (THETA_HALF_PI, lambda y, dy: y[2] - HALF_PI),
    (THETA_PI, lambda y, dy: y[2] - math.pi),
    (THETA_DOT_ZERO, lambda y, dy: dy[2]),
    (X_ZERO, lambda y, dy: y[0]),
)

STOP_MODES = {"s1": frozenset({THETA_ZERO, THETA_PI}), None: frozenset()}


@dataclass(frozen=True)
class Trajectory:
    """Integrated shot: sample arrays, located events and why the run ended."""

    s: np.ndarray
    x: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    events: tuple
    termination: str
    params: Params
    delta: float
    controls: IntegratorControls

    def __post_init__(self):
        for name in ("s", "x", "r", "theta", "theta_dot"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "events", tuple(self.events))

    def __len__(self) -> int:
        return len(self.s)

    def states(self) -> Iterator[ProfileState]:
        for row in zip(self.s, self.x, self.r, self.theta):
            yield ProfileState(*map(float, row))

    @property
    def final(self) -> ProfileState:
        return ProfileState(float(self.s[-1]), float(self.x[-1]), float(self.r[-1]), float(self.theta[-1]))

    def first(self, *kinds: str) -> EventRecord | None:
        for ev in self.events:
            if ev.kind in kinds:
                return ev
        return None

    def state_at(self, s: float) -> ProfileState:
        """Cubic Hermite dense output on ``(x, r, theta)``."""
        if not self.s[0] <= s <= self.s[-1]:
            raise DomainError(f"s={s} outside sampled range [{self.s[0]}, {self.s[-1]}]")
        i = int(np.searchsorted(self.s, s, side="right")) - 1
        i = min(max(i, 0), len(self.s) - 2)
        s0, s1 = self.s[i], self.s[i + 1]
        h = s1 - s0
        u = (s - s0) / h
        h00 = (1 + 2 * u) * (1 - u) ** 2
        h10 = u * (1 - u) ** 2
        h01 = u * u * (3 - 2 * u)
        h11 = u * u * (u - 1)
        out = []
        derivs = (np.cos(self.theta[[i, i + 1]]), np.sin(self.theta[[i, i + 1]]),
                  self.theta_dot[[i, i + 1]])
        for arr, d in zip((self.x, self.r, self.theta), derivs):
            out.append(h00 * arr[i] + h10 * h * d[0] + h01 * arr[i + 1] + h11 * h * d[1])
        return ProfileState(float(s), *map(float, out))


def _cylinder_trajectory(delta, params, controls):
    ds = controls.sample_ds or 0.01
    n_pts = int(math.floor(controls.s_max / ds)) + 1
    s = np.arange(n_pts) * ds
    if s[-1] < controls.s_max:
        s = np.append(s, controls.s_max)
    zeros = np.zeros_like(s)
    return Trajectory(s, s.copy(), np.full_like(s, delta), zeros, zeros.copy(), (),
                      ARC_BUDGET, params, delta, controls)


def integrate(delta: float, params: Params, controls: IntegratorControls | None = None,
              stop: str | None = "s1") -> Trajectory:
    """Shoot the profile curve from ``(x, r, theta) = (0, delta, 0)``.

    Parameters
    ----------
    delta : float
        Launch radius, ``delta > 0``.
    params : Params
    controls : IntegratorControls, optional
    stop : {"s1", None}
        ``"s1"`` halts at the first return of theta to 0 or pi; ``None`` runs
        until the arc budget, escape or a step failure.

    Returns
    -------
    Trajectory
        ``termination`` is one of ``event-stop``, ``arc-budget``, ``escape`` or
        ``step-failure``; failures never raise.

    Notes
    -----
    Within ``controls.degeneracy_margin`` of the cylinder radius the exact
    constant solution ``theta = 0, r = delta, x = s`` is returned, since the
    flow along the axis direction amplifies rounding like ``exp(s^2 / 2)``.
    """
    if not (isinstance(delta, (int, float)) and math.isfinite(delta) and delta > 0):
        raise DomainError(f"delta must be positive, got {delta!r}")
    if stop not in STOP_MODES:
        raise ConfigurationError(f"unknown stop mode {stop!r}")
    controls = (controls or IntegratorControls()).resolved(params)
    delta = float(delta)
    radius = params.cylinder_radius
    if abs(delta - radius) <= controls.degeneracy_margin * max(1.0, radius):
        return _cylinder_trajectory(delta, params, controls)

    f = profile_field(params)
    td0 = initial_theta_dot(delta, params)
    signs = (1.0 if td0 > 0 else -1.0, -1.0, -1.0, 1.0 if td0 > 0 else -1.0, 1.0)
    r_max, x_max = controls.r_max, controls.x_max
    run = _march(f, (0.0, delta, 0.0), controls.s_max, controls,
                 event_funcs=_EVENT_FUNCS, initial_signs=signs,
                 terminal=STOP_MODES[stop],
                 escape=lambda y: y[1] > r_max and y[0] > x_max,
                 positive_index=1)
    ys = np.array(run.y)
    dys = np.array(run.dy)
    events = [EventRecord(name, root, ProfileState(root, *ys_), dys_[2])
              for name, root, ys_, dys_ in run.events]
    return Trajectory(np.array(run.t), ys[:, 0], ys[:, 1], ys[:, 2], dys[:, 2],
                      events, run.termination, params, delta, controls)


@dataclass(frozen=True)
class RescaledTrajectory:
    t: np.ndarray
    xi: np.ndarray
    rho: np.ndarray
    alpha: np.ndarray
    delta: float
    params: Params


def integrate_rescaled(delta: float, params: Params, t_end: float, sample_dt: float,
                       controls: IntegratorControls | None = None) -> RescaledTrajectory:
    """Integrate the small-delta blow-up ``(xi, rho, alpha)`` from the origin.

    ``xi = x(delta t)/delta``, ``rho = (r(delta t) - delta)/delta`` and
    ``alpha = theta(delta t)``; ``delta = 0`` gives the explicit limit flow.
    """
    if delta < 0 or not math.isfinite(delta):
        raise DomainError(f"delta must be >= 0, got {delta!r}")
    controls = replace(controls or IntegratorControls(), sample_ds=sample_dt, s_max=t_end)
    m, lam = params.n - 1, params.lam
    d2 = delta * delta
    cos, sin = math.cos, math.sin

    def f(y):
        xi, rho, a = y
        c, s = cos(a), sin(a)
        return (c, s, m / (1.0 + rho) * c + lam * delta + d2 * (xi * s - (1.0 + rho) * c))

    run = _march(f, (0.0, 0.0, 0.0), t_end, controls)
    ys = np.array(run.y)
    return RescaledTrajectory(np.array(run.t), ys[:, 0], ys[:, 1], ys[:, 2], delta, params)

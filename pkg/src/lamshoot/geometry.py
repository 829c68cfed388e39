"""Profile curves, curvatures, convexity and meshes of the surfaces of revolution.

A profile ``(x(s), r(s))`` revolved about the x-axis gives the hypersurface
``(x, r alpha)`` with ``alpha`` on the unit sphere. Curvatures use the normal
``nu = (-r', x' alpha)``; ``flip=True`` reports them for ``-nu`` instead, which
negates ``lambda``, ``H`` and both principal curvatures together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, DomainError, NotClosableError, UnsupportedDimensionError
from .ode_core import THETA_PI, THETA_ZERO, Params, Trajectory, cylinder_radius, sphere_radius

CLOSURE_REL = 1e-8


@dataclass(frozen=True)
class ProfileCurve:
    """Ordered samples of a unit-speed profile curve.

    For a closed curve the last sample repeats the first position (theta
    differs by the total turning, ``2 pi``).
    """

    s: np.ndarray
    x: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    params: Params
    closed: bool = False
    closure_error: float = 0.0
    source_delta: float | None = None

    def __post_init__(self):
        for name in ("s", "x", "r", "theta", "theta_dot"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not np.all(self.r > 0):
            raise DomainError("profile curves need r > 0 at every sample")

    def __len__(self) -> int:
        return len(self.s)

    @property
    def points(self) -> np.ndarray:
        """``(N, 5)`` array of ``(s, x, r, theta, theta_dot)``."""
        return np.column_stack([self.s, self.x, self.r, self.theta, self.theta_dot])

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "ProfileCurve":
        return cls(traj.s, traj.x, traj.r, traj.theta, traj.theta_dot, traj.params,
                   source_delta=traj.delta)


class CurvatureSample(NamedTuple):
    s: float
    kappa_rot: float
    kappa_prof: float
    H: float
    residual: float


# -- analytic families ----------------------------------------------------------

def plane_curve(params: Params, r_range: tuple[float, float] = (0.1, 3.0),
                samples: int = 1000) -> ProfileCurve:
    """The plane ``x = -lambda``: a vertical line traversed upward."""
    r = np.linspace(r_range[0], r_range[1], samples)
    s = r - r[0]
    return ProfileCurve(s, np.full_like(r, -params.lam), r, np.full_like(r, 0.5 * math.pi),
                        np.zeros_like(r), params)


def sphere_curve(params: Params, samples: int = 1000, pole_gap: float = 1e-3) -> ProfileCurve:
    """The sphere of radius ``(-lambda + sqrt(lambda^2 + 4n)) / 2`` about the origin.

    Traversed counter-clockwise from near ``(rho, 0)`` to near ``(-rho, 0)`` so
    the normal points inward; the poles on the axis are left out.
    """
    rho = sphere_radius(params.lam, params.n)
    phi = np.linspace(pole_gap, math.pi - pole_gap, samples)
    return ProfileCurve(rho * phi, rho * np.cos(phi), rho * np.sin(phi), 0.5 * math.pi + phi,
                        np.full_like(phi, 1.0 / rho), params)


def cylinder_curve(params: Params, length: float = 4.0, samples: int = 1000) -> ProfileCurve:
    """The cylinder ``r = R_lambda`` over ``x in [-length/2, length/2]``."""
    radius = cylinder_radius(params.lam, params.n)
    x = np.linspace(-0.5 * length, 0.5 * length, samples)
    return ProfileCurve(x - x[0], x, np.full_like(x, radius), np.zeros_like(x),
                        np.zeros_like(x), params, source_delta=radius)


# -- closing and extending shots ---------------------------------------------------

def _segments_intersect(p, q, a, b):
    """Vectorised closed-segment intersection of ``p q`` with each ``a[k] b[k]``."""
    def orient(u, v, w):
        return (v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1]) - \
               (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0])

    def on_seg(u, v, w):
        return ((np.minimum(u[..., 0], v[..., 0]) <= w[..., 0])
                & (w[..., 0] <= np.maximum(u[..., 0], v[..., 0]))
                & (np.minimum(u[..., 1], v[..., 1]) <= w[..., 1])
                & (w[..., 1] <= np.maximum(u[..., 1], v[..., 1])))

    d1, d2 = orient(a, b, p), orient(a, b, q)
    d3, d4 = orient(p, q, a), orient(p, q, b)
    proper = (((d1 > 0) & (d2 < 0)) | ((d1 < 0) & (d2 > 0))) & \
             (((d3 > 0) & (d4 < 0)) | ((d3 < 0) & (d4 > 0)))
    touch = ((d1 == 0) & on_seg(a, b, p)) | ((d2 == 0) & on_seg(a, b, q)) | \
            ((d3 == 0) & on_seg(p, q, a)) | ((d4 == 0) & on_seg(p, q, b))
    return proper | touch


def self_intersections(x: np.ndarray, r: np.ndarray, closed: bool) -> list[tuple[int, int]]:
    """Index pairs of non-adjacent polyline segments that meet.

    Segments are swept in order of their left end; each is tested only
    against later segments whose x-range overlaps it.
    """
    pts = np.column_stack([x, r])
    a, b = pts[:-1], pts[1:]
    m = len(a)
    xlo = np.minimum(a[:, 0], b[:, 0])
    xhi = np.maximum(a[:, 0], b[:, 0])
    ylo = np.minimum(a[:, 1], b[:, 1])
    yhi = np.maximum(a[:, 1], b[:, 1])
    order = np.argsort(xlo, kind="stable")
    xlo_sorted = xlo[order]
    hits = []
    for pos, i in enumerate(order):
        stop = int(np.searchsorted(xlo_sorted, xhi[i], side="right"))
        cand = order[pos + 1:stop]
        if not len(cand):
            continue
        cand = cand[(ylo[cand] <= yhi[i]) & (yhi[cand] >= ylo[i])]
        gap = np.abs(cand - i)
        adjacent = gap == 1
        if closed:
            adjacent |= gap == m - 1
        cand = cand[~adjacent]
        if not len(cand):
            continue
        meet = _segments_intersect(a[i], b[i], a[cand], b[cand])
        hits.extend((int(min(i, j)), int(max(i, j))) for j in cand[meet])
    return sorted(hits)


def is_simple(curve: ProfileCurve) -> bool:
    return not self_intersections(curve.x, curve.r, curve.closed)


def reflect_close(traj: Trajectory, closure_tol: float | None = None) -> ProfileCurve:
    """Double a shot that meets the axis plane orthogonally at ``s1``.

    The arc on ``[0, s1]`` is continued by ``(s, x, r, theta) -> (2 s1 - s,
    -x, r, 2 pi - theta)``, which maps solutions to solutions, giving a closed
    curve on ``[0, 2 s1]``.

    Raises
    ------
    NotClosableError
        Unless ``s1`` is a ``theta = pi`` event with ``|x(s1)|`` and
        ``|theta(s1) - pi| r(s1)`` below ``closure_tol`` (default
        ``1e-8 max(1, r(s1))``), or if the doubled curve is not simple.
    """
    ev = traj.first(THETA_ZERO, THETA_PI)
    if ev is None or ev.kind != THETA_PI:
        raise NotClosableError("shot does not reach theta = pi before returning to theta = 0",
                               None, None)
    x1, r1, th1 = ev.state.x, ev.state.r, ev.state.theta
    tol = CLOSURE_REL * max(1.0, r1) if closure_tol is None else closure_tol
    err = max(abs(x1), abs(th1 - math.pi) * r1)
    if not err < tol:
        raise NotClosableError(f"closure defect too large: x(s1)={x1!r}, "
                               f"theta(s1)-pi={th1 - math.pi!r} (tolerance {tol:.3g})",
                               x1, th1 - math.pi)
    keep = traj.s <= ev.s
    s, x, r = traj.s[keep], traj.x[keep], traj.r[keep]
    th, td = traj.theta[keep], traj.theta_dot[keep]
    if s[-1] < ev.s:
        s, x, r = np.append(s, ev.s), np.append(x, x1), np.append(r, r1)
        th, td = np.append(th, th1), np.append(td, ev.theta_dot)
    s1 = s[-1]
    mir = slice(-2, None, -1)
    curve = ProfileCurve(np.concatenate([s, 2 * s1 - s[mir]]),
                         np.concatenate([x, -x[mir]]),
                         np.concatenate([r, r[mir]]),
                         np.concatenate([th, 2 * math.pi - th[mir]]),
                         np.concatenate([td, td[mir]]),
                         traj.params, closed=True, closure_error=err, source_delta=traj.delta)
    bad = self_intersections(curve.x, curve.r, closed=True)
    if bad:
        raise NotClosableError(f"doubled curve self-intersects at segment pairs {bad[:5]}",
                               x1, th1 - math.pi)
    return curve


def symmetric_extension(traj: Trajectory) -> ProfileCurve:
    """Whole curve through the launch point via ``(s, x, theta) -> (-s, -x, -theta)``."""
    mir = slice(None, 0, -1)
    return ProfileCurve(np.concatenate([-traj.s[mir], traj.s]),
                        np.concatenate([-traj.x[mir], traj.x]),
                        np.concatenate([traj.r[mir], traj.r]),
                        np.concatenate([-traj.theta[mir], traj.theta]),
                        np.concatenate([traj.theta_dot[mir], traj.theta_dot]),
                        traj.params, source_delta=traj.delta)


# -- curvature ---------------------------------------------------------------

@dataclass(frozen=True)
class CurvatureArrays:
    s: np.ndarray
    kappa_rot: np.ndarray
    kappa_prof: np.ndarray
    H: np.ndarray
    residual: np.ndarray
    flipped: bool = False

    def samples(self) -> list[CurvatureSample]:
        return [CurvatureSample(*map(float, row)) for row in
                zip(self.s, self.kappa_rot, self.kappa_prof, self.H, self.residual)]


def curvature_arrays(curve: ProfileCurve, params: Params | None = None,
                     flip: bool = False) -> CurvatureArrays:
    """Principal curvatures, mean curvature and the equation residual per sample.

    ``kappa_rot = -x'/r`` (multiplicity ``n - 1``) and ``kappa_prof =
    x' r'' - x'' r'``, both from the unit tangent ``(cos theta, sin theta)``;
    ``residual = H + <X, nu> - lambda``.
    """
    params = params or curve.params
    if not np.all(curve.r > 0):
        raise DomainError("curvatures need r > 0")
    c, s_, td = np.cos(curve.theta), np.sin(curve.theta), curve.theta_dot
    xd, rd = c, s_
    xdd, rdd = -s_ * td, c * td
    kappa_rot = -xd / curve.r
    kappa_prof = xd * rdd - xdd * rd
    H = kappa_prof + (params.n - 1) * kappa_rot
    support = -curve.x * rd + curve.r * xd
    residual = H + support - params.lam
    if flip:
        # -nu: lambda, H and the principal curvatures change sign together
        kappa_rot, kappa_prof, H, residual = -kappa_rot, -kappa_prof, -H, -residual
    return CurvatureArrays(curve.s.copy(), kappa_rot, kappa_prof, H, residual, flip)


def curvature_profile(curve: ProfileCurve, params: Params | None = None,
                      flip: bool = False) -> list[CurvatureSample]:
    return curvature_arrays(curve, params, flip).samples()


def _compress_signs(values, atol):
    out = []
    for v in values:
        sg = "0" if abs(v) <= atol else ("+" if v > 0 else "-")
        if not out or out[-1] != sg:
            out.append(sg)
    return out


def convexity_check(samples: list[CurvatureSample], atol: float = 0.0) -> tuple[bool, dict]:
    """Whether all principal curvatures share a weak sign along the curve.

    ``sign_pattern`` maps each principal curvature to its run-length
    compressed sign sequence; values within ``atol`` of zero count as ``"0"``.
    """
    if not samples:
        raise DomainError("convexity check needs at least one sample")
    k_rot = [smp.kappa_rot for smp in samples]
    k_prof = [smp.kappa_prof for smp in samples]
    pattern = {"kappa_rot": _compress_signs(k_rot, atol),
               "kappa_prof": _compress_signs(k_prof, atol)}
    signs = set(pattern["kappa_rot"]) | set(pattern["kappa_prof"])
    return not ("+" in signs and "-" in signs), pattern


# -- meshes -------------------------------------------------------------------

@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray

    def edges(self) -> np.ndarray:
        """Undirected edges, one row per face side (duplicates kept)."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        return np.sort(e, axis=1)

    def euler_characteristic(self) -> int:
        unique_edges = np.unique(self.edges(), axis=0)
        return len(self.vertices) - len(unique_edges) + len(self.faces)

    def is_watertight(self) -> bool:
        _, counts = np.unique(self.edges(), axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def is_consistently_oriented(self) -> bool:
        """Every directed edge occurs at most once."""
        f = self.faces
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        return len(np.unique(directed, axis=0)) == len(directed)

    def winding_agrees_with_normals(self) -> bool:
        v = self.vertices
        a, b, c = v[self.faces[:, 0]], v[self.faces[:, 1]], v[self.faces[:, 2]]
        cross = np.cross(b - a, c - a)
        nrm = self.normals[self.faces].sum(axis=1)
        return bool(np.all(np.einsum("ij,ij->i", cross, nrm) > 0))


def revolve_mesh(curve: ProfileCurve, segments: int = 64) -> TriangleMesh:
    """Rotate a profile about the x-axis in 3-space.

    Vertex ``(i, j)`` sits at ``(x_i, r_i cos phi_j, r_i sin phi_j)``. Faces
    wind so that their geometric normal agrees with ``nu``. A closed curve
    gives a watertight torus; an open one an open-ended tube.
    """
    if curve.params.n != 2:
        raise UnsupportedDimensionError(
            f"meshes exist only for surfaces in 3-space (n = 2), got n = {curve.params.n}")
    if int(segments) != segments or segments < 3:
        raise ConfigurationError(f"segments must be an integer >= 3, got {segments!r}")
    segments = int(segments)
    x, r, th = curve.x, curve.r, curve.theta
    if curve.closed:
        x, r, th = x[:-1], r[:-1], th[:-1]
    rings = len(x)
    phi = 2 * math.pi * np.arange(segments) / segments
    cphi, sphi = np.cos(phi), np.sin(phi)
    verts = np.empty((rings, segments, 3))
    verts[:, :, 0] = x[:, None]
    verts[:, :, 1] = r[:, None] * cphi
    verts[:, :, 2] = r[:, None] * sphi
    nrm = np.empty_like(verts)
    nrm[:, :, 0] = -np.sin(th)[:, None]
    nrm[:, :, 1] = np.cos(th)[:, None] * cphi
    nrm[:, :, 2] = np.cos(th)[:, None] * sphi
    idx = np.arange(rings * segments).reshape(rings, segments)
    i_next = np.arange(rings) + 1
    if curve.closed:
        i_next %= rings
    else:
        i_next = i_next[:-1]
    i_cur = np.arange(len(i_next))
    a = idx[i_cur][:, :]
    b = np.roll(idx[i_cur], -1, axis=1)
    c = idx[i_next]
    d = np.roll(idx[i_next], -1, axis=1)
    faces = np.concatenate([np.stack([a, b, c], axis=-1).reshape(-1, 3),
                            np.stack([b, d, c], axis=-1).reshape(-1, 3)])
    return TriangleMesh(verts.reshape(-1, 3), faces, nrm.reshape(-1, 3))


def profile_area(curve: ProfileCurve) -> float:
    """Signed shoelace area of the closed sample polygon."""
    x, r = curve.x, curve.r
    return 0.5 * float(np.sum(x * np.roll(r, -1) - np.roll(x, -1) * r))


def torus_comparison(curves: list[ProfileCurve]) -> list[dict]:
    """Geometric separators between closed profiles: r- and x-ranges, length, area."""
    out = []
    for cv in curves:
        out.append({"delta": cv.source_delta, "min_r": float(cv.r.min()), "max_r": float(cv.r.max()),
                    "min_x": float(cv.x.min()), "max_x": float(cv.x.max()),
                    "length": float(cv.s[-1] - cv.s[0]), "profile_area": abs(profile_area(cv)),
                    "closure_error": cv.closure_error})
    return out

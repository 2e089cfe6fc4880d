"""Shooting integrator for rotational H-surfaces meeting the axis orthogonally.

For ``H(x) = h(<x, e3>)`` a surface of revolution with arc-length
profile ``(r(s), z(s))`` and tangent angle ``theta`` has normal
``(-sin theta, cos theta)`` in the ``(r, z)`` half-plane, and the
condition ``2H = theta' + sin(theta)/r`` becomes

    r' = cos(theta),  z' = sin(theta),  theta' = 2 h(cos theta) - sin(theta)/r.

``sigma = +1`` gives the cap ``M+`` whose normal on the axis is ``+e3``.
``sigma = -1`` gives ``M-`` (normal ``-e3`` on the axis): the profile is
integrated for the orientation-reversed function ``t -> -h(-t)`` and the
stored face orientation of revolved meshes is flipped back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .meshgeom import TriMesh

AXIS_START = 1e-4
LOCAL_TOL = 1e-10
EVENT_TOL = 1e-12
STEP_FLOOR = 1e-14
MAX_STEP = 1e-2


class AxisSingularity(ValueError):
    pass


class StiffnessFailure(RuntimeError):
    pass


class DegenerateCurve(ValueError):
    pass


@dataclass(frozen=True)
class ProfileState:
    s: float
    r: float
    z: float
    theta: float


@dataclass
class ProfileCurve:
    """Samples of an integrated profile.

    ``termination`` is one of ``"target_radius"``, ``"vertical"``,
    ``"max_arc_length"``.
    """

    s: np.ndarray
    r: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    sigma: int
    termination: str

    def __len__(self):
        return len(self.s)

    def state(self, k: int) -> ProfileState:
        return ProfileState(float(self.s[k]), float(self.r[k]), float(self.z[k]), float(self.theta[k]))

    @property
    def arc_length(self) -> float:
        return float(self.s[-1] - self.s[0])

    def as_graph(self) -> Callable[[np.ndarray], np.ndarray]:
        """``z`` as a function of ``r`` (valid while the profile is not vertical)."""
        keep = np.concatenate([[True], np.diff(self.r) > 0])
        r, z, th = self.r[keep], self.z[keep], self.theta[keep]
        spline = CubicHermiteSpline(r, z, np.tan(th))
        return lambda rr: spline(np.asarray(rr, dtype=float))

    def to_csv_rows(self):
        return zip(self.s, self.r, self.z, self.theta)


def signed_profile(h: Callable, sigma: int) -> Callable:
    """``h`` for ``sigma = +1`` and ``t -> -h(-t)`` for ``sigma = -1``."""
    if sigma == 1:
        return h
    if sigma == -1:
        return lambda t: -np.asarray(h(-np.asarray(t)), dtype=float)
    raise ValueError("sigma must be +1 or -1")


def profile_rhs(state: ProfileState, h: Callable, sigma: int = 1) -> tuple[float, float, float]:
    """``(r', z', theta')`` at a state off the axis."""
    if state.r == 0:
        raise AxisSingularity("profile equation is singular on the axis; start from the series")
    hs = signed_profile(h, sigma)
    c, s = np.cos(state.theta), np.sin(state.theta)
    return float(c), float(s), float(2.0 * hs(c) - s / state.r)


def _rhs(y, hs):
    r, z, th = y
    c, s = np.cos(th), np.sin(th)
    return np.array([c, s, 2.0 * float(hs(c)) - s / r])


def _rk4(y, dt, hs):
    k1 = _rhs(y, hs)
    k2 = _rhs(y + 0.5 * dt * k1, hs)
    k3 = _rhs(y + 0.5 * dt * k2, hs)
    k4 = _rhs(y + dt * k3, hs)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _step(y, dt, hs):
    """Step-doubled RK4 with local extrapolation; returns (new state, error estimate)."""
    full = _rk4(y, dt, hs)
    half = _rk4(_rk4(y, 0.5 * dt, hs), 0.5 * dt, hs)
    err = float(np.max(np.abs(half - full))) / 15.0
    return half + (half - full) / 15.0, err


def axis_series(h: Callable, sigma: int, s: float) -> np.ndarray:
    """Regularized start ``(r, z, theta)`` at arc length ``s`` near the axis."""
    k = float(signed_profile(h, sigma)(1.0))
    return np.array([s - k * k * s**3 / 6.0, 0.5 * k * s * s, k * s])


def integrate_from_axis(h: Callable, sigma: int = 1, target_radius: float | None = None,
                        max_arc_length: float | None = None, tol: float = LOCAL_TOL,
                        max_step: float = MAX_STEP) -> ProfileCurve:
    """Shoot the profile from the axis.

    Stops at ``target_radius``, at a vertical point ``|theta| = pi/2``, or
    at ``max_arc_length``, whichever comes first; events are localized by
    bisection to ``1e-12``.
    """
    if target_radius is None and max_arc_length is None:
        raise ValueError("give target_radius and/or max_arc_length")
    hs = signed_profile(h, sigma)
    S = np.inf if max_arc_length is None else float(max_arc_length)
    R = np.inf if target_radius is None else float(target_radius)
    s0 = min(AXIS_START, 0.5 * S, 0.5 * R)
    y = axis_series(h, sigma, s0)
    s = s0
    out = [(0.0, 0.0, 0.0, 0.0), (s, *y)]
    dt = min(max_step, 1e-3)

    def events(yy, ss):
        return {"target_radius": yy[0] - R, "vertical": abs(yy[2]) - 0.5 * np.pi,
                "max_arc_length": ss - S}

    reason = None
    while reason is None:
        dt = min(dt, max_step, S - s)
        if dt < STEP_FLOOR:
            if S - s <= STEP_FLOOR:
                reason = "max_arc_length"
                break
            raise StiffnessFailure(f"step size underflow at s = {s:.6g}")
        y_new, err = _step(y, dt, hs)
        if not np.all(np.isfinite(y_new)) or err > tol:
            scale = 0.5 if not np.isfinite(err) else max(0.1, 0.9 * (tol / err) ** 0.2)
            dt *= scale
            continue
        s_new = s + dt
        ev = events(y_new, s_new)
        crossed = [k for k, val in ev.items() if val >= 0]
        if crossed:
            # bisect on the step length for the earliest event
            lo, hi = 0.0, dt
            first = None
            while hi - lo > EVENT_TOL:
                mid = 0.5 * (lo + hi)
                ym, _ = _step(y, mid, hs)
                if any(v >= 0 for v in events(ym, s + mid).values()):
                    hi = mid
                else:
                    lo = mid
            y_end, _ = _step(y, hi, hs)
            evh = events(y_end, s + hi)
            first = max(evh, key=lambda k: evh[k])
            if first == "vertical":
                y_end[2] = np.copysign(0.5 * np.pi, y_end[2])
            out.append((s + hi, *y_end))
            reason = first
            break
        y, s = y_new, s_new
        out.append((s, *y))
        if err > 0:
            dt *= min(2.0, max(0.2, 0.9 * (tol / err) ** 0.2))
        else:
            dt *= 2.0
    arr = np.asarray(out)
    return ProfileCurve(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], sigma, reason)


def mirror_closed(curve: ProfileCurve) -> ProfileCurve:
    """Glue a cap ending at a vertical point to its mirror image in ``z = z_end``.

    Produces the profile of a closed surface (both ends on the axis).
    """
    if curve.termination != "vertical":
        raise DegenerateCurve("only caps ending at a vertical point can be mirrored")
    z_end = curve.z[-1]
    L = curve.s[-1]
    s2 = 2 * L - curve.s[-2::-1]
    r2 = curve.r[-2::-1]
    z2 = 2 * z_end - curve.z[-2::-1]
    th2 = np.pi - curve.theta[-2::-1] if curve.theta[-1] > 0 else -np.pi - curve.theta[-2::-1]
    return ProfileCurve(np.concatenate([curve.s, s2]), np.concatenate([curve.r, r2]),
                        np.concatenate([curve.z, z2]), np.concatenate([curve.theta, th2]),
                        curve.sigma, "closed")


def resample(curve: ProfileCurve, ds: float) -> ProfileCurve:
    """Uniform arc-length resampling by cubic Hermite interpolation (``r' = cos``, ``z' = sin``)."""
    m = max(2, int(np.ceil(curve.arc_length / ds)))
    s = np.linspace(curve.s[0], curve.s[-1], m + 1)
    keep = np.concatenate([[True], np.diff(curve.s) > 0])
    cs, th = curve.s[keep], curve.theta[keep]
    r = CubicHermiteSpline(cs, curve.r[keep], np.cos(th))(s)
    z = CubicHermiteSpline(cs, curve.z[keep], np.sin(th))(s)
    theta = np.interp(s, cs, th)
    r[0], r[-1], z[-1], theta[-1] = curve.r[0], curve.r[-1], curve.z[-1], curve.theta[-1]
    return ProfileCurve(s, r, z, theta, curve.sigma, curve.termination)


def revolve(curve: ProfileCurve, n: int = 64, ds: float | None = None) -> TriMesh:
    """Triangulated surface of revolution about the ``e3`` axis.

    The profile is first resampled at uniform arc length ``ds`` (default:
    the angular spacing ``2 pi r_max / n`` at the widest ring).  A fan
    closes the surface at every profile end lying on the axis.  The face
    orientation makes the normal on the axis at ``s = 0`` equal to
    ``sigma * e3``.
    """
    if n < 8:
        raise ValueError("angular resolution must be at least 8")
    if len(curve) < 2 or curve.arc_length < 10 * STEP_FLOOR:
        raise DegenerateCurve("profile too short to revolve")
    if ds is None:
        ds = 2 * np.pi * max(float(np.max(curve.r)), curve.arc_length / n) / n
    curve = resample(curve, ds)
    r, z = curve.r, curve.z
    on_axis = r <= 1e-13
    if not on_axis[0]:
        raise DegenerateCurve("profile must start on the axis")
    closes = bool(on_axis[-1]) and len(curve) > 2
    ring_idx = np.arange(1, len(curve) - (1 if closes else 0))
    phi = 2 * np.pi * np.arange(n) / n
    verts = [np.array([[0.0, 0.0, z[0]]])]
    for k in ring_idx:
        verts.append(np.column_stack([r[k] * np.cos(phi), r[k] * np.sin(phi), np.full(n, z[k])]))
    if closes:
        verts.append(np.array([[0.0, 0.0, z[-1]]]))
    V = np.vstack(verts)
    m = len(ring_idx)
    ring = lambda k: 1 + k * n + (np.arange(n) % n)
    nxt = lambda k: 1 + k * n + ((np.arange(n) + 1) % n)
    faces = [np.column_stack([np.zeros(n, dtype=int), ring(0), nxt(0)])]
    for k in range(m - 1):
        a, b = ring(k), nxt(k)
        c, d = ring(k + 1), nxt(k + 1)
        faces.append(np.column_stack([a, c, d]))
        faces.append(np.column_stack([a, d, b]))
    if closes:
        top = len(V) - 1
        faces.append(np.column_stack([np.full(n, top), nxt(m - 1), ring(m - 1)]))
    F = np.vstack(faces)
    # fan triangle (axis, ring0[j], ring0[j+1]) has normal +e3 when the profile heads outward
    if curve.sigma == -1:
        F = F[:, ::-1]
    return TriMesh(V, F)

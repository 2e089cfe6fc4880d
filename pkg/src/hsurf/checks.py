"""Numerical verification of the structural results on computed surfaces.

Every check returns a :class:`CheckReport`.  Hypotheses are evaluated
first; if a verified hypothesis fails, the conclusion is reported as
``"vacuous"`` and the report never passes.  Geometric conclusions use
tolerances proportional to the squared grid spacing, algebraic symmetries
a multiple of the solver tolerance; the tolerance used is recorded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import curvature
from .curvature import PrescribedFunction
from .domain import DirichletData, PlanarDomain
from .graph_solver import (GraphSolution, GradientBlowup, NonConvergence, SolverConfig,
                           height, solve_dirichlet, surface_area)
from .meshgeom import TriMesh, flux_integral, hsurface_residual, vector_area

E3 = np.array([0.0, 0.0, 1.0])
ZERO_TOL = 1e-9
RATIO_SLACK = 1e-2
SATISFIED, VIOLATED, NOT_VERIFIED = "satisfied", "violated", "not-verified"


class CheckError(ValueError):
    pass


class HypothesisViolated(CheckError):
    """Raised by checks called with ``strict=True``; carries the vacuous report."""

    def __init__(self, report: "CheckReport"):
        bad = [h.name for h in report.hypotheses if h.status == VIOLATED]
        super().__init__(f"{report.theorem}: hypothesis violated ({', '.join(bad)})")
        self.report = report


class NonSimpleBoundary(CheckError):
    pass


class AsymmetricDomain(CheckError):
    pass


class NotCircularBoundary(CheckError):
    pass


class OpenMesh(CheckError):
    pass


@dataclass
class Hypothesis:
    name: str
    status: str
    measured: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "status": self.status, "measured": _clean(self.measured)}


@dataclass
class CheckReport:
    """Outcome of one check.

    ``conclusion`` is one of ``"holds"``, ``"fails"``, ``"vacuous"`` or
    ``"inconclusive"``; ``passed`` is true only for ``"holds"``.
    """

    theorem: str
    hypotheses: list[Hypothesis]
    measured: dict
    bound: float | None
    margin: float | None
    conclusion: str
    tolerances: dict

    @property
    def passed(self) -> bool:
        return self.conclusion == "holds"

    @property
    def vacuous(self) -> bool:
        return self.conclusion == "vacuous"

    def to_json(self) -> dict:
        return {
            "theorem": self.theorem,
            "hypotheses": [h.to_json() for h in self.hypotheses],
            "measured": _clean(self.measured),
            "bound": _finite(self.bound),
            "margin": _finite(self.margin),
            "conclusion": self.conclusion,
            "pass": self.passed,
            "tolerances": _clean(self.tolerances),
        }


def _finite(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise ValueError("non-finite value in a check report")
        return x
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_finite(v) for v in x]
    if isinstance(x, dict):
        return _clean(x)
    return x


def _clean(d: dict) -> dict:
    return {str(k): _finite(v) for k, v in d.items()}


def _report(theorem, hyps, measured, bound, margin, holds, tolerances, strict=False) -> CheckReport:
    if any(h.status == VIOLATED for h in hyps):
        rep = CheckReport(theorem, hyps, measured, bound, margin, "vacuous", tolerances)
        if strict:
            raise HypothesisViolated(rep)
        return rep
    return CheckReport(theorem, hyps, measured, bound, margin, "holds" if holds else "fails", tolerances)


def _status(ok: bool) -> str:
    return SATISFIED if ok else VIOLATED


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


# surface points ------------------------------------------------------------

def _surface_points(surface) -> tuple[np.ndarray, np.ndarray, float]:
    """``(all points, boundary points, spacing)`` of a graph solution or open mesh."""
    if isinstance(surface, GraphSolution):
        bp, bv = surface.boundary_trace()
        boundary = np.column_stack([bp, bv])
        inner = np.column_stack([surface.points, surface.u])
        return np.vstack([inner, boundary]), boundary, surface.spacing
    if isinstance(surface, TriMesh):
        V = surface.vertices
        E = surface.halfedges
        spacing = float(np.max(np.linalg.norm(V[E[:, 1]] - V[E[:, 0]], axis=1)))
        return V, V[surface.boundary_vertices], spacing
    raise TypeError("expected a GraphSolution or TriMesh")


def _plane_hypotheses(sol: GraphSolution, v: np.ndarray) -> list[Hypothesis]:
    vertical = abs(abs(float(v[2])) - 1.0) <= 1e-12
    return [Hypothesis("boundary lies in the plane orthogonal to v",
                       _status(sol.g.is_zero and vertical),
                       {"g_zero": sol.g.is_zero, "v": v.tolist()})]


# flux necessary condition ----------------------------------------------------

def check_flux_necessary(domain: PlanarDomain, f: PrescribedFunction, strict: bool = False) -> CheckReport:
    """``H_min <= L / (2 area)`` for a graph spanning the boundary of ``domain``.

    A failing conclusion certifies that no graph with this prescribed
    function spans the boundary curve.
    """
    if not isinstance(domain, PlanarDomain):
        raise NonSimpleBoundary("boundary must be a disc or simple polygon")
    L, A = domain.perimeter, domain.area
    hmin, hmax = curvature.extrema(f)
    bound = L / (2.0 * A)
    tol = 1e-12 * max(1.0, bound)
    holds = hmin <= bound + tol
    hyps = [Hypothesis("boundary is a simple closed planar curve", SATISFIED, {"kind": domain.kind})]
    measured = {"perimeter": L, "area": A, "H_min": hmin, "H_max": hmax,
                "nonexistence_certified": not holds}
    return _report("flux-necessary", hyps, measured, bound, bound - hmin, holds, {"equality": tol}, strict)


@dataclass(frozen=True)
class SweepRow:
    value: float
    converged: bool
    height: float
    area: float
    ratio: float

    def as_tuple(self):
        return (self.value, int(self.converged), self.height, self.area, self.ratio)


def solve_row(value: float, domain: PlanarDomain, f: PrescribedFunction, g: DirichletData,
              cfg: SolverConfig | None = None) -> SweepRow:
    """Attempt one solve and summarize it as a sweep row (NaN fields on failure)."""
    try:
        sol = solve_dirichlet(domain, g, f, cfg)
    except (NonConvergence, GradientBlowup):
        return SweepRow(float(value), False, math.nan, math.nan, math.nan)
    A = surface_area(sol)
    if not g.is_zero:
        return SweepRow(float(value), True, math.nan, A, math.nan)
    h = height(sol)[2]
    hmax = curvature.extrema(f)[1]
    ratio = h / (hmax * A / (2 * np.pi)) if hmax > 0 else math.nan
    return SweepRow(float(value), True, h, A, ratio)


def flux_threshold_sweep(domain: PlanarDomain, f: PrescribedFunction, factors: Sequence[float],
                         cfg: SolverConfig | None = None) -> tuple[list[SweepRow], float | None]:
    """Solve for ``c * H`` over increasing ``factors``.

    Returns the rows and the empirical threshold: the midpoint between the
    last converged factor and the first failing one (``None`` if no flip).
    """
    g = DirichletData.const(0.0)
    rows = [solve_row(c, domain, f.scaled(c), g, cfg) for c in sorted(factors)]
    return rows, empirical_threshold(rows)


def empirical_threshold(rows: Sequence[SweepRow]) -> float | None:
    rows = sorted(rows, key=lambda r: r.value)
    for a, b in zip(rows, rows[1:]):
        if a.converged and not b.converged:
            return 0.5 * (a.value + b.value)
    return None


# slab -------------------------------------------------------------------------

def check_slab(surface, v, f: PrescribedFunction, strict: bool = False) -> CheckReport:
    """Surface contained in the slab spanned by its boundary in direction ``v``."""
    v = _unit(v)
    hv, hmv = float(f(v)), float(f(-v))
    hyps = [Hypothesis("H(v) = H(-v) = 0", _status(abs(hv) <= ZERO_TOL and abs(hmv) <= ZERO_TOL),
                       {"H(v)": hv, "H(-v)": hmv})]
    pts, boundary, spacing = _surface_points(surface)
    if len(boundary) == 0:
        raise OpenMesh("slab check needs a surface with boundary")
    tol = 10.0 * spacing**2
    proj, bproj = pts @ v, boundary @ v
    mu1, mu2 = float(bproj.min()), float(bproj.max())
    margin = float(min(np.min(proj - (mu1 - tol)), np.min((mu2 + tol) - proj)))
    measured = {"mu1": mu1, "mu2": mu2, "min": float(proj.min()), "max": float(proj.max())}
    return _report("slab", hyps, measured, mu2 + tol, margin, margin >= 0, {"slab": tol}, strict)


# height estimate ----------------------------------------------------------

def check_height_area(sol: GraphSolution, f: PrescribedFunction | None = None,
                      strict: bool = False) -> CheckReport:
    """``h <= H_max area / (2 pi)`` for a graph with planar boundary and positive ``H``."""
    f = f or sol.f
    hmin, hmax = curvature.extrema(f)
    hyps = [Hypothesis("H > 0 on the sphere", _status(hmin > 0), {"H_min": hmin}),
            Hypothesis("boundary in a horizontal plane", _status(sol.g.is_zero), {"g": sol.g.text})]
    if not sol.g.is_zero:
        return _report("height-area", hyps, {"H_max": hmax}, None, None, False, {}, strict)
    h = height(sol)[2]
    A = surface_area(sol)
    bound = hmax * A / (2 * np.pi)
    limit = bound * (1.0 + RATIO_SLACK)
    measured = {"height": h, "area": A, "H_max": hmax, "ratio": h / bound if bound > 0 else 0.0}
    return _report("height-area", hyps, measured, bound, limit - h, h <= limit,
                   {"relative": RATIO_SLACK}, strict)


# one-sidedness ------------------------------------------------------------

def _interior_split(sol: GraphSolution):
    deep = ~sol.grid.boundary_layer
    return deep if np.any(deep) else np.ones(sol.grid.n, dtype=bool)


def check_one_side(sol: GraphSolution, f: PrescribedFunction | None = None, v=E3,
                   strict: bool = False) -> CheckReport:
    """Graph on one side of its boundary plane when ``H(v) H(-v) < 0``.

    The side is opposite to ``v`` when ``H(v) > 0`` and along ``v``
    otherwise; away from the boundary layer the sign must be strict.
    """
    f = f or sol.f
    v = _unit(v)
    hv, hmv = float(f(v)), float(f(-v))
    hyps = [Hypothesis("H(v) H(-v) < 0", _status(hv * hmv < 0), {"H(v)": hv, "H(-v)": hmv}),
            *_plane_hypotheses(sol, v)]
    tol = 10.0 * sol.spacing**2
    side = -np.sign(hv) if hv != 0 else 1.0
    signed = side * sol.u * v[2]
    deep = _interior_split(sol)
    worst = float(np.min(signed))
    deep_worst = float(np.min(signed[deep]))
    holds = worst >= -tol and deep_worst > 0
    measured = {"side": float(side), "min_signed_height": worst, "min_signed_height_deep": deep_worst,
                "max_u": float(sol.u.max()), "min_u": float(sol.u.min())}
    return _report("one-side", hyps, measured, 0.0, worst + tol, holds, {"plane": tol}, strict)


def check_lambda_one_side(sol: GraphSolution, w, lam: float, v=E3, strict: bool = False) -> CheckReport:
    """One-sidedness for ``H = <x, w> + lam`` when ``|<v, w>| >= lam``.

    ``sign(<v, w>) <p, v> <= 0`` must hold on the interior; an interior
    point touching the plane is only allowed in the equality case
    ``|<v, w>| = lam`` and then forces the graph to be planar.
    """
    w, v = _unit(w), _unit(v)
    vw = float(v @ w)
    hyps = [Hypothesis("0 <= lambda <= 1", _status(0.0 <= lam <= 1.0), {"lambda": lam}),
            Hypothesis("|<v, w>| >= lambda", _status(abs(vw) >= lam - 1e-12), {"<v,w>": vw}),
            *_plane_hypotheses(sol, v)]
    tol = 10.0 * sol.spacing**2
    s = np.sign(vw) if vw != 0 else 1.0
    signed = s * sol.u * v[2]
    deep = _interior_split(sol)
    touching = bool(np.any(np.abs(sol.u[deep]) <= tol))
    equality = abs(abs(vw) - lam) <= 1e-6
    planar = float(np.max(np.abs(sol.u))) <= tol
    holds = float(signed.max()) <= tol and (not touching or (equality and planar))
    measured = {"max_signed_height": float(signed.max()), "touching": touching,
                "equality_case": equality, "planar": planar}
    return _report("lambda-one-side", hyps, measured, 0.0, tol - float(signed.max()), holds,
                   {"plane": tol, "equality": 1e-6}, strict)


# symmetry -------------------------------------------------------------------

def _node_lookup(sol: GraphSolution, pts: np.ndarray) -> np.ndarray:
    """Values at points lying on grid nodes (NaN off the mask)."""
    grid = sol.grid
    i = np.rint((pts[:, 0] - grid.xs[0]) / grid.h).astype(int)
    j = np.rint((pts[:, 1] - grid.ys[0]) / grid.h).astype(int)
    V = sol.values_grid()
    ok = (i >= 0) & (i < V.shape[0]) & (j >= 0) & (j < V.shape[1])
    out = np.full(len(pts), np.nan)
    out[ok] = V[i[ok], j[ok]]
    return out


def check_reflection_symmetry(sol: GraphSolution, normal, offset: float = 0.0,
                              strict: bool = False) -> CheckReport:
    """Graph symmetric under reflection in the vertical plane ``<x, normal> = offset``."""
    n2 = np.asarray(normal, dtype=float)[:2]
    n2 = n2 / np.linalg.norm(n2)
    n3 = np.array([n2[0], n2[1], 0.0])
    if not sol.domain.is_symmetric(n2, offset):
        raise AsymmetricDomain("domain is not symmetric about the plane")
    f = sol.f
    if sol.domain.kind == "disc" or sol.domain.is_convex:
        split = Hypothesis("plane splits the boundary into two graphs", SATISFIED)
    else:
        split = Hypothesis("plane splits the boundary into two graphs", NOT_VERIFIED)
    g_sym = True
    if not sol.g.is_zero:
        bp = sol.domain.boundary_points(720)
        rb = bp - 2.0 * ((bp @ n2) - offset)[:, None] * n2
        g_sym = float(np.max(np.abs(sol.g(bp) - sol.g(rb)))) <= ZERO_TOL
    tol_one = 10.0 * sol.spacing**2
    one_sided = bool(np.all(sol.u <= tol_one) or np.all(sol.u >= -tol_one))
    hyps = [Hypothesis("embedded", SATISFIED, {"reason": "graph"}),
            split,
            Hypothesis("H respects the reflection", _status(curvature.respects_reflection(f, n3))),
            Hypothesis("boundary data symmetric", _status(g_sym)),
            Hypothesis("one-sided", SATISFIED if one_sided else NOT_VERIFIED)]
    pts = sol.points
    refl = pts - 2.0 * ((pts @ n2) - offset)[:, None] * n2
    h = sol.grid.h
    aligned = (np.any(np.abs(np.abs(n2) - 1.0) <= 1e-15)
               and abs(2.0 * offset / h - round(2.0 * offset / h)) <= 1e-9)
    other = _node_lookup(sol, refl) if aligned else sol.interpolate(refl)
    valid = np.isfinite(other)
    D = float(np.max(np.abs(sol.u[valid] - other[valid]))) if np.any(valid) else 0.0
    tol = 10.0 * sol.config.tol if aligned else 10.0 * h**2
    measured = {"deviation": D, "compared_points": int(valid.sum()), "grid_aligned": bool(aligned)}
    return _report("reflection-symmetry", hyps, measured, tol, tol - D, D <= tol,
                   {"deviation": tol}, strict)


def polar_rings(sol: GraphSolution, n_angles: int = 128) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(radii, points, values)`` of ``u`` resampled on rings about the disc center."""
    h = sol.spacing
    R = sol.domain.radius
    c = np.asarray(sol.domain.center)
    radii = h * np.arange(1, int(np.floor(R / h)))
    phi = 2 * np.pi * np.arange(n_angles) / n_angles
    pts = c + radii[:, None, None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)[None]
    vals = sol.interpolate(pts.reshape(-1, 2)).reshape(len(radii), n_angles)
    return radii, pts, vals


def check_rotational_symmetry(sol: GraphSolution, profile: Callable | None = None,
                              profile_tol: float = 1e-3, strict: bool = False) -> CheckReport:
    """Graph over a disc invariant under rotation about the vertical axis through its center.

    ``profile`` is an optional oracle ``u(r)``; when given the ring values
    must match it within ``profile_tol``.
    """
    if sol.domain.kind != "disc":
        raise NotCircularBoundary("rotational check needs a disc domain")
    bp = sol.domain.boundary_points(720)
    gvals = sol.g(bp)
    hyps = [Hypothesis("H rotational about the axis", _status(curvature.is_rotational_about(sol.f, E3))),
            Hypothesis("boundary data rotational", _status(float(np.ptp(gvals)) <= ZERO_TOL),
                       {"spread": float(np.ptp(gvals))})]
    radii, pts, vals = polar_rings(sol)
    spreads = [float(np.ptp(row[np.isfinite(row)])) for row in vals if np.sum(np.isfinite(row)) > 1]
    spread = max(spreads) if spreads else 0.0
    tol = 20.0 * sol.spacing**2
    measured = {"angular_spread": spread, "rings": len(spreads)}
    holds = spread <= tol
    tols = {"spread": tol}
    if profile is not None:
        ok = np.isfinite(vals)
        err = np.abs(vals - np.asarray(profile(radii))[:, None])[ok]
        perr = float(err.max()) if err.size else 0.0
        measured["profile_error"] = perr
        tols["profile"] = profile_tol
        holds = holds and perr <= profile_tol
    return _report("rotational-symmetry", hyps, measured, tol, tol - spread, holds, tols, strict)


# cylinder containment ------------------------------------------------------

def check_cylinder_containment(surface, domain: PlanarDomain, f: PrescribedFunction, v=E3,
                               strict: bool = False) -> CheckReport:
    """Surface projects (along ``v``) into the convex base domain, dilated by two grid spacings."""
    v = _unit(v)
    if abs(abs(float(v[2])) - 1.0) > 1e-12:
        raise ValueError("the base domain lies in the horizontal plane; v must be vertical")
    eq = np.array([[math.cos(a), math.sin(a), 0.0] for a in 2 * np.pi * np.arange(720) / 720])
    eq_max = float(np.max(np.abs(f(eq))))
    hyps = [Hypothesis("H vanishes on the equator orthogonal to v", _status(eq_max <= ZERO_TOL),
                       {"max_abs": eq_max}),
            Hypothesis("H odd", _status(curvature.is_odd(f))),
            Hypothesis("base domain convex", _status(domain.is_convex))]
    pts, _, spacing = _surface_points(surface)
    tol = 2.0 * spacing
    xy = pts[:, :2]
    outside = ~domain.contains(xy)
    excess = np.where(outside, domain.distance(xy), 0.0)
    worst = float(excess.max()) if len(excess) else 0.0
    measured = {"max_outside_distance": worst, "points": len(pts)}
    return _report("cylinder-containment", hyps, measured, tol, tol - worst, worst <= tol,
                   {"dilation": tol}, strict)


# closed surfaces -----------------------------------------------------------

def check_closed_obstruction(mesh: TriMesh, h0, lam: float = 0.0, v=E3, residual_tol: float = 1e-2,
                             strict: bool = False) -> CheckReport:
    """Certify that a closed mesh is not an ``(h0 + lam)``-surface.

    On a closed ``(h0 + lam)``-surface the flux ``I = int h0(N) <N, v>``
    vanishes.  Under the sign condition ``h0(x) <x, v> >= 0`` the check
    passes when ``I > residual_tol * area``, which excludes every mesh
    whose mean curvature residual stays below ``residual_tol``.
    """
    if not mesh.closed:
        raise OpenMesh("closed-obstruction check needs a closed mesh")
    v = _unit(v)
    fn = h0._value if isinstance(h0, PrescribedFunction) else h0
    N = mesh.face_normals
    h0N = np.asarray(fn(N), dtype=float)
    signs = h0N * (N @ v)
    hyps = [Hypothesis("mesh closed", SATISFIED),
            Hypothesis("h0(x) <x, v> >= 0", _status(float(signs.min()) >= -1e-12),
                       {"min": float(signs.min())})]
    I = flux_integral(mesh, fn, v)
    va = float(np.linalg.norm(vector_area(mesh)))
    _, sup = hsurface_residual(mesh, lambda x: np.asarray(fn(x), dtype=float) + lam)
    bound = residual_tol * mesh.area
    measured = {"flux": I, "vector_area": va, "area": mesh.area, "residual_sup": sup}
    tols = {"residual": residual_tol}
    if any(hh.status == VIOLATED for hh in hyps):
        return _report("closed-obstruction", hyps, measured, bound, I - bound, False, tols, strict)
    if float(np.max(np.abs(h0N))) == 0.0:
        return CheckReport("closed-obstruction", hyps, measured, bound, I - bound, "inconclusive", tols)
    return _report("closed-obstruction", hyps, measured, bound, I - bound, I > bound, tols, strict)


THEOREMS = ("flux-necessary", "slab", "height-area", "one-side", "lambda-one-side",
            "reflection-symmetry", "rotational-symmetry", "cylinder-containment", "closed-obstruction")

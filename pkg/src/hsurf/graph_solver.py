"""Finite-difference Newton solver for prescribed mean curvature graphs.

Solves ``div(Du / W) = 2 H((-Du, 1) / W)`` with ``W = sqrt(1 + |Du|^2)``
and Dirichlet data on a masked Cartesian grid.  The divergence is the
conservative flux difference of half-node gradients; arms that cross the
boundary end at the exact intersection point (Shortley-Weller).

Every discrete derivative is an affine map ``u -> A u + b`` stored as a
sparse matrix and an offset, so the Newton Jacobian is assembled exactly
from the chain rule.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .curvature import PrescribedFunction, graph_normal
from .domain import DIRECTIONS, DirichletData, Grid, PlanarDomain

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps
BLOWUP = 1e6


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    """Continuation could not reach ``t = 1``.

    ``last_t`` is the largest continuation parameter with a converged
    solution; ``history`` holds the residual norms of the failed attempts.
    """

    def __init__(self, last_t: float, history: list, message: str = ""):
        self.last_t = last_t
        self.history = history
        super().__init__(message or f"Newton continuation stalled at t = {last_t:.6g}")


class GradientBlowup(SolverError):
    def __init__(self, max_gradient: float):
        self.max_gradient = max_gradient
        super().__init__(f"max |Du| = {max_gradient:.3g} exceeds {BLOWUP:.0e}")


class BoundaryNotPlanar(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 50
    steps: int = 10
    armijo: float = 1e-4
    min_step: float = 2.0**-20
    min_dt: float = 1.0 / 160

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.steps < 1 or self.max_iter < 1:
            raise ValueError("steps and max_iter must be >= 1")


class Affine(NamedTuple):
    A: sparse.csr_matrix
    b: np.ndarray

    def __call__(self, u):
        return self.A @ u + self.b


class StepRecord(NamedTuple):
    t: float
    iterations: int
    residual: float
    converged: bool


@dataclass
class ConvergenceRecord:
    iterations: int = 0
    residual: float = np.nan
    rounding_floor: float = 0.0
    path: list[StepRecord] = field(default_factory=list)


class Discretization:
    """Sparse affine maps of one grid and one set of boundary values."""

    def __init__(self, grid: Grid, g: DirichletData):
        self.grid = grid
        n = grid.n
        rows = np.arange(n)
        eye = sparse.identity(n, format="csr")
        self.bvalues = []
        self.nbr_val = []
        for d in range(4):
            nid = grid.nbr[d]
            inner = nid >= 0
            S = sparse.csr_matrix((np.ones(inner.sum()), (rows[inner], nid[inner])), shape=(n, n))
            b = np.zeros(n)
            bv = np.full(n, np.nan)
            if np.any(~inner):
                bv[~inner] = g(grid.bpoint[d][~inner])
                b[~inner] = bv[~inner]
            self.bvalues.append(bv)
            self.nbr_val.append(Affine(S, b))

        # node derivatives, second order on nonuniform arms
        self.node_grad = []
        for axis in (0, 1):
            dp, dm = 2 * axis, 2 * axis + 1
            hp, hm = grid.arm[dp], grid.arm[dm]
            cp = hm / (hp * (hp + hm))
            cm = -hp / (hm * (hp + hm))
            c0 = (hp - hm) / (hp * hm)
            Vp, Vm = self.nbr_val[dp], self.nbr_val[dm]
            A = Vp.A.multiply(cp[:, None]) + Vm.A.multiply(cm[:, None]) + sparse.diags(c0)
            self.node_grad.append(Affine(A.tocsr(), cp * Vp.b + cm * Vm.b))

        # face gradients: normal and transverse component per direction
        self.face_normal, self.face_trans, self.coef = [], [], []
        for d, (axis, sign) in enumerate(DIRECTIONS):
            arm = grid.arm[d]
            V = self.nbr_val[d]
            An = (V.A - eye).multiply((sign / arm)[:, None]).tocsr()
            self.face_normal.append(Affine(An, sign * V.b / arm))
            T = self.node_grad[1 - axis]
            inner = (grid.nbr[d] >= 0).astype(float)
            w = np.where(inner > 0, 0.5, 1.0)
            At = (T.A.multiply(w[:, None]) + 0.5 * (V.A @ T.A)).tocsr()
            bt = w * T.b + 0.5 * (V.A @ T.b)
            self.face_trans.append(Affine(At, bt))
            opp = d + 1 if sign > 0 else d - 1
            self.coef.append(sign * 2.0 / (arm + grid.arm[opp]))

    def laplacian(self) -> Affine:
        A = sum(self.face_normal[d].A.multiply(self.coef[d][:, None]) for d in range(4))
        b = sum(self.coef[d] * self.face_normal[d].b for d in range(4))
        return Affine(sparse.csr_matrix(A), b)

    def gradients(self, u):
        return np.column_stack([self.node_grad[0](u), self.node_grad[1](u)])

    def max_face_gradient(self, u) -> float:
        return max(float(np.max(np.hypot(self.face_normal[d](u), self.face_trans[d](u)))) for d in range(4))

    def residual(self, u, f: PrescribedFunction, t: float = 1.0) -> np.ndarray:
        out = np.zeros_like(u)
        for d in range(4):
            a = self.face_normal[d](u)
            b = self.face_trans[d](u)
            out += self.coef[d] * a / np.sqrt(1.0 + a * a + b * b)
        if t != 0.0:
            out -= 2.0 * t * f._value(graph_normal(self.gradients(u)))
        return out

    def rounding_scale(self, u) -> np.ndarray:
        """Per-row magnitude of the cancelling terms in :meth:`residual`."""
        s = np.zeros_like(u)
        for d in range(4):
            V = self.nbr_val[d]
            s += np.abs(self.coef[d]) * np.maximum(np.abs(u), np.abs(V(u))) / self.grid.arm[d]
        return s

    def jacobian(self, u, f: PrescribedFunction, t: float = 1.0) -> sparse.csc_matrix:
        J = None
        for d in range(4):
            a = self.face_normal[d](u)
            b = self.face_trans[d](u)
            w3 = (1.0 + a * a + b * b) ** 1.5
            da = self.coef[d] * (1.0 + b * b) / w3
            db = -self.coef[d] * a * b / w3
            term = self.face_normal[d].A.multiply(da[:, None]) + self.face_trans[d].A.multiply(db[:, None])
            J = term if J is None else J + term
        if t != 0.0:
            p = self.gradients(u)
            normal = graph_normal(p)
            grad = f._gradient(normal)
            grad = grad - np.sum(grad * normal, axis=1)[:, None] * normal
            w = np.sqrt(1.0 + np.sum(p * p, axis=1))
            for k in (0, 1):
                dk = -grad[:, k] / w
                J = J - self.node_grad[k].A.multiply((2.0 * t * dk)[:, None])
        return sparse.csc_matrix(J)


@dataclass
class GraphSolution:
    """Discrete solution on the interior nodes plus its boundary trace."""

    domain: PlanarDomain
    grid: Grid
    f: PrescribedFunction
    g: DirichletData
    u: np.ndarray
    config: SolverConfig
    record: ConvergenceRecord
    disc: Discretization = field(repr=False, default=None)

    @property
    def spacing(self) -> float:
        return self.domain.spacing

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    def boundary_trace(self) -> tuple[np.ndarray, np.ndarray]:
        """Boundary interpolation points and the data values there."""
        pts = self.grid.boundary_trace_points()
        return pts, self.g(pts)

    def values_grid(self) -> np.ndarray:
        """Full grid array of ``u`` with NaN at non-interior nodes."""
        out = np.full(self.grid.mask.shape, np.nan)
        out[self.grid.mask] = self.u
        return out

    def gradients(self) -> np.ndarray:
        return self.disc.gradients(self.u)

    def normals(self) -> np.ndarray:
        return graph_normal(self.gradients())

    def residual(self) -> np.ndarray:
        return self.disc.residual(self.u, self.f)

    def interpolate(self, pts) -> np.ndarray:
        """Bilinear interpolation; NaN where a cell corner is not interior."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        grid = self.grid
        h = grid.h
        V = self.values_grid()
        fx = (pts[:, 0] - grid.xs[0]) / h
        fy = (pts[:, 1] - grid.ys[0]) / h
        i = np.clip(np.floor(fx).astype(int), 0, len(grid.xs) - 2)
        j = np.clip(np.floor(fy).astype(int), 0, len(grid.ys) - 2)
        sx, sy = fx - i, fy - j
        return ((1 - sx) * (1 - sy) * V[i, j] + sx * (1 - sy) * V[i + 1, j]
                + (1 - sx) * sy * V[i, j + 1] + sx * sy * V[i + 1, j + 1])

    def with_values(self, u) -> "GraphSolution":
        """Copy carrying different node values (used to probe the checks)."""
        return GraphSolution(self.domain, self.grid, self.f, self.g, np.asarray(u, float).copy(),
                             self.config, self.record, self.disc)


def residual(u, domain: PlanarDomain, f: PrescribedFunction, g: DirichletData | None = None) -> np.ndarray:
    """Discrete residual at the interior nodes of ``domain.grid``."""
    g = g if g is not None else DirichletData.const(0.0)
    return Discretization(domain.grid, g).residual(np.asarray(u, dtype=float), f)


def _newton(disc: Discretization, u0, f, t, cfg: SolverConfig):
    u = u0.copy()
    R = disc.residual(u, f, t)
    history = []
    for it in range(cfg.max_iter + 1):
        floor = 8.0 * EPS * disc.rounding_scale(u)
        res = float(np.max(np.abs(R)))
        history.append(res)
        if np.max(np.abs(R) - floor) <= cfg.tol:
            return True, u, it, res, float(np.max(floor)), history
        if it == cfg.max_iter:
            break
        J = disc.jacobian(u, f, t)
        try:
            delta = splu(J).solve(-R)
        except RuntimeError:
            return False, u, it, res, 0.0, history
        if not np.all(np.isfinite(delta)):
            return False, u, it, res, 0.0, history
        norm0 = np.linalg.norm(R)
        alpha = 1.0
        while True:
            trial = u + alpha * delta
            Rt = disc.residual(trial, f, t)
            if np.all(np.isfinite(Rt)) and np.linalg.norm(Rt) <= (1.0 - cfg.armijo * alpha) * norm0:
                break
            alpha *= 0.5
            if alpha < cfg.min_step:
                return False, u, it, res, 0.0, history
        u, R = trial, Rt
        if disc.max_face_gradient(u) > BLOWUP:
            return False, u, it + 1, float(np.max(np.abs(R))), 0.0, history
    return False, u, cfg.max_iter, float(np.max(np.abs(R))), 0.0, history


def harmonic_extension(disc: Discretization) -> np.ndarray:
    L = disc.laplacian()
    return splu(sparse.csc_matrix(L.A)).solve(-L.b)


def solve_dirichlet(domain: PlanarDomain, g: DirichletData | float, f: PrescribedFunction,
                    cfg: SolverConfig | None = None, initial=None) -> GraphSolution:
    """Solve the Dirichlet problem by continuation in ``t * H`` and damped Newton.

    Raises :class:`NonConvergence` when the continuation step falls below
    ``cfg.min_dt`` and :class:`GradientBlowup` when the converged solution
    is (numerically) vertical at the boundary.
    """
    cfg = cfg or SolverConfig()
    if not isinstance(g, DirichletData):
        g = DirichletData.const(float(g))
    grid = domain.grid
    disc = Discretization(grid, g)
    u = harmonic_extension(disc) if initial is None else np.asarray(initial, dtype=float).copy()
    record = ConvergenceRecord()
    t, dt, full = 0.0, 1.0 / cfg.steps, 1.0 / cfg.steps
    failures = []
    while t < 1.0:
        t_try = min(1.0, t + dt)
        ok, u_new, iters, res, floor, hist = _newton(disc, u, f, t_try, cfg)
        record.iterations += iters
        record.path.append(StepRecord(t_try, iters, res, ok))
        logger.debug("t=%.6f iterations=%d residual=%.3e converged=%s", t_try, iters, res, ok)
        if ok:
            t, u = t_try, u_new
            record.residual, record.rounding_floor = res, floor
            dt = min(2.0 * dt, full) if dt < full else dt
            continue
        failures.append({"t": t_try, "residuals": hist})
        dt *= 0.5
        if dt < cfg.min_dt * (1.0 - 1e-12):
            raise NonConvergence(t, failures)
    gmax = disc.max_face_gradient(u)
    if gmax > BLOWUP:
        raise GradientBlowup(gmax)
    logger.info("converged: %d Newton iterations, residual %.3e", record.iterations, record.residual)
    return GraphSolution(domain, grid, f, g, u, cfg, record, disc)


def height(sol: GraphSolution) -> tuple[float, float, float]:
    """``(min u, max u, max |u|)`` over interior nodes; requires ``g == 0``."""
    if not sol.g.is_zero:
        raise BoundaryNotPlanar("height is measured from the boundary plane; g must vanish")
    return float(sol.u.min()), float(sol.u.max()), float(np.max(np.abs(sol.u)))


def _cut_cells(sol: GraphSolution):
    """Yield ``(i, j, corner_ids)`` for every cell touching the mask."""
    mask = sol.grid.mask
    ids = sol.grid.ids
    nx, ny = mask.shape
    c = np.stack([ids[:-1, :-1], ids[1:, :-1], ids[1:, 1:], ids[:-1, 1:]], axis=-1)
    return c


def surface_area(sol: GraphSolution) -> float:
    """Area of the graph by cellwise midpoint quadrature of ``sqrt(1 + |Du|^2)``.

    Cells with four interior corners use the central cell gradient; cells
    cut by the boundary are weighted by the covered fraction (exact
    polygon clipping) and use a least-squares plane through the corner
    values and the boundary data on the cell edges.
    """
    import shapely

    grid, h = sol.grid, sol.grid.h
    V = sol.values_grid()
    corners = _cut_cells(sol)
    full = np.all(corners >= 0, axis=-1)
    ux = (V[1:, :-1] + V[1:, 1:] - V[:-1, :-1] - V[:-1, 1:]) / (2 * h)
    uy = (V[:-1, 1:] + V[1:, 1:] - V[:-1, :-1] - V[1:, :-1]) / (2 * h)
    total = float(np.sum(np.sqrt(1.0 + ux[full] ** 2 + uy[full] ** 2))) * h * h

    # candidate cut cells: any cell within one cell of the boundary curve
    xmin, xmax, ymin, ymax = sol.domain.bounds
    xs, ys = grid.xs, grid.ys
    ci, cj = np.nonzero(~full)
    x0, y0 = xs[ci], ys[cj]
    keep = (x0 + h > xmin) & (x0 < xmax) & (y0 + h > ymin) & (y0 < ymax)
    ci, cj, x0, y0 = ci[keep], cj[keep], x0[keep], y0[keep]
    boxes = shapely.box(x0, y0, x0 + h, y0 + h)
    covered = shapely.area(shapely.intersection(boxes, sol.domain.as_shapely()))
    sel = covered > 0
    ci, cj, covered = ci[sel], cj[sel], covered[sel]

    node_grad = sol.gradients()
    bpts = {d: (sol.grid.bpoint[d], sol.disc.bvalues[d]) for d in range(4)}
    for i, j, area in zip(ci, cj, covered):
        pts, vals = _cell_samples(sol, i, j, V, bpts)
        grad = None
        if len(pts) >= 3:
            if np.linalg.matrix_rank(pts - pts.mean(axis=0), tol=1e-9 * h) == 2:
                A = np.column_stack([np.ones(len(pts)), pts])
                grad = np.linalg.lstsq(A, vals, rcond=None)[0][1:]
        if grad is None:
            centre = np.array([xs[i] + h / 2, ys[j] + h / 2])
            k = int(np.argmin(np.linalg.norm(grid.points - centre, axis=1)))
            grad = node_grad[k]
        total += float(area) * float(np.sqrt(1.0 + grad @ grad))
    return total


# corner k of cell (i, j) and the arm directions running along the cell edges from it
_CORNER_OFFSETS = ((0, 0), (1, 0), (1, 1), (0, 1))
_CORNER_ARMS = ((0, 2), (1, 2), (1, 3), (0, 3))  # (E/W, N/S) per corner


def _cell_samples(sol, i, j, V, bpts):
    grid = sol.grid
    pts, vals = [], []
    for (di, dj), arms in zip(_CORNER_OFFSETS, _CORNER_ARMS):
        k = grid.ids[i + di, j + dj]
        if k < 0:
            continue
        pts.append(grid.points[k])
        vals.append(V[i + di, j + dj])
        for d in arms:
            if grid.nbr[d][k] < 0 and grid.arm[d][k] <= grid.h * (1 + 1e-12):
                pts.append(bpts[d][0][k])
                vals.append(bpts[d][1][k])
    return np.asarray(pts).reshape(-1, 2), np.asarray(vals)

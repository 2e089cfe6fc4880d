"""Command-line front end.

Subcommands ``solve-graph``, ``solve-rotational``, ``sweep``,
``mesh-analyze`` and ``check`` read a TOML run configuration and write
their artifacts atomically into the output directory.

Exit codes: 0 success, 1 configuration or input error, 2 solver
non-convergence, 3 a requested check did not pass.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import re
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import checks, curvature, rotational
from .checks import CheckError, CheckReport
from .curvature import PrescribedFunction
from .domain import DirichletData, InvalidDomain, PlanarDomain
from .expr import ExpressionError
from .graph_solver import (ConvergenceRecord, Discretization, GradientBlowup, GraphSolution,
                           NonConvergence, SolverConfig, solve_dirichlet)
from .meshgeom import MeshError, TriMesh, flux_integral, graph_to_mesh, hsurface_residual, vector_area

logger = logging.getLogger("hsurf")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
SWEEP_PARAMETERS = ("h0", "lambda", "scale", "radius")
SWEEP_HEADER = ("value", "converged", "height", "area", "ratio")


class ConfigError(ValueError):
    """Invalid run configuration; ``line``/``column`` point into the file when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


# configuration ----------------------------------------------------------------

@dataclass
class RunConfig:
    text: str
    raw: dict
    function: PrescribedFunction | None = None
    domain: PlanarDomain | None = None
    boundary: DirichletData = field(default_factory=lambda: DirichletData.const(0.0))
    solver: SolverConfig = field(default_factory=SolverConfig)
    checks: list[str] = field(default_factory=list)
    check_params: dict = field(default_factory=dict)
    output: Path = Path("hsurf-out")

    def section(self, name: str) -> dict:
        sec = self.raw.get(name, {})
        if not isinstance(sec, dict):
            raise self.error(f"[{name}] must be a table", name)
        return sec

    def error(self, message: str, section: str, key: str | None = None, offset: int | None = None) -> ConfigError:
        line, col = locate(self.text, section, key)
        if offset is not None and col is not None:
            col += offset
        return ConfigError(message, line, col)


def locate(text: str, section: str, key: str | None) -> tuple[int | None, int | None]:
    """Line and column (1-based) of ``key = ...`` inside ``[section]``, or of the header."""
    current = None
    header = None
    for n, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"\[\s*([^\]]+?)\s*\]", stripped)
        if m and not stripped.startswith("[["):
            current = m.group(1)
            if current == section:
                header = (n, line.index("[") + 1)
            continue
        if current == section and key is not None:
            m = re.match(r"\s*" + re.escape(key) + r"\s*=\s*", line)
            if m:
                value = line[m.end():]
                skip = 1 if value[:1] in "\"'" else 0
                return n, m.end() + 1 + skip
    return header if header else (None, None)


def _vector(value, n: int, cfg: RunConfig, section: str, key: str) -> tuple[float, ...]:
    try:
        vec = tuple(float(x) for x in value)
    except (TypeError, ValueError):
        raise cfg.error(f"{key} must be a list of {n} numbers", section, key) from None
    if len(vec) != n or not all(math.isfinite(x) for x in vec):
        raise cfg.error(f"{key} must be a list of {n} finite numbers", section, key)
    if n == 3 and np.linalg.norm(vec) == 0:
        raise cfg.error(f"{key} must be nonzero", section, key)
    return vec


def _build_function(cfg: RunConfig, sec: dict) -> PrescribedFunction:
    try:
        return curvature.from_config(sec)
    except ExpressionError as exc:
        key = "profile" if sec.get("kind") == "rotational" else "expr"
        raise cfg.error(str(exc), "function", key, exc.col) from None
    except (ValueError, TypeError, KeyError) as exc:
        raise cfg.error(f"invalid prescribed function: {exc}", "function", "kind") from None


def _build_domain(cfg: RunConfig, sec: dict) -> PlanarDomain:
    shape = sec.get("shape", "disc")
    if "spacing" not in sec:
        raise cfg.error("domain needs 'spacing'", "domain")
    try:
        spacing = float(sec["spacing"])
    except (TypeError, ValueError):
        raise cfg.error("spacing must be a number", "domain", "spacing") from None
    if not spacing > 0:
        raise cfg.error("spacing must be positive", "domain", "spacing")
    try:
        if shape == "disc":
            center = _vector(sec.get("center", (0.0, 0.0)), 2, cfg, "domain", "center")
            return PlanarDomain.disc(float(sec.get("radius", 1.0)), spacing, center)
        if shape == "polygon":
            if "vertices" not in sec:
                raise cfg.error("polygon domain needs 'vertices'", "domain")
            return PlanarDomain.polygon(sec["vertices"], spacing)
    except InvalidDomain as exc:
        raise cfg.error(str(exc), "domain", "shape") from None
    except (TypeError, ValueError) as exc:
        raise cfg.error(f"invalid domain: {exc}", "domain", "shape") from None
    raise cfg.error(f"unknown domain shape {shape!r}", "domain", "shape")


def load_config(path, text: str | None = None) -> RunConfig:
    """Parse and validate a run configuration file."""
    if text is None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        msg = re.sub(r"\s*\(at line \d+, column \d+\)", "", str(exc))
        raise ConfigError(msg, *(map(int, m.groups()) if m else (None, None))) from None
    cfg = RunConfig(text, raw)
    if "function" in raw:
        cfg.function = _build_function(cfg, cfg.section("function"))
    if "domain" in raw:
        cfg.domain = _build_domain(cfg, cfg.section("domain"))
    bsec = cfg.section("boundary")
    if "g" in bsec:
        try:
            cfg.boundary = DirichletData.from_text(str(bsec["g"]))
        except ExpressionError as exc:
            raise cfg.error(str(exc), "boundary", "g", exc.col) from None
    ssec = cfg.section("solver")
    known = {"tol", "max_iter", "steps", "armijo", "min_step", "min_dt"}
    unknown = set(ssec) - known
    if unknown:
        raise cfg.error(f"unknown solver keys {sorted(unknown)}", "solver", sorted(unknown)[0])
    try:
        cfg.solver = SolverConfig(**ssec)
    except (TypeError, ValueError) as exc:
        raise cfg.error(f"invalid solver parameters: {exc}", "solver") from None
    csec = dict(cfg.section("checks"))
    run = csec.pop("run", [])
    if isinstance(run, str):
        run = [run]
    for name in run:
        if name not in checks.THEOREMS:
            raise cfg.error(f"unknown check {name!r}; known: {', '.join(checks.THEOREMS)}", "checks", "run")
    cfg.checks = list(run)
    cfg.check_params = csec
    out = cfg.section("output").get("dir")
    if out is not None:
        cfg.output = Path(out)
    return cfg


def _require(cfg: RunConfig, *names: str):
    for name in names:
        if getattr(cfg, name) is None:
            raise ConfigError(f"config needs a [{name}] section")


# output ---------------------------------------------------------------------

def atomic_write(path: Path, data: str) -> None:
    """Write via a temporary file in the same directory and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else "%.17g" % x


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def reports_text(status: dict, reports: list[CheckReport], errors: list[str] | None = None) -> str:
    doc = {"status": checks._clean(status), "reports": [r.to_json() for r in reports]}
    if errors:
        doc["errors"] = errors
    return json.dumps(doc, indent=2) + "\n"


def _prepare_output(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from None
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
    return path


def convergence_text(record: ConvergenceRecord, failure: NonConvergence | None = None) -> str:
    lines = [f"step t={_fmt(s.t)} iterations={s.iterations} residual={s.residual:.6e} converged={int(s.converged)}"
             for s in record.path]
    if failure is not None:
        lines.append(f"nonconvergence last_t={_fmt(failure.last_t)}")
    else:
        lines.append(f"converged iterations={record.iterations} residual={record.residual:.6e} "
                     f"rounding_floor={record.rounding_floor:.6e}")
    return "\n".join(lines) + "\n"


def solution_rows(sol: GraphSolution):
    """Interior nodes (``inside = 1``) followed by boundary trace points (``inside = 0``)."""
    for p, u in zip(sol.points, sol.u):
        yield (p[0], p[1], u, 1)
    bp, bv = sol.boundary_trace()
    for p, u in zip(bp, bv):
        yield (p[0], p[1], u, 0)


# checks -----------------------------------------------------------------------

def _param_vec(cfg: RunConfig, key: str, default, n: int = 3):
    if key in cfg.check_params:
        return np.asarray(_vector(cfg.check_params[key], n, cfg, "checks", key))
    return np.asarray(default, dtype=float)


def _translator_params(cfg: RunConfig, f: PrescribedFunction):
    if isinstance(f, curvature.LambdaTranslator):
        w, lam = np.asarray(f.w), f.lam
    else:
        w, lam = np.array([0.0, 0.0, 1.0]), 0.0
    w = _param_vec(cfg, "w", w)
    return w, float(cfg.check_params.get("lambda", lam))


def _profile_oracle(f: PrescribedFunction, sol: GraphSolution):
    """Revolved ODE profile as a function ``u(r)`` with zero boundary value."""
    h, _ = curvature.axial_profile(f, (0.0, 0.0, 1.0))
    R = sol.domain.radius
    curve = rotational.integrate_from_axis(h, 1, target_radius=R)
    if curve.termination != "target_radius":
        return None
    z = curve.as_graph()
    zR = float(z(R))
    return lambda r: z(r) - zR


def run_graph_checks(cfg: RunConfig, sol: GraphSolution, names) -> list[CheckReport]:
    f, v = sol.f, _param_vec(cfg, "v", checks.E3)
    out = []
    for name in names:
        if name == "flux-necessary":
            out.append(checks.check_flux_necessary(sol.domain, f))
        elif name == "slab":
            out.append(checks.check_slab(sol, v, f))
        elif name == "height-area":
            out.append(checks.check_height_area(sol, f))
        elif name == "one-side":
            out.append(checks.check_one_side(sol, f, v))
        elif name == "lambda-one-side":
            w, lam = _translator_params(cfg, f)
            out.append(checks.check_lambda_one_side(sol, w, lam, v))
        elif name == "reflection-symmetry":
            normal = _param_vec(cfg, "normal", (1.0, 0.0), 2)
            out.append(checks.check_reflection_symmetry(sol, normal, float(cfg.check_params.get("offset", 0.0))))
        elif name == "rotational-symmetry":
            oracle = None
            if cfg.check_params.get("profile_oracle", False) and curvature.is_rotational_about(f, checks.E3):
                oracle = _profile_oracle(f, sol)
            out.append(checks.check_rotational_symmetry(sol, oracle, float(cfg.check_params.get("profile_tol", 1e-3))))
        elif name == "cylinder-containment":
            out.append(checks.check_cylinder_containment(sol, sol.domain, f, v))
        elif name == "closed-obstruction":
            raise checks.OpenMesh("closed-obstruction applies to closed meshes, not graphs")
    return out


def run_mesh_checks(cfg: RunConfig, mesh: TriMesh, f: PrescribedFunction, domain: PlanarDomain | None,
                    names) -> list[CheckReport]:
    v = _param_vec(cfg, "v", checks.E3)
    out = []
    for name in names:
        if name == "slab":
            out.append(checks.check_slab(mesh, v, f))
        elif name == "cylinder-containment":
            if domain is None:
                raise ConfigError("cylinder-containment needs a [domain] section")
            out.append(checks.check_cylinder_containment(mesh, domain, f, v))
        elif name == "closed-obstruction":
            out.append(checks.check_closed_obstruction(
                mesh, f, float(cfg.check_params.get("lambda", 0.0)), v,
                float(cfg.check_params.get("residual_tol", 1e-2))))
        else:
            raise ConfigError(f"check {name!r} is not available for meshes")
    return out


def _exit_for(reports: list[CheckReport]) -> int:
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


# subcommands ------------------------------------------------------------------

def cmd_solve_graph(cfg: RunConfig, out: Path, args) -> int:
    _require(cfg, "function", "domain")
    try:
        sol = solve_dirichlet(cfg.domain, cfg.boundary, cfg.function, cfg.solver)
    except NonConvergence as exc:
        logger.error("solver did not converge (last accepted t = %s)", exc.last_t)
        atomic_write(out / "convergence.log", _failure_log(exc))
        rep = checks.check_flux_necessary(cfg.domain, cfg.function)
        atomic_write(out / "reports.json", reports_text({"converged": False, "last_t": exc.last_t}, [rep]))
        return EXIT_SOLVER
    except GradientBlowup as exc:
        logger.error("%s", exc)
        atomic_write(out / "convergence.log", f"gradient blowup max_gradient={exc.max_gradient:.6e}\n")
        atomic_write(out / "reports.json", reports_text({"converged": False, "blowup": True}, []))
        return EXIT_SOLVER
    atomic_write(out / "solution.csv", csv_text(("x1", "x2", "u", "inside"), solution_rows(sol)))
    atomic_write(out / "mesh.obj", graph_to_mesh(sol).obj_text())
    atomic_write(out / "convergence.log", convergence_text(sol.record))
    status = {"converged": True, "iterations": sol.record.iterations, "residual": sol.record.residual,
              "nodes": int(sol.grid.n), "spacing": sol.spacing}
    return _graph_reports(cfg, sol, out, status)


def _failure_log(exc: NonConvergence) -> str:
    lines = []
    for item in exc.history:
        res = item.get("residuals", [])
        last = res[-1] if res else float("nan")
        lines.append(f"failed t={_fmt(item['t'])} iterations={max(len(res) - 1, 0)} residual={last:.6e}")
    lines.append(f"nonconvergence last_t={_fmt(exc.last_t)}")
    return "\n".join(lines) + "\n"


def _graph_reports(cfg: RunConfig, sol: GraphSolution, out: Path, status: dict) -> int:
    reports: list[CheckReport] = []
    try:
        reports = run_graph_checks(cfg, sol, cfg.checks)
    except CheckError as exc:
        atomic_write(out / "reports.json", reports_text(status, reports, [str(exc)]))
        logger.error("%s", exc)
        return EXIT_CONFIG
    atomic_write(out / "reports.json", reports_text(status, reports))
    for r in reports:
        logger.info("%s: %s", r.theorem, r.conclusion)
    return _exit_for(reports)


def _rotational_setup(cfg: RunConfig):
    _require(cfg, "function")
    sec = cfg.section("rotational")
    axis = _vector(sec.get("axis", (0.0, 0.0, 1.0)), 3, cfg, "rotational", "axis")
    if not curvature.is_rotational_about(cfg.function, axis):
        raise cfg.error("prescribed function is not rotational about the configured axis", "function", "kind")
    sigma = int(sec.get("sigma", 1))
    if sigma not in (1, -1):
        raise cfg.error("sigma must be +1 or -1", "rotational", "sigma")
    target = sec.get("target_radius")
    if target is None and cfg.domain is not None and cfg.domain.kind == "disc":
        target = cfg.domain.radius
    max_len = sec.get("max_arc_length")
    if target is None and max_len is None:
        raise cfg.error("give target_radius or max_arc_length", "rotational")
    return axis, sigma, target, max_len, sec


def cmd_solve_rotational(cfg: RunConfig, out: Path, args) -> int:
    axis, sigma, target, max_len, sec = _rotational_setup(cfg)
    h, _ = curvature.axial_profile(cfg.function, axis)
    tol = rotational.LOCAL_TOL if args.tol is None else args.tol
    try:
        curve = rotational.integrate_from_axis(h, sigma, target, max_len, tol=tol)
    except rotational.StiffnessFailure as exc:
        logger.error("%s", exc)
        atomic_write(out / "reports.json", reports_text({"termination": "stiffness"}, [], [str(exc)]))
        return EXIT_SOLVER
    if curve.termination == "vertical":
        logger.info("profile reached a vertical point at s = %.6g", curve.s[-1])
    if sec.get("closed", False):
        try:
            curve = rotational.mirror_closed(curve)
        except rotational.DegenerateCurve as exc:
            raise cfg.error(str(exc), "rotational", "closed") from None
    atomic_write(out / "profile.csv", csv_text(("s", "r", "z", "theta"), curve.to_csv_rows()))
    mesh = rotational.revolve(curve, int(sec.get("n_angular", 128)))
    mesh_local = mesh
    if not np.allclose(axis, (0.0, 0.0, 1.0)):
        mesh = TriMesh(mesh.vertices @ _frame(np.asarray(axis)).T, mesh.faces)
    atomic_write(out / "mesh.obj", mesh.obj_text())
    try:
        _, sup = hsurface_residual(mesh, cfg.function)
    except MeshError:
        sup = math.nan
    status = {"termination": curve.termination, "arc_length": curve.arc_length,
              "end_r": curve.r[-1], "end_z": curve.z[-1], "end_theta": curve.theta[-1], "sigma": sigma}
    if math.isfinite(sup):
        status["mesh_residual_sup"] = sup
    reports: list[CheckReport] = []
    try:
        reports = run_mesh_checks(cfg, mesh_local, cfg.function, cfg.domain, cfg.checks)
    except (CheckError, ConfigError) as exc:
        atomic_write(out / "reports.json", reports_text(status, reports, [str(exc)]))
        logger.error("%s", exc)
        return EXIT_CONFIG
    atomic_write(out / "reports.json", reports_text(status, reports))
    return _exit_for(reports)


def _frame(axis: np.ndarray) -> np.ndarray:
    """Rotation taking ``e3`` to ``axis``."""
    a = axis / np.linalg.norm(axis)
    t1, t2 = curvature.tangent_frame(a[None, :])
    return np.column_stack([t1[0], t2[0], a])


def _sweep_range(cfg: RunConfig):
    sec = cfg.section("sweep")
    if not sec:
        raise ConfigError("config needs a [sweep] section")
    name = sec.get("parameter", "scale")
    if name not in SWEEP_PARAMETERS:
        raise cfg.error(f"sweep parameter must be one of {SWEEP_PARAMETERS}", "sweep", "parameter")
    try:
        start, stop, steps = float(sec["start"]), float(sec["stop"]), int(sec["steps"])
    except (KeyError, TypeError, ValueError):
        raise cfg.error("sweep needs numeric start, stop and integer steps", "sweep") from None
    if steps < 1 or stop < start or (steps == 1 and stop != start):
        raise cfg.error("empty sweep range", "sweep", "steps")
    return name, np.linspace(start, stop, steps)


def sweep_row(raw: dict, parameter: str, value: float, solver: SolverConfig) -> checks.SweepRow:
    """Rebuild the problem for one parameter value and solve it (process-pool entry point)."""
    fsec = dict(raw["function"])
    dsec = dict(raw["domain"])
    if parameter == "h0":
        fsec["h0"] = value
    elif parameter == "lambda":
        fsec["lambda"] = value
    elif parameter == "radius":
        dsec["radius"] = value
    cfg = RunConfig("", {"function": fsec, "domain": dsec})
    f = _build_function(cfg, fsec)
    if parameter == "scale":
        f = f.scaled(value)
    domain = _build_domain(cfg, dsec)
    g = DirichletData.from_text(str(raw.get("boundary", {}).get("g", "0")))
    return checks.solve_row(value, domain, f, g, solver)


def cmd_sweep(cfg: RunConfig, out: Path, args) -> int:
    _require(cfg, "function", "domain")
    name, values = _sweep_range(cfg)
    if name in ("h0", "lambda"):
        kind = cfg.raw["function"].get("kind")
        if (name, kind) not in (("h0", "constant"), ("lambda", "translator")):
            raise cfg.error(f"parameter {name!r} does not apply to kind {kind!r}", "sweep", "parameter")
    if name == "radius" and cfg.domain.kind != "disc":
        raise cfg.error("radius sweeps need a disc domain", "sweep", "parameter")
    rows: dict[int, checks.SweepRow] = {}
    path = out / "sweep.csv"

    def flush():
        ordered = [rows[k].as_tuple() for k in sorted(rows)]
        atomic_write(path, csv_text(SWEEP_HEADER, ordered))

    jobs = max(1, int(args.jobs or 1))
    try:
        if jobs == 1:
            for k, value in enumerate(values):
                rows[k] = sweep_row(cfg.raw, name, float(value), cfg.solver)
                logger.info("%s=%s converged=%s", name, _fmt(value), rows[k].converged)
                flush()
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {pool.submit(sweep_row, cfg.raw, name, float(v), cfg.solver): k
                           for k, v in enumerate(values)}
                for fut in as_completed(futures):
                    k = futures[fut]
                    rows[k] = fut.result()
                    logger.info("%s=%s converged=%s", name, _fmt(values[k]), rows[k].converged)
                    flush()
    except KeyboardInterrupt:
        flush()
        raise
    flush()
    threshold = checks.empirical_threshold(list(rows.values()))
    if threshold is not None:
        logger.info("empirical solvability threshold near %s", _fmt(threshold))
    return EXIT_OK


def cmd_mesh_analyze(cfg: RunConfig, out: Path, args) -> int:
    path = args.mesh or cfg.section("mesh").get("path")
    if path is None:
        raise ConfigError("mesh-analyze needs an OBJ path (argument or [mesh] path)")
    try:
        mesh = TriMesh.from_obj(path)
    except OSError as exc:
        raise ConfigError(f"cannot read mesh {path}: {exc}") from None
    except (MeshError, ValueError) as exc:
        raise ConfigError(f"invalid mesh {path}: {exc}") from None
    f = cfg.function or curvature.LambdaTranslator((0.0, 0.0, 1.0), 0.0)
    msec = cfg.section("mesh")
    v = np.asarray(_vector(msec.get("v", cfg.check_params.get("v", (0.0, 0.0, 1.0))), 3, cfg, "mesh", "v"))
    v = v / np.linalg.norm(v)
    lam = float(msec.get("lambda", cfg.check_params.get("lambda", 0.0)))
    va = vector_area(mesh)
    status = {"vertices": len(mesh.vertices), "faces": len(mesh.faces), "closed": mesh.closed,
              "area": mesh.area, "vector_area": va.tolist(), "vector_area_norm": float(np.linalg.norm(va)),
              "flux": {name: flux_integral(mesh, f, e) for name, e in
                       (("e1", (1.0, 0.0, 0.0)), ("e2", (0.0, 1.0, 0.0)), ("e3", (0.0, 0.0, 1.0)),
                        ("v", v))}}
    if np.any(~mesh.boundary_vertices):
        f_lam = f if lam == 0.0 else (lambda x: f._value(x) + lam)
        status["residual_sup"] = hsurface_residual(mesh, f_lam)[1]
    names = cfg.checks or (["closed-obstruction"] if mesh.closed else [])
    reports: list[CheckReport] = []
    try:
        reports = run_mesh_checks(cfg, mesh, f, cfg.domain, names)
    except (CheckError, ConfigError) as exc:
        atomic_write(out / "reports.json", reports_text(status, reports, [str(exc)]))
        logger.error("%s", exc)
        return EXIT_CONFIG
    atomic_write(out / "reports.json", reports_text(status, reports))
    return _exit_for(reports)


def load_solution(cfg: RunConfig, path: Path) -> GraphSolution:
    """Rebuild a :class:`GraphSolution` from ``solution.csv`` and the config that produced it."""
    _require(cfg, "function", "domain")
    data = np.genfromtxt(path, delimiter=",", names=True)
    inside = data["inside"] == 1
    pts = np.column_stack([data["x1"], data["x2"]])[inside]
    grid = cfg.domain.grid
    if len(pts) != grid.n or not np.allclose(pts, grid.points, atol=1e-12):
        raise ConfigError(f"{path} does not match the configured grid")
    disc = Discretization(grid, cfg.boundary)
    return GraphSolution(cfg.domain, grid, cfg.function, cfg.boundary, data["u"][inside],
                         cfg.solver, ConvergenceRecord(), disc)


def cmd_check(cfg: RunConfig, out: Path, args) -> int:
    if (out / "solution.csv").exists():
        sol = load_solution(cfg, out / "solution.csv")
        status = {"source": "solution.csv", "nodes": int(sol.grid.n), "spacing": sol.spacing,
                  "max_residual": float(np.max(np.abs(sol.residual())))}
        return _graph_reports(cfg, sol, out, status)
    if (out / "mesh.obj").exists():
        _require(cfg, "function")
        try:
            mesh = TriMesh.from_obj(out / "mesh.obj")
        except MeshError as exc:
            raise ConfigError(f"invalid mesh: {exc}") from None
        reports: list[CheckReport] = []
        try:
            reports = run_mesh_checks(cfg, mesh, cfg.function, cfg.domain, cfg.checks)
        except (CheckError, ConfigError) as exc:
            atomic_write(out / "reports.json", reports_text({}, reports, [str(exc)]))
            return EXIT_CONFIG
        atomic_write(out / "reports.json", reports_text({}, reports))
        return _exit_for(reports)
    raise ConfigError(f"no solution.csv or mesh.obj in {out}")


COMMANDS = {
    "solve-graph": cmd_solve_graph,
    "solve-rotational": cmd_solve_rotational,
    "sweep": cmd_sweep,
    "mesh-analyze": cmd_mesh_analyze,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsurf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "mesh-analyze", help="TOML run configuration")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        p.add_argument("--jobs", type=int, default=1, help="parallel solves for sweeps")
        p.add_argument("--tol", type=float, help="solver / integrator tolerance override")
        if name == "mesh-analyze":
            p.add_argument("mesh", nargs="?", help="OBJ file")
    return parser


def configure_logging() -> None:
    level = os.environ.get("HSURF_LOG", "error").lower()
    if level not in LOG_LEVELS:
        raise ConfigError(f"HSURF_LOG must be one of {', '.join(LOG_LEVELS)}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure_logging()
        cfg = load_config(args.config) if args.config else RunConfig("", {})
        if args.tol is not None:
            if not args.tol > 0:
                raise ConfigError("--tol must be positive")
            cfg.solver = replace(cfg.solver, tol=args.tol)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        out = _prepare_output(Path(args.out) if args.out else cfg.output)
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"hsurf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckError as exc:
        print(f"hsurf: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

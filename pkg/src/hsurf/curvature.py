"""Prescribed functions on the unit sphere.

A :class:`PrescribedFunction` is the right-hand side of the prescribed
mean curvature problem: a C^1 function of the unit normal.  Four kinds
are supported (constant, lambda-translator, rotational, free-form
expression).  All evaluation is vectorized over arrays of shape
``(..., 3)``.

Mean curvature convention throughout the package: ``H = (k1 + k2) / 2``,
so the graph equation carries a factor 2 on the right-hand side.  The
classical translating soliton ``div(Du/W) = 1/W`` is therefore
``LambdaTranslator(w=e3, lam=0)`` scaled by one half.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .expr import Expression

UNIT_TOL = 1e-12
SYMMETRY_TOL = 1e-9
LATTICE_SIZE = 2000
FD_STEP = 1e-6


class NonUnitInput(ValueError):
    """Raised when an argument is not a unit vector within tolerance."""


def as_unit(x) -> np.ndarray:
    """Return ``x / |x|`` after checking ``| |x| - 1 | <= 1e-12``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise NonUnitInput(f"expected 3-vectors, got shape {x.shape}")
    norm = np.linalg.norm(x, axis=-1)
    if not np.all(np.abs(norm - 1.0) <= UNIT_TOL):
        worst = float(np.max(np.abs(norm - 1.0)))
        raise NonUnitInput(f"|x| deviates from 1 by {worst:.3g}")
    return x / norm[..., None]


def _unit_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero vector")
    return v / n


def graph_normal(p) -> np.ndarray:
    """Upward unit normal ``(-p, 1) / sqrt(1 + |p|^2)`` of a graph with gradient ``p``.

    Saturates gracefully for huge ``|p|`` (the normal tends to the equator).
    """
    p = np.asarray(p, dtype=float)
    scale = np.maximum(1.0, np.max(np.abs(p), axis=-1))
    q = p / scale[..., None]
    inv = 1.0 / scale
    w = np.sqrt(inv**2 + np.sum(q * q, axis=-1))
    return np.concatenate([-q, inv[..., None]], axis=-1) / w[..., None]


def fibonacci_sphere(n: int = LATTICE_SIZE) -> np.ndarray:
    """Deterministic spherical Fibonacci lattice of ``n`` unit vectors."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    rho = np.sqrt(1.0 - z * z)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def tangent_frame(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent vectors ``(t1, t2)`` at unit vectors ``x``."""
    ref = np.zeros_like(x)
    use_e1 = np.abs(x[..., 0]) < 0.9
    ref[..., 0] = use_e1
    ref[..., 1] = ~use_e1
    t1 = np.cross(x, ref)
    t1 /= np.linalg.norm(t1, axis=-1)[..., None]
    t2 = np.cross(x, t1)
    return t1, t2


@dataclass(frozen=True)
class Symmetry:
    """Declared symmetry of a prescribed function.

    ``kind`` is ``"reflection"`` (``vector`` is the plane normal),
    ``"axis"`` (``vector`` is the rotation axis) or ``"odd"``.
    """

    kind: str
    vector: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("reflection", "axis", "odd"):
            raise ValueError(f"unknown symmetry kind {self.kind!r}")
        if self.kind != "odd" and self.vector is None:
            raise ValueError(f"{self.kind} symmetry needs a vector")


@dataclass(frozen=True)
class PrescribedFunction:
    """Base class; subclasses implement ``_value`` and ``_gradient``."""

    declared_symmetries: tuple[Symmetry, ...] = field(default=(), kw_only=True)

    def _value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def eval(self, x) -> np.ndarray | float:
        """Value at unit vector(s) ``x``; raises :class:`NonUnitInput` otherwise."""
        x = as_unit(x)
        out = self._value(x)
        return float(out) if out.ndim == 0 else out

    __call__ = eval

    def eval_from_gradient(self, p) -> np.ndarray | float:
        """Value at the upward normal of a graph with gradient ``p``."""
        out = self._value(graph_normal(p))
        return float(out) if out.ndim == 0 else out

    def differential(self, x) -> np.ndarray:
        """Tangential gradient on the sphere at unit vector(s) ``x``."""
        x = as_unit(x)
        g = self._gradient(x)
        return g - np.sum(g * x, axis=-1)[..., None] * x

    def extrema(self) -> tuple[float, float]:
        raise NotImplementedError

    def scaled(self, t: float) -> "PrescribedFunction":
        """The function ``t * H`` (used for continuation)."""
        if t == 1.0:
            return self
        return Scaled(self, float(t), declared_symmetries=self.declared_symmetries)


@dataclass(frozen=True)
class Constant(PrescribedFunction):
    h0: float = 0.0

    def _value(self, x):
        return np.full(x.shape[:-1], float(self.h0))

    def _gradient(self, x):
        return np.zeros_like(x)

    def extrema(self):
        return float(self.h0), float(self.h0)


@dataclass(frozen=True)
class LambdaTranslator(PrescribedFunction):
    """``H(x) = <x, w> + lam`` with density vector ``w``."""

    w: tuple[float, float, float] = (0.0, 0.0, 1.0)
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(_unit_vector(self.w)))

    def _value(self, x):
        return x @ np.asarray(self.w) + self.lam

    def _gradient(self, x):
        return np.broadcast_to(np.asarray(self.w), x.shape).copy()

    def extrema(self):
        return self.lam - 1.0, self.lam + 1.0


@dataclass(frozen=True)
class Rotational(PrescribedFunction):
    """``H(x) = profile(<x, v>)`` for a C^1 profile on ``[-1, 1]``.

    ``profile`` and ``dprofile`` are vectorized callables; when built
    from text (see :func:`rotational_from_text`) the derivative is exact.
    """

    v: tuple[float, float, float] = (0.0, 0.0, 1.0)
    profile: Callable[[np.ndarray], np.ndarray] = None
    dprofile: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "v", tuple(_unit_vector(self.v)))
        if self.profile is None:
            raise ValueError("Rotational needs a profile callable")

    def _t(self, x):
        return np.clip(x @ np.asarray(self.v), -1.0, 1.0)

    def _value(self, x):
        t = self._t(x)
        return np.broadcast_to(np.asarray(self.profile(t), dtype=float), t.shape).copy()

    def _dprofile(self, t):
        if self.dprofile is not None:
            return np.broadcast_to(np.asarray(self.dprofile(t), dtype=float), np.shape(t))
        step = 1e-6
        lo = np.clip(t - step, -1.0, 1.0)
        hi = np.clip(t + step, -1.0, 1.0)
        return (self.profile(hi) - self.profile(lo)) / (hi - lo)

    def _gradient(self, x):
        return self._dprofile(self._t(x))[..., None] * np.asarray(self.v)

    def extrema(self):
        return _extrema_1d(lambda t: np.asarray(self.profile(np.asarray(t, dtype=float)), dtype=float))


@dataclass(frozen=True)
class ExpressionFunction(PrescribedFunction):
    """Free-form ``H(x, y, z)`` given as text; gradient by central differences."""

    expr: Expression = None

    def __post_init__(self):
        if isinstance(self.expr, str):
            object.__setattr__(self, "expr", Expression(self.expr, ("x", "y", "z")))
        if self.expr is None:
            raise ValueError("ExpressionFunction needs an expression")

    def _value(self, x):
        return self.expr(x[..., 0], x[..., 1], x[..., 2])

    def _gradient(self, x):
        # derivative along great circles through x in two tangent directions
        t1, t2 = tangent_frame(x)
        c, s = np.cos(FD_STEP), np.sin(FD_STEP)
        grad = np.zeros_like(x)
        for t in (t1, t2):
            d = (self._value(c * x + s * t) - self._value(c * x - s * t)) / (2 * FD_STEP)
            grad += d[..., None] * t
        return grad

    def extrema(self):
        return _extrema_sphere(self._value)


@dataclass(frozen=True)
class Scaled(PrescribedFunction):
    base: PrescribedFunction = None
    factor: float = 1.0

    def _value(self, x):
        return self.factor * self.base._value(x)

    def _gradient(self, x):
        return self.factor * self.base._gradient(x)

    def extrema(self):
        lo, hi = self.base.extrema()
        a, b = self.factor * lo, self.factor * hi
        return (min(a, b), max(a, b))


def _extrema_1d(fn: Callable[[np.ndarray], np.ndarray]) -> tuple[float, float]:
    t = np.linspace(-1.0, 1.0, 4001)
    vals = fn(t)
    out = []
    for sign in (1.0, -1.0):
        k = int(np.argmin(sign * vals))
        best = sign * vals[k]
        lo, hi = t[max(k - 1, 0)], t[min(k + 1, len(t) - 1)]
        if hi > lo:
            res = optimize.minimize_scalar(
                lambda s: sign * float(fn(np.asarray(s))), bounds=(lo, hi),
                method="bounded", options={"xatol": 1e-12},
            )
            best = min(best, float(res.fun))
        out.append(sign * best)
    return float(out[0]), float(out[1])


def _extrema_sphere(value: Callable[[np.ndarray], np.ndarray]) -> tuple[float, float]:
    from .meshgeom import icosphere

    pts = icosphere(6).vertices
    vals = value(pts)
    out = []
    for sign in (1.0, -1.0):
        best = float(np.min(sign * vals))
        for k in np.argsort(sign * vals)[:5]:
            p = pts[k]
            theta0 = np.arccos(np.clip(p[2], -1, 1))
            phi0 = np.arctan2(p[1], p[0])

            def obj(a, sign=sign):
                st = np.sin(a[0])
                q = np.array([st * np.cos(a[1]), st * np.sin(a[1]), np.cos(a[0])])
                return sign * float(value(q))

            res = optimize.minimize(obj, [theta0, phi0], method="Nelder-Mead",
                                    options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 2000})
            best = min(best, float(res.fun))
        out.append(sign * best)
    return out[0], out[1]


def extrema(f: PrescribedFunction) -> tuple[float, float]:
    """``(min H, max H)`` over the unit sphere."""
    return f.extrema()


def _reflect(x: np.ndarray, normal: np.ndarray) -> np.ndarray:
    return x - 2.0 * (x @ normal)[..., None] * normal


def _declared(f: PrescribedFunction, kind: str, vector=None) -> bool:
    for sym in f.declared_symmetries:
        if sym.kind != kind:
            continue
        if kind == "odd":
            return True
        if abs(abs(float(np.dot(_unit_vector(sym.vector), vector))) - 1.0) <= 1e-12:
            return True
    return False


def respects_reflection(f: PrescribedFunction, normal) -> bool:
    """True when ``H(R x) = H(x)`` for the reflection in the plane ``normal^perp``."""
    n = _unit_vector(normal)
    if _declared(f, "reflection", n):
        return True
    if isinstance(f, Constant):
        return True
    if isinstance(f, LambdaTranslator):
        return abs(float(np.dot(f.w, n))) <= 1e-12
    if isinstance(f, Rotational) and abs(float(np.dot(f.v, n))) <= 1e-12:
        return True
    x = fibonacci_sphere()
    try:
        return bool(np.max(np.abs(f._value(_reflect(x, n)) - f._value(x))) <= SYMMETRY_TOL)
    except Exception:
        return False


def is_odd(f: PrescribedFunction) -> bool:
    """True when ``H(-x) = -H(x)`` on the sample lattice."""
    if _declared(f, "odd"):
        return True
    if isinstance(f, Constant):
        return f.h0 == 0.0
    if isinstance(f, LambdaTranslator):
        return f.lam == 0.0
    x = fibonacci_sphere()
    try:
        return bool(np.max(np.abs(f._value(-x) + f._value(x))) <= SYMMETRY_TOL)
    except Exception:
        return False


def _rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def is_rotational_about(f: PrescribedFunction, axis) -> bool:
    a = _unit_vector(axis)
    if _declared(f, "axis", a) or isinstance(f, Constant):
        return True
    if isinstance(f, LambdaTranslator):
        return abs(abs(float(np.dot(f.w, a))) - 1.0) <= 1e-12
    if isinstance(f, Rotational) and abs(abs(float(np.dot(f.v, a))) - 1.0) <= 1e-12:
        return True
    x = fibonacci_sphere()
    try:
        base = f._value(x)
        for angle in (0.7, 2.1, 3.9):
            if np.max(np.abs(f._value(x @ _rotation(a, angle).T) - base)) > SYMMETRY_TOL:
                return False
        return True
    except Exception:
        return False


def rotational_axis(f: PrescribedFunction) -> np.ndarray | None:
    """Axis ``v`` with ``H(x) = h(<x, v>)``, or ``None`` when none is found.

    Constant functions are rotational about every axis; ``e3`` is returned.
    """
    for sym in f.declared_symmetries:
        if sym.kind == "axis":
            return _unit_vector(sym.vector)
    if isinstance(f, Rotational):
        return np.asarray(f.v)
    if isinstance(f, LambdaTranslator):
        return np.asarray(f.w)
    if isinstance(f, Scaled):
        return rotational_axis(f.base)
    for axis in np.eye(3)[::-1]:
        if is_rotational_about(f, axis):
            return axis
    return None


def axial_profile(f: PrescribedFunction, axis=(0.0, 0.0, 1.0)) -> tuple[Callable, Callable]:
    """Return ``(h, dh)`` with ``H(x) = h(<x, axis>)`` for a function rotational about ``axis``."""
    a = _unit_vector(axis)
    if isinstance(f, Rotational) and np.allclose(f.v, a, atol=1e-12):
        return f.profile, (f.dprofile or (lambda t: f._dprofile(t)))
    if isinstance(f, LambdaTranslator) and np.allclose(f.w, a, atol=1e-12):
        return (lambda t: np.asarray(t, dtype=float) + f.lam), (lambda t: np.ones_like(np.asarray(t, dtype=float)))
    if isinstance(f, Constant):
        return (lambda t: np.full(np.shape(t), float(f.h0))), (lambda t: np.zeros(np.shape(t)))
    if not is_rotational_about(f, a):
        raise ValueError("prescribed function is not rotational about the given axis")
    t1, _ = tangent_frame(a[None, :])
    t1 = t1[0]

    def h(t):
        t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
        x = t[..., None] * a + np.sqrt(1.0 - t * t)[..., None] * t1
        return f._value(x)

    def dh(t):
        t = np.asarray(t, dtype=float)
        lo, hi = np.clip(t - 1e-6, -1, 1), np.clip(t + 1e-6, -1, 1)
        return (h(hi) - h(lo)) / (hi - lo)

    return h, dh


def rotational_from_text(profile: str, v=(0.0, 0.0, 1.0), **kw) -> Rotational:
    """Rotational function with profile given as an expression in ``t``."""
    e = Expression(profile, ("t",))
    return Rotational(v=v, profile=e, dprofile=e.diff("t"), label=profile, **kw)


def from_config(cfg: dict) -> PrescribedFunction:
    """Build a prescribed function from a config table.

    Recognized keys: ``kind`` in {"constant", "translator", "rotational",
    "expr"}; ``h0``; ``w``; ``lambda``; ``v``; ``profile``; ``expr``;
    optional ``symmetries`` (list of tables with ``kind`` and ``vector``).
    """
    kind = cfg.get("kind")
    syms = tuple(Symmetry(s["kind"], tuple(s["vector"]) if s.get("vector") is not None else None)
                 for s in cfg.get("symmetries", ()))
    if kind == "constant":
        return Constant(h0=float(cfg.get("h0", 0.0)), declared_symmetries=syms)
    if kind == "translator":
        return LambdaTranslator(w=tuple(cfg.get("w", (0.0, 0.0, 1.0))),
                                lam=float(cfg.get("lambda", 0.0)), declared_symmetries=syms)
    if kind == "rotational":
        if "profile" not in cfg:
            raise ValueError("rotational kind needs 'profile'")
        return rotational_from_text(cfg["profile"], v=tuple(cfg.get("v", (0.0, 0.0, 1.0))),
                                    declared_symmetries=syms)
    if kind == "expr":
        if "expr" not in cfg:
            raise ValueError("expr kind needs 'expr'")
        return ExpressionFunction(expr=Expression(cfg["expr"], ("x", "y", "z")), declared_symmetries=syms)
    raise ValueError(f"unknown prescribed-function kind {kind!r}")


def describe(f: PrescribedFunction) -> dict:
    """JSON-friendly description used in reports."""
    if isinstance(f, Constant):
        return {"kind": "constant", "h0": f.h0}
    if isinstance(f, LambdaTranslator):
        return {"kind": "translator", "w": list(f.w), "lambda": f.lam}
    if isinstance(f, Rotational):
        return {"kind": "rotational", "v": list(f.v), "profile": f.label or repr(f.profile)}
    if isinstance(f, ExpressionFunction):
        return {"kind": "expr", "expr": f.expr.text}
    if isinstance(f, Scaled):
        return {"kind": "scaled", "factor": f.factor, "base": describe(f.base)}
    return {"kind": type(f).__name__}


__all__: Sequence[str] = [
    "NonUnitInput", "PrescribedFunction", "Constant", "LambdaTranslator", "Rotational",
    "ExpressionFunction", "Symmetry", "as_unit", "graph_normal", "fibonacci_sphere",
    "extrema", "respects_reflection", "is_odd", "rotational_axis", "is_rotational_about",
    "axial_profile", "rotational_from_text", "from_config", "describe",
]

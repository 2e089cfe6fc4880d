import numpy as np
import pytest

from hsurf.curvature import Constant, ExpressionFunction, LambdaTranslator
from hsurf.domain import DirichletData, PlanarDomain
from hsurf.graph_solver import (BoundaryNotPlanar, Discretization, NonConvergence, SolverConfig,
                                height, residual, solve_dirichlet, surface_area)
from oracles import CAP_AREA_05, CAP_DEPTH_05, CAP_DEPTH_09, TILTED_DISC_AREA


def cap_exact(points, R):
    return np.sqrt(1 - R * R) - np.sqrt(1 - np.sum(points**2, axis=1))


class TestResidual:
    def test_zero_plane(self):
        d = PlanarDomain.disc(1.0, 1 / 16)
        assert np.max(np.abs(residual(np.zeros(d.grid.n), d, Constant(0.0)))) == 0.0

    def test_translated_plane(self):
        d = PlanarDomain.disc(1.0, 1 / 16)
        r = residual(np.full(d.grid.n, 3.0), d, Constant(0.0), DirichletData.const(3.0))
        assert np.max(np.abs(r)) <= 1e-12

    def test_tilted_plane_is_exact(self):
        d = PlanarDomain.disc(1.0, 1 / 16)
        g = DirichletData.from_text("0.6*x1 - 0.8*x2")
        u = d.grid.points @ np.array([0.6, -0.8])
        assert np.max(np.abs(residual(u, d, Constant(0.0), g))) <= 1e-11

    def test_cap_residual_is_second_order_away_from_boundary(self):
        # cut-cell rows carry an O(1) truncation error; two spacings inside it is O(h^2)
        deep, layer = [], []
        for h in (1 / 16, 1 / 32, 1 / 64, 1 / 128):
            d = PlanarDomain.disc(0.5, h)
            p = d.grid.points
            r = np.abs(residual(cap_exact(p, 0.5), d, Constant(1.0)))
            inner = d.distance(p) >= 2 * h
            deep.append(r[inner].max() / h**2)
            layer.append(r.max())
        assert max(deep[1:]) <= 1.01 * deep[1] and deep[-1] <= 1.0
        assert max(layer) <= 0.05


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(7)
    d = PlanarDomain.polygon([[0, 0], [1, 0], [1.2, 0.9], [0.1, 1.1]], 1 / 16)
    g = DirichletData.from_text("x1*x2 - 0.3")
    f = ExpressionFunction("x*z + sin(y) + 0.5")
    disc = Discretization(d.grid, g)
    u = 0.3 * rng.standard_normal(d.grid.n)
    J = disc.jacobian(u, f, 0.8)
    for _ in range(3):
        v = rng.standard_normal(d.grid.n)
        eps = 1e-6
        fd = (disc.residual(u + eps * v, f, 0.8) - disc.residual(u - eps * v, f, 0.8)) / (2 * eps)
        Jv = J @ v
        assert np.linalg.norm(Jv - fd) <= 1e-6 * np.linalg.norm(Jv)


class TestSolve:
    def test_minimal_plane_one_step(self):
        sol = solve_dirichlet(PlanarDomain.disc(1.0, 1 / 16), 0.0, Constant(0.0))
        assert np.max(np.abs(sol.u)) == 0.0
        assert sol.record.iterations == 0

    def test_cap(self):
        d = PlanarDomain.disc(0.5, 1 / 64)
        sol = solve_dirichlet(d, 0.0, Constant(1.0))
        assert np.max(np.abs(sol.residual())) <= sol.config.tol + sol.record.rounding_floor
        assert np.max(np.abs(sol.u - cap_exact(sol.points, 0.5))) <= 5e-4
        lo, hi, h = height(sol)
        assert h == pytest.approx(CAP_DEPTH_05, abs=5e-4) and hi < 0

    def test_deep_cap(self):
        sol = solve_dirichlet(PlanarDomain.disc(0.9, 1 / 64), 0.0, Constant(1.0))
        assert height(sol)[2] == pytest.approx(CAP_DEPTH_09, abs=2e-3)

    def test_boundary_trace(self):
        g = DirichletData.from_text("x1^2")
        sol = solve_dirichlet(PlanarDomain.disc(0.5, 1 / 16), g, Constant(0.5))
        pts, vals = sol.boundary_trace()
        np.testing.assert_array_equal(vals, pts[:, 0] ** 2)

    def test_overcurved_fails(self):
        with pytest.raises(NonConvergence) as info:
            solve_dirichlet(PlanarDomain.disc(1.0, 1 / 16), 0.0, Constant(1.5))
        assert 0.0 < info.value.last_t < 1.0
        assert info.value.history

    def test_translation_invariance(self):
        d = PlanarDomain.disc(0.6, 1 / 32)
        f = LambdaTranslator((0, 0, 1), 0.3)
        u0 = solve_dirichlet(d, 0.0, f).u
        u2 = solve_dirichlet(d, 2.0, f).u
        assert np.max(np.abs(u2 - (u0 + 2.0))) <= 1e-9

    def test_reflection_equivariance(self):
        d = PlanarDomain.disc(0.8, 1 / 32)
        sol = solve_dirichlet(d, 0.0, LambdaTranslator((0, 0, 1), 0.5))
        V = sol.values_grid()
        i0 = int(np.argmin(np.abs(d.grid.xs)))
        left = V[i0 - 1::-1][: V.shape[0] - i0 - 1]
        right = V[i0 + 1:][: len(left)]
        ok = np.isfinite(left) & np.isfinite(right)
        assert np.max(np.abs(left[ok] - right[ok])) <= 10 * sol.config.tol

    def test_comparison_ordering(self):
        d = PlanarDomain.disc(0.5, 1 / 32)
        sols = [solve_dirichlet(d, 0.0, Constant(H)) for H in (0.25, 0.5, 0.75, 1.0)]
        for a, b in zip(sols, sols[1:]):
            assert np.all(a.u >= b.u)
        heights = [height(s)[2] for s in sols]
        assert all(x < y for x, y in zip(heights, heights[1:]))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(tol=0.0)
        with pytest.raises(ValueError):
            SolverConfig(steps=0)

    def test_height_needs_planar_boundary(self):
        sol = solve_dirichlet(PlanarDomain.disc(0.5, 1 / 16), 1.0, Constant(0.0))
        with pytest.raises(BoundaryNotPlanar):
            height(sol)


class TestArea:
    def test_flat_disc(self):
        sol = solve_dirichlet(PlanarDomain.disc(1.0, 1 / 128), 0.0, Constant(0.0))
        assert surface_area(sol) == pytest.approx(np.pi, abs=2e-3)

    def test_cap(self):
        sol = solve_dirichlet(PlanarDomain.disc(0.5, 1 / 64), 0.0, Constant(1.0))
        assert surface_area(sol) == pytest.approx(CAP_AREA_05, abs=5e-3)

    def test_tilted_disc(self):
        g = DirichletData.from_text("x1")
        sol = solve_dirichlet(PlanarDomain.disc(1.0, 1 / 64), g, Constant(0.0))
        assert np.max(np.abs(sol.u - sol.points[:, 0])) <= 1e-10
        assert surface_area(sol) == pytest.approx(TILTED_DISC_AREA, abs=5e-3)

    def test_polygon(self):
        g = DirichletData.from_text("0.5*x1 + 0.5*x2")
        d = PlanarDomain.polygon([[0, 0], [1, 0], [0.3, 0.9]], 1 / 32)
        sol = solve_dirichlet(d, g, Constant(0.0))
        assert surface_area(sol) == pytest.approx(d.area * np.sqrt(1.5), rel=1e-3)


def test_interpolate_outside_is_nan():
    sol = solve_dirichlet(PlanarDomain.disc(0.5, 1 / 16), 0.0, Constant(1.0))
    v = sol.interpolate([[0.0, 0.0], [2.0, 2.0]])
    assert np.isfinite(v[0]) and np.isnan(v[1])

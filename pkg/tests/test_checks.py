import json

import numpy as np
import pytest

from hsurf.checks import (AsymmetricDomain, CheckReport, HypothesisViolated, NotCircularBoundary, OpenMesh,
                          SweepRow, check_closed_obstruction, check_cylinder_containment, check_flux_necessary,
                          check_height_area, check_lambda_one_side, check_one_side, check_reflection_symmetry,
                          check_rotational_symmetry, check_slab, empirical_threshold)
from hsurf.curvature import Constant, ExpressionFunction, LambdaTranslator, rotational_from_text
from hsurf.domain import DirichletData, PlanarDomain
from hsurf.graph_solver import height, solve_dirichlet
from hsurf.meshgeom import disc_mesh, icosphere, torus
from hsurf.rotational import integrate_from_axis, revolve
from oracles import CAP_DEPTH_05, SPHERE_Z2, UNIT_DISC_FLUX_BOUND, UNIT_SQUARE_FLUX_BOUND

E1, E3 = (1.0, 0.0, 0.0), (0.0, 0.0, 1.0)


def solve(f, R=0.8, h=1 / 32, g=0.0):
    return solve_dirichlet(PlanarDomain.disc(R, h), g, f)


@pytest.fixture(scope="module")
def bowl():
    return solve(LambdaTranslator(E3, 0.0))


@pytest.fixture(scope="module")
def cap05():
    return solve(Constant(1.0), R=0.5, h=1 / 64)


def z_coord(x):
    return np.asarray(x)[..., 2]


def assert_json_ok(rep: CheckReport):
    text = json.dumps(rep.to_json(), allow_nan=False)
    back = json.loads(text)
    assert set(back) == {"theorem", "hypotheses", "measured", "bound", "margin", "conclusion", "pass",
                         "tolerances"}
    assert back["pass"] == (back["conclusion"] == "holds")


class TestFluxNecessary:
    def test_disc_holds(self):
        rep = check_flux_necessary(PlanarDomain.disc(1.0, 1 / 16), Constant(0.5))
        assert rep.passed and rep.bound == pytest.approx(UNIT_DISC_FLUX_BOUND)
        assert_json_ok(rep)

    def test_disc_nonexistence(self):
        rep = check_flux_necessary(PlanarDomain.disc(1.0, 1 / 16), Constant(1.5))
        assert rep.conclusion == "fails"
        assert rep.measured["nonexistence_certified"]

    def test_square_boundary_case(self):
        sq = PlanarDomain.polygon([[0, 0], [1, 0], [1, 1], [0, 1]], 1 / 16)
        rep = check_flux_necessary(sq, Constant(2.0))
        assert rep.bound == pytest.approx(UNIT_SQUARE_FLUX_BOUND)
        assert rep.passed

    def test_not_a_domain(self):
        with pytest.raises(ValueError):
            check_flux_necessary([[0, 0], [1, 1]], Constant(1.0))

    def test_threshold_from_rows(self):
        nan = float("nan")
        rows = [SweepRow(0.9, True, 0.1, 1.0, 1.0), SweepRow(1.1, False, nan, nan, nan),
                SweepRow(1.0, True, 0.1, 1.0, 1.0)]
        assert empirical_threshold(rows) == pytest.approx(1.05)
        assert empirical_threshold(rows[:1]) is None


class TestSlab:
    def test_tilted_boundary(self):
        sol = solve(LambdaTranslator(E1, 0.0), R=1.0, g=DirichletData.from_text("x1"))
        rep = check_slab(sol, E3, sol.f)
        assert rep.passed
        tol = rep.tolerances["slab"]
        assert sol.u.min() >= -1 - tol and sol.u.max() <= 1 + tol

    def test_flat_boundary_forces_plane(self):
        sol = solve(LambdaTranslator(E1, 0.0), R=1.0)
        rep = check_slab(sol, E3, sol.f)
        assert rep.passed
        assert np.max(np.abs(sol.u)) <= rep.tolerances["slab"]

    def test_constant_is_vacuous(self, cap05):
        rep = check_slab(cap05, E3, Constant(1.0))
        assert rep.conclusion == "vacuous" and not rep.passed
        with pytest.raises(HypothesisViolated):
            check_slab(cap05, E3, Constant(1.0), strict=True)

    def test_mesh_input(self):
        rep = check_slab(disc_mesh(1.0, 256, 8), E3, LambdaTranslator(E1, 0.0))
        assert rep.passed


class TestHeightArea:
    def test_cap(self, cap05):
        rep = check_height_area(cap05)
        assert rep.passed
        assert rep.measured["height"] == pytest.approx(CAP_DEPTH_05, abs=1e-4)
        assert rep.measured["ratio"] == pytest.approx(1.0, abs=1e-3)

    def test_cap_09(self):
        rep = check_height_area(solve(Constant(1.0), R=0.9, h=1 / 64))
        assert rep.passed
        assert rep.measured["ratio"] == pytest.approx(1.0, abs=2e-2)

    def test_translator_ratio_below_one(self):
        rep = check_height_area(solve(LambdaTranslator(E3, 1.5), R=0.5))
        assert rep.passed and rep.measured["ratio"] < 1.0
        assert rep.measured["H_max"] == pytest.approx(2.5)

    def test_nonpositive_is_vacuous(self, bowl):
        rep = check_height_area(bowl)
        assert rep.conclusion == "vacuous"

    def test_monotone_in_h0(self):
        hs = [height(solve(Constant(c), R=0.5))[2] for c in (0.25, 0.5, 0.75, 1.0)]
        assert all(a < b for a, b in zip(hs, hs[1:]))


class TestOneSide:
    def test_translator(self, bowl):
        rep = check_one_side(bowl)
        assert rep.passed and bowl.u.max() < 0

    def test_cubic(self):
        sol = solve(ExpressionFunction("z**3"))
        rep = check_one_side(sol)
        assert rep.passed and sol.u.max() < 0

    def test_constant_vacuous(self, cap05):
        assert check_one_side(cap05).conclusion == "vacuous"

    def test_wrong_sign_fails(self, bowl):
        assert check_one_side(bowl.with_values(-bowl.u)).conclusion == "fails"


class TestLambdaOneSide:
    def test_holds(self):
        sol = solve(LambdaTranslator(E3, 0.5))
        rep = check_lambda_one_side(sol, E3, 0.5, E3)
        assert rep.passed and sol.u.max() < 0

    def test_transverse_vacuous(self):
        sol = solve(LambdaTranslator(E3, 0.5))
        assert check_lambda_one_side(sol, E3, 0.5, E1).conclusion == "vacuous"

    def test_equality_case(self):
        sol = solve(LambdaTranslator((0, 0, -1), 1.0))
        rep = check_lambda_one_side(sol, (0, 0, -1), 1.0, E3)
        assert rep.measured["equality_case"]
        assert rep.passed
        # touching without planarity is rejected
        bumped = sol.with_values(sol.u + 0.05 * (sol.points[:, 0] > 0.3))
        assert not check_lambda_one_side(bumped, (0, 0, -1), 1.0, E3).passed


class TestReflection:
    def test_translator_exact(self):
        rep = check_reflection_symmetry(solve(LambdaTranslator(E3, 0.5)), (1, 0, 0))
        assert rep.passed and rep.measured["grid_aligned"]
        assert rep.measured["deviation"] <= 1e-9

    def test_even_expression(self):
        rep = check_reflection_symmetry(solve(ExpressionFunction("x**2 + 2"), R=0.3), (1, 0, 0))
        assert rep.passed and rep.measured["deviation"] <= 1e-9

    def test_odd_expression_vacuous(self):
        rep = check_reflection_symmetry(solve(ExpressionFunction("x + 2"), R=0.3), (1, 0, 0))
        assert rep.conclusion == "vacuous"

    def test_diagonal_plane(self, bowl):
        rep = check_reflection_symmetry(bowl, (1, 1, 0))
        assert rep.passed and not rep.measured["grid_aligned"]

    def test_injected_asymmetry(self, bowl):
        bad = bowl.with_values(bowl.u + 1e-2 * bowl.points[:, 0])
        assert check_reflection_symmetry(bad, (1, 0, 0)).conclusion == "fails"

    def test_asymmetric_domain(self):
        sol = solve_dirichlet(PlanarDomain.disc(0.5, 1 / 16, center=(0.3, 0.0)), 0.0, Constant(1.0))
        with pytest.raises(AsymmetricDomain):
            check_reflection_symmetry(sol, (1, 0, 0))


class TestRotational:
    def test_cap(self, cap05):
        rep = check_rotational_symmetry(cap05)
        assert rep.passed and rep.measured["angular_spread"] <= 20 * cap05.spacing**2

    def test_bowl_with_profile(self):
        sol = solve(LambdaTranslator(E3, 0.0), h=1 / 64)
        c = integrate_from_axis(lambda t: np.asarray(t, dtype=float), 1, target_radius=0.8)
        z = c.as_graph()
        rep = check_rotational_symmetry(sol, profile=lambda r: z(r) - c.z[-1])
        assert rep.passed and rep.measured["profile_error"] <= 1e-3

    def test_perturbed_fails(self, cap05):
        bad = cap05.with_values(cap05.u + 1e-2 * cap05.points[:, 0])
        assert check_rotational_symmetry(bad).conclusion == "fails"

    def test_non_rotational_vacuous(self):
        sol = solve(ExpressionFunction("x + 2"), R=0.3)
        assert check_rotational_symmetry(sol).conclusion == "vacuous"

    def test_polygon_rejected(self):
        sq = PlanarDomain.polygon([[-1, -1], [1, -1], [1, 1], [-1, 1]], 1 / 8)
        with pytest.raises(NotCircularBoundary):
            check_rotational_symmetry(solve_dirichlet(sq, 0.0, Constant(0.2)))


class TestCylinder:
    def test_bowl(self, bowl):
        rep = check_cylinder_containment(bowl, bowl.domain, bowl.f)
        assert rep.passed

    def test_revolved_bowl(self):
        c = integrate_from_axis(lambda t: np.asarray(t, dtype=float), 1, target_radius=0.8)
        m = revolve(c, 128)
        rep = check_cylinder_containment(m, PlanarDomain.disc(0.8, 1 / 32), LambdaTranslator(E3, 0.0))
        assert rep.passed

    def test_sine(self):
        f = rotational_from_text("sin(t)")
        sol = solve(f, R=0.5)
        assert check_cylinder_containment(sol, sol.domain, f).passed

    def test_constant_vacuous(self, cap05):
        rep = check_cylinder_containment(cap05, cap05.domain, Constant(1.0))
        assert rep.conclusion == "vacuous"

    def test_escape_detected(self):
        m = disc_mesh(1.0, 256, 32)
        rep = check_cylinder_containment(m, PlanarDomain.disc(0.8, 1 / 32), LambdaTranslator(E3, 0.0))
        assert rep.conclusion == "fails"


class TestClosedObstruction:
    def test_sphere(self):
        rep = check_closed_obstruction(icosphere(4), z_coord)
        assert rep.passed
        assert rep.measured["flux"] == pytest.approx(SPHERE_Z2, rel=1e-2)

    def test_torus(self):
        rep = check_closed_obstruction(torus(), LambdaTranslator(E3, 0.0), lam=0.5)
        assert rep.passed and rep.measured["flux"] > 0

    def test_zero_inconclusive(self):
        rep = check_closed_obstruction(icosphere(3), Constant(0.0))
        assert rep.conclusion == "inconclusive" and not rep.passed

    def test_sign_condition(self):
        rep = check_closed_obstruction(icosphere(3), lambda x: -np.asarray(x)[..., 2])
        assert rep.conclusion == "vacuous"

    def test_open_mesh(self):
        with pytest.raises(OpenMesh):
            check_closed_obstruction(disc_mesh(1.0, 64, 4), z_coord)

    def test_reports_serialize(self):
        assert_json_ok(check_closed_obstruction(icosphere(3), z_coord))


def test_nonfinite_rejected():
    rep = check_flux_necessary(PlanarDomain.disc(1.0, 1 / 16), Constant(0.5))
    rep.measured["bad"] = float("nan")
    with pytest.raises(ValueError):
        rep.to_json()

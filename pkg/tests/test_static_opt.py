import numpy as np
import pytest
from scipy.optimize import brentq

import turnpike as tp
from turnpike.static_opt import KKT_TOLERANCE


def small_problem(name, dynamics, cost_rate):
    return tp.problem_from_dict({
        "name": name, "state_dim": 1, "control_dim": 1,
        "dynamics": dynamics, "cost_rate": cost_rate,
        "control_lower": [-4.0], "control_upper": [4.0]})


def test_p1_exact(s1):
    assert s1.y_bar == pytest.approx([1.0], abs=1e-10)
    assert s1.u_bar == pytest.approx([0.0], abs=1e-10)
    assert s1.lambda_bar == pytest.approx([0.0], abs=1e-10)
    assert s1.v_bar == pytest.approx(0.0, abs=1e-12)
    assert s1.kkt_residual <= KKT_TOLERANCE


def test_p2_exact(s2):
    assert s2.y_bar == pytest.approx([1.0, 0.0], abs=1e-10)
    assert s2.u_bar == pytest.approx([0.0], abs=1e-10)
    assert s2.lambda_bar == pytest.approx([0.0, 0.0], abs=1e-10)
    assert s2.v_bar == pytest.approx(0.0, abs=1e-12)
    assert s2.kkt_residual <= KKT_TOLERANCE


def test_p3_against_scalar_root(s3):
    # equilibrium u = y^3 reduces the static problem to one variable:
    # minimize (y - 1/2)^2 + y^6, whose optimality condition is
    # 2(y - 1/2) + 6 y^5 = 0; lambda follows from 2u = lambda.
    y_ref = brentq(lambda y: 2.0 * (y - 0.5) + 6.0 * y**5, 0.0, 1.0,
                   xtol=1e-15, rtol=8.9e-16)
    assert s3.y_bar == pytest.approx([y_ref], abs=1e-8)
    assert s3.u_bar == pytest.approx([y_ref**3], abs=1e-8)
    assert s3.lambda_bar == pytest.approx([2.0 * y_ref**3], abs=1e-8)
    assert s3.v_bar == pytest.approx((y_ref - 0.5)**2 + y_ref**6, abs=1e-10)
    assert s3.kkt_residual <= KKT_TOLERANCE


def test_kkt_residual_at_candidates(p1, p2, s1, s2):
    assert tp.kkt_residual(p1, s1) <= 1e-12
    assert tp.kkt_residual(p2, s2) <= 1e-12
    # feasible but non-optimal point: stationarity in y misses by 2(y-1)
    bad = tp.StaticSolution(y_bar=np.array([2.0]), u_bar=np.array([0.0]),
                            lambda_bar=np.array([0.0]), v_bar=1.0,
                            kkt_residual=float("nan"),
                            interior_margin=4.0)
    assert tp.kkt_residual(p1, bad) == pytest.approx(2.0)


def test_deterministic_given_seed(p3):
    a = tp.solve_static(p3, seed=3)
    b = tp.solve_static(p3, seed=3)
    assert np.array_equal(a.y_bar, b.y_bar)
    assert np.array_equal(a.lambda_bar, b.lambda_bar)


def test_initial_guess_is_used(p3, s3):
    guess = (s3.y_bar, s3.u_bar, s3.lambda_bar)
    again = tp.solve_static(p3, initial_guess=guess, starts=1)
    assert again.y_bar == pytest.approx(s3.y_bar, abs=1e-9)


def test_interior_margin_and_jacobian_signal(s1):
    assert s1.interior_margin == pytest.approx(4.0)
    assert s1.jacobian_min_singular_value > 0.0


def test_no_stationary_point_raises_convergence_error():
    # linear cost in y has no KKT point anywhere
    drift = small_problem("drift", ["u1"], "y1")
    with pytest.raises(tp.ConvergenceError):
        tp.solve_static(drift)


def test_flat_dynamics_raise_degenerate_error():
    flat = small_problem("flat", ["0.0 * u1"], "(y1 - 0.5)^2 + u1^2")
    with pytest.raises(tp.DegenerateProblemError):
        tp.solve_static(flat)


def test_multiple_minima_warns_and_reports_lowest():
    # stationary points y in {-1, 0, 1}; y=0 is a spurious local max with
    # value 1, the true minima sit at +-1 with value 0
    bistable = small_problem("bistable", ["u1"], "(y1^2 - 1.0)^2 + u1^2")
    with pytest.warns(UserWarning, match="distinct static candidates"):
        sol = tp.solve_static(bistable)
    assert abs(sol.y_bar[0]) == pytest.approx(1.0, abs=1e-8)
    assert sol.v_bar <= 1e-12

import json

import numpy as np
import pytest

import turnpike as tp


def test_builtin_dynamics_values(p1, p2, p3):
    assert tp.evaluate_dynamics(p1, [3.0], [0.5]) == pytest.approx([0.5])
    assert tp.evaluate_dynamics(p2, [1.0, 2.0], [-1.0]) == pytest.approx(
        [2.0, -1.0])
    assert tp.evaluate_dynamics(p3, [1.0], [1.0]) == pytest.approx([0.0])


def test_builtin_cost_values(p1):
    assert p1.cost_rate(np.array([1.0]), np.array([0.0])) == 0.0
    assert p1.cost_rate(np.array([2.0]), np.array([1.0])) == 2.0


def test_builtin_names_case_insensitive():
    assert tp.builtin_problem("p1").name == tp.builtin_problem("P1").name
    with pytest.raises(ValueError):
        tp.builtin_problem("p9")


def test_clamp_control(p1):
    inside = tp.clamp_control(p1, np.array([1.5]))
    assert inside == pytest.approx([1.5])
    # a small numerical overshoot is snapped back to the box
    snapped = tp.clamp_control(p1, np.array([4.0 + 1e-12]))
    assert snapped == pytest.approx([4.0])
    with pytest.raises(tp.AdmissibilityError):
        tp.clamp_control(p1, np.array([4.1]))


def test_linearize_analytic_points(p1, p2, p3):
    lin = tp.linearize(p1, np.array([1.0]), np.array([0.0]))
    assert lin.A == pytest.approx(np.array([[0.0]]))
    assert lin.B == pytest.approx(np.array([[1.0]]))
    assert lin.cost_grad_y == pytest.approx([0.0])
    assert lin.cost_grad_u == pytest.approx([0.0])

    lin = tp.linearize(p2, np.array([1.0, 0.0]), np.array([0.0]))
    assert lin.A == pytest.approx(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert lin.B == pytest.approx(np.array([[0.0], [1.0]]))

    lin = tp.linearize(p3, np.array([1.0]), np.array([1.0]))
    assert lin.A == pytest.approx(np.array([[-3.0]]))
    assert lin.B == pytest.approx(np.array([[1.0]]))


P3_DOC = {
    "name": "cubic-clone",
    "state_dim": 1,
    "control_dim": 1,
    "dynamics": ["-y1^3 + u1"],
    "cost_rate": "(y1 - 0.5)^2 + u1^2",
    "control_lower": [-4.0],
    "control_upper": [4.0],
}


def test_linearize_finite_difference_matches_analytic(p3):
    # the dict-loaded clone has no analytic jacobians, exercising the FD path
    clone = tp.problem_from_dict(P3_DOC)
    rng = np.random.default_rng(7)
    for _ in range(5):
        y = rng.uniform(-1.5, 1.5, size=1)
        u = rng.uniform(-2.0, 2.0, size=1)
        la = tp.linearize(p3, y, u)
        lf = tp.linearize(clone, y, u)
        assert lf.A == pytest.approx(la.A, abs=1e-6)
        assert lf.B == pytest.approx(la.B, abs=1e-6)
        assert lf.cost_grad_y == pytest.approx(la.cost_grad_y, abs=1e-6)
        assert lf.cost_grad_u == pytest.approx(la.cost_grad_u, abs=1e-6)


def _lin(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return tp.LinearizationData(A=A, B=B,
                                cost_grad_y=np.zeros(A.shape[0]),
                                cost_grad_u=np.zeros(B.shape[1]))


def test_kalman_rank():
    assert tp.kalman_rank(_lin([[0.0]], [[1.0]]))
    assert tp.kalman_rank(_lin([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]]))
    assert not tp.kalman_rank(_lin(np.zeros((2, 2)), [[1.0], [0.0]]))


def test_problem_from_dict_matches_builtin(p3):
    clone = tp.problem_from_dict(P3_DOC)
    rng = np.random.default_rng(0)
    for _ in range(8):
        y = rng.uniform(-2.0, 2.0, size=1)
        u = rng.uniform(-4.0, 4.0, size=1)
        assert clone.dynamics(y, u) == pytest.approx(p3.dynamics(y, u),
                                                     abs=1e-12)
        assert clone.cost_rate(y, u) == pytest.approx(p3.cost_rate(y, u),
                                                      abs=1e-12)


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("cost_rate"),
    lambda d: d.update(extra_key=1),
    lambda d: d.update(dynamics=["u1", "u1"]),        # wrong length for n=1
    lambda d: d.update(dynamics=["nope(y1)"]),
    lambda d: d.update(state_dim=0),
])
def test_problem_from_dict_validation(mutate):
    doc = dict(P3_DOC)
    mutate(doc)
    with pytest.raises(ValueError):
        tp.problem_from_dict(doc)


def test_problem_from_dict_rejects_non_dict():
    with pytest.raises(ValueError):
        tp.problem_from_dict(["not", "a", "mapping"])


def test_load_problem_builtin_and_file(tmp_path):
    assert tp.load_problem("p2").state_dim == 2
    path = tmp_path / "cubic.json"
    path.write_text(json.dumps(P3_DOC))
    spec = tp.load_problem(str(path))
    assert spec.name == "cubic-clone"
    assert spec.control_dim == 1
    with pytest.raises(ValueError):
        tp.load_problem(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ValueError):
        tp.load_problem(str(bad))


def test_shifted_cost_subtracts_static_value(p1, s1):
    # at v_bar = 0 the shifted and raw rates coincide
    assert tp.shifted_cost(p1, s1, np.array([2.0]),
                           np.array([1.0])) == pytest.approx(2.0)


def test_shifted_cost_with_offset_running_cost():
    doc = dict(P3_DOC, name="offset", dynamics=["u1"],
               cost_rate="(y1 - 1.0)^2 + u1^2 + 1.0")
    off = tp.problem_from_dict(doc)
    static = tp.solve_static(off)
    assert static.v_bar == pytest.approx(1.0, abs=1e-10)
    # the constant offset cancels out of the shifted rate
    assert tp.shifted_cost(off, static, np.array([2.0]),
                           np.array([1.0])) == pytest.approx(2.0, abs=1e-10)

import numpy as np
import pytest

import turnpike as tp


@pytest.fixture(scope="session")
def p1():
    return tp.builtin_problem("p1")


@pytest.fixture(scope="session")
def p2():
    return tp.builtin_problem("p2")


@pytest.fixture(scope="session")
def p3():
    return tp.builtin_problem("p3")


@pytest.fixture(scope="session")
def s1(p1):
    return tp.solve_static(p1)


@pytest.fixture(scope="session")
def s2(p2):
    return tp.solve_static(p2)


@pytest.fixture(scope="session")
def s3(p3):
    return tp.solve_static(p3)


@pytest.fixture(scope="session")
def p1_t5(p1, s1):
    """P1 two-point solve 0 -> 0 over T=5, shared by several test modules."""
    return tp.solve_finite_horizon(p1, s1, 5.0, np.array([0.0]),
                                   np.array([0.0]))


def make_traj(spec, x, controls, grid):
    """Wrap raw RK4 states in a Trajectory (costs not filled in)."""
    controls = np.asarray(controls, dtype=float)
    states = tp.integrate(spec, x, controls, grid)
    return tp.Trajectory(grid=np.asarray(grid, dtype=float), states=states,
                         controls=controls, shifted_cost_total=float("nan"),
                         raw_cost_total=float("nan"),
                         endpoint_violation=float("nan"), diagnostics={})


@pytest.fixture(scope="session")
def rollout():
    return make_traj

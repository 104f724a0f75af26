import math

import numpy as np
import numpy.testing as npt
import pytest
from scipy.integrate import solve_ivp

from funnelsim.errors import NoRelativeDegree, ParameterError
from funnelsim.linear_analysis import StateSpace
from funnelsim.systems import (
    DeadZone,
    dead_zone,
    dead_zone_example_system,
    integrator_chain,
    linear_to_functional,
    mass_on_car,
    mass_on_car_state_space,
    probe_example_system,
    robot_coriolis,
    robot_gravity,
    robot_inertia,
    robot_manipulator,
)

tols = dict(rtol=1e-10, atol=1e-12)


# -- mass on car -------------------------------------------------------------------

def test_mass_on_car_markov_parameters():
    ss = mass_on_car_state_space(4, 1, 2, 1, math.pi / 4)
    npt.assert_allclose(ss.C @ ss.B, [[0.0]], atol=1e-15)
    npt.assert_allclose(ss.C @ ss.A @ ss.B, [[1.0 / 9.0]], rtol=1e-13)

    ss0 = mass_on_car_state_space(4, 1, 2, 1, 0.0)
    npt.assert_allclose(ss0.C @ ss0.A @ ss0.B, [[0.0]], atol=1e-15)
    npt.assert_allclose(ss0.C @ ss0.A @ ss0.A @ ss0.B, [[0.25]], rtol=1e-13)


def test_mass_on_car_flat_coupling_entry():
    # acceleration row of the relative coordinate: -(mu1+mu2) k = -2.5
    ss0 = mass_on_car_state_space(4, 1, 2, 1, 0.0)
    assert ss0.A[3, 2] == pytest.approx(-2.5, rel=1e-14)
    assert ss0.A[3, 3] == pytest.approx(-1.25, rel=1e-14)


def test_mass_on_car_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        mass_on_car_state_space(0.0, 1, 2, 1, 0.0)
    with pytest.raises(ParameterError):
        mass_on_car_state_space(4, 1, 2, 1, math.pi / 2)


def test_mass_on_car_state_space_matches_second_order_form():
    # independent oracle: integrate the raw coupled second-order equations
    m1, m2, k, d, theta = 4.0, 1.0, 2.0, 1.0, math.pi / 4
    ss = mass_on_car_state_space(m1, m2, k, d, theta)
    u = lambda t: math.sin(t)

    M = np.array([[m1 + m2, m2 * math.cos(theta)],
                  [m2 * math.cos(theta), m2]])

    def second_order(t, x):
        z, zdot, s, sdot = x
        rhs = np.array([u(t), -(k * s + d * sdot)])
        acc = np.linalg.solve(M, rhs)
        return [zdot, acc[0], sdot, acc[1]]

    def state_space(t, x):
        return ss.A @ x + ss.B[:, 0] * u(t)

    x0 = np.array([0.1, 0.0, -0.2, 0.3])
    sol_a = solve_ivp(second_order, (0, 2), x0, rtol=1e-11, atol=1e-12,
                      dense_output=True)
    sol_b = solve_ivp(state_space, (0, 2), x0, rtol=1e-11, atol=1e-12,
                      dense_output=True)
    for t in np.linspace(0, 2, 50):
        ya = ss.C @ sol_a.sol(t)
        yb = ss.C @ sol_b.sol(t)
        npt.assert_allclose(ya, yb, rtol=1e-7, atol=1e-9)


def test_mass_on_car_functional_reduction():
    ss, sys_ = mass_on_car(4, 1, 2, 1, 0.0)
    assert sys_.r == 3 and sys_.m == 1
    npt.assert_allclose(sys_.T.Q, [[-2.0]], atol=1e-10)
    ss2, sys2 = mass_on_car(4, 1, 2, 1, math.pi / 4)
    eigs = np.linalg.eigvals(sys2.T.Q)
    npt.assert_allclose(np.sort(eigs.imag), [-math.sqrt(3), math.sqrt(3)],
                        rtol=1e-9)
    npt.assert_allclose(eigs.real, [-1.0, -1.0], rtol=1e-9)


# -- robot --------------------------------------------------------------------------

def test_robot_inertia_at_origin():
    npt.assert_allclose(robot_inertia(1, 1, 1, 1, (0.0, 0.0)),
                        [[5.0, 2.0], [2.0, 1.0]], rtol=1e-15)


def test_robot_gravity_at_origin():
    npt.assert_allclose(robot_gravity(1, 1, 1, 1, 9.81, (0.0, 0.0)),
                        [29.43, 9.81], rtol=1e-14)


def test_robot_coriolis_vanishes_at_rest():
    rng = np.random.default_rng(1)
    for _ in range(10):
        y = rng.uniform(-3, 3, 2)
        npt.assert_array_equal(robot_coriolis(1, 1, 1, 1, y, (0.0, 0.0)),
                               np.zeros((2, 2)))


def test_robot_inverse_consistency():
    # M(y) f + C(y, y') y' + G(y) = u on random samples
    sys_ = robot_manipulator(1, 1, 1, 1)
    rng = np.random.default_rng(3)
    for _ in range(100):
        z = rng.standard_normal(4)
        u = rng.standard_normal(2) * 5
        f = sys_.f(np.zeros(1), z, u)
        lhs = (robot_inertia(1, 1, 1, 1, z[:2]) @ f
               + robot_coriolis(1, 1, 1, 1, z[:2], z[2:]) @ z[2:]
               + robot_gravity(1, 1, 1, 1, 9.81, z[:2]))
        npt.assert_allclose(lhs, u, rtol=1e-10, atol=1e-10)


def test_robot_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        robot_manipulator(1, 1, 0.0, 1)


# -- dead zone ----------------------------------------------------------------------

def test_dead_zone_unit_instance():
    beta = DeadZone.affine(-1.0, 1.0)
    assert beta(0.5) == 0.0
    assert beta(2.0) == 1.0
    assert beta(-3.0) == -2.0
    assert beta(1.0) == 0.0 and beta(-1.0) == 0.0  # continuous at the edges


def test_dead_zone_custom_branches():
    dz = dead_zone(-0.5, 2.0, D_l=lambda v: (v + 0.5) ** 3,
                   D_r=lambda v: math.sqrt(v - 2.0))
    assert dz(1.0) == 0.0
    assert dz(3.0) == pytest.approx(1.0)
    assert dz(-1.5) == pytest.approx(-1.0)


def test_dead_zone_requires_straddling_deadband():
    with pytest.raises(ParameterError):
        DeadZone.affine(0.5, 1.0)


def test_dead_zone_example_dynamics_values():
    beta = DeadZone.affine(-1.0, 1.0)
    sys_ = dead_zone_example_system((1.0, -2.0, 1.0, 2.0, 1.0), beta)
    # all state terms vanish: f reduces to the dead-zone branch value
    npt.assert_allclose(sys_.f(np.zeros(1), np.zeros(3), [5.0]), [4.0])
    npt.assert_allclose(sys_.f(np.zeros(1), np.zeros(3), [0.5]), [0.0])
    # hand substitution at x = (1, 1), eta = 0, u = 0
    npt.assert_allclose(sys_.f(np.zeros(1), np.array([1.0, 1.0, 0.0]), [0.0]),
                        [1.0], rtol=1e-14)
    # internal dynamics at the origin: eta' = -eta^3
    op = sys_.T
    for z in (0.5, -2.0):
        npt.assert_allclose(op.state_deriv(0.0, np.zeros(2), np.array([z])),
                            [-z**3], rtol=1e-14)


def test_dead_zone_example_initial_history():
    beta = DeadZone.affine(-1.0, 1.0)
    sys_ = dead_zone_example_system((1, -2, 1, 2, 1), beta, xi0=(2.0, 0.5))
    x0 = sys_.initial_state()
    npt.assert_allclose(x0, [2.0, (1 + 4.0) * 0.5])


# -- probe example --------------------------------------------------------------------

def test_probe_example_zeros_and_values():
    sys_ = probe_example_system()
    f = lambda u: sys_.f(np.zeros(1), np.zeros(1), [u])[0]
    assert f(0.0) == 0.0
    u1 = math.exp(math.pi) - 1.0
    assert u1 == pytest.approx(22.1407, abs=5e-5)
    assert f(u1) == pytest.approx(0.0, abs=1e-12)
    assert f(-u1) == pytest.approx(0.0, abs=1e-12)
    assert f(1.0) == pytest.approx(math.sin(math.log(2.0)), rel=1e-14)
    assert f(1.0) == pytest.approx(0.6390, abs=5e-5)


# -- linear reduction ------------------------------------------------------------------

def test_linear_to_functional_double_integrator():
    ss = StateSpace(np.array([[0.0, 1.0], [0.0, 0.0]]),
                    np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    sys_ = linear_to_functional(ss, [0.3, -0.1])
    assert sys_.r == 2
    assert sys_.T.state_dim == 0
    # T vanishes and f(d, z, u) = u
    z = sys_.T.output(0.0, np.array([1.0, 2.0]), np.zeros(0))
    npt.assert_allclose(z, [0.0], atol=1e-14)
    npt.assert_allclose(sys_.f(np.zeros(1), z, [3.0]), [3.0])
    npt.assert_allclose(sys_.initial_state(), [0.3, -0.1])


def test_linear_to_functional_matches_state_space_solution():
    # closed-form cross-check: y from the functional form equals C e^{At} x0
    rng = np.random.default_rng(6)
    ss = mass_on_car_state_space(4, 1, 2, 1, math.pi / 4)
    x0 = rng.standard_normal(4)
    sys_ = linear_to_functional(ss, x0)
    npt.assert_allclose(sys_.initial_state(),
                        [(ss.C @ x0).item(), (ss.C @ ss.A @ x0).item()],
                        rtol=1e-12)

    u = lambda t: math.sin(3 * t)

    def full_state(t, x):
        return ss.A @ x + ss.B[:, 0] * u(t)

    sol = solve_ivp(full_state, (0, 3), x0, rtol=1e-11, atol=1e-13,
                    dense_output=True)

    op = sys_.T

    def functional(t, x):
        # x = (y, y', eta); feed the true (y, y') history values
        z = op.output(t, x[:2], x[2:])
        acc = sys_.f(sys_.disturbance(t), z, [u(t)])
        deta = op.state_deriv(t, x[:2], x[2:])
        return np.concatenate([[x[1]], acc, deta])

    xf0 = np.concatenate([sys_.initial_state(), op.committed_state])
    sol_f = solve_ivp(functional, (0, 3), xf0, rtol=1e-11, atol=1e-13,
                      dense_output=True)
    for t in np.linspace(0.1, 3.0, 30):
        y_ss = (ss.C @ sol.sol(t)).item()
        y_fn = sol_f.sol(t)[0]
        npt.assert_allclose(y_fn, y_ss, rtol=1e-7, atol=1e-9)


def test_linear_to_functional_requires_relative_degree():
    ss = StateSpace(np.array([[0.0, -1.0], [1.0, 0.0]]),
                    np.diag([1.0, 0.0]), np.eye(2))
    with pytest.raises(NoRelativeDegree):
        linear_to_functional(ss, np.zeros(2))


def test_integrator_chain():
    sys_ = integrator_chain(3, 1, [1.0, 0.0, -0.5])
    npt.assert_allclose(sys_.initial_state(), [1.0, 0.0, -0.5])
    npt.assert_allclose(sys_.f(np.zeros(1), np.zeros(1), [2.5]), [2.5])
    with pytest.raises(ParameterError):
        integrator_chain(3, 1, [1.0, 0.0])

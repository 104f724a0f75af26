import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funnelsim.controller import (
    BALL_GUARD,
    baseline_control_r2,
    baseline_control_r2_aux,
    baseline_control_r3,
    baseline_control_r3_aux,
    build_info_vector,
    check_initial_condition,
    funnel_control,
    gamma,
    rho,
)
from funnelsim.design import AlphaFn, DesignParams, FunnelFn, SwitchingFn
from funnelsim.errors import DomainError, FunnelViolation, ShapeError

STD = AlphaFn.standard()


# -- gamma -------------------------------------------------------------------

def test_gamma_at_zero():
    npt.assert_array_equal(gamma(np.zeros(2), STD), np.zeros(2))


def test_gamma_hand_values():
    npt.assert_allclose(gamma(np.array([0.5, 0.0]), STD),
                        [2.0 / 3.0, 0.0], rtol=1e-15)
    npt.assert_allclose(gamma(0.9, STD), [0.9 / 0.19], rtol=1e-12)
    assert gamma(0.9, STD)[0] == pytest.approx(4.7368, abs=5e-5)


def test_gamma_rejects_boundary():
    with pytest.raises(DomainError):
        gamma(np.array([1.0, 0.0]), STD)
    with pytest.raises(DomainError):
        gamma(np.array([0.8, 0.8]), STD)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-0.7, 0.7), min_size=1, max_size=4))
def test_gamma_never_shrinks(ws):
    w = np.array(ws)
    if np.linalg.norm(w) >= 0.99:
        return
    g = gamma(w, STD)
    nw, ng = np.linalg.norm(w), np.linalg.norm(g)
    assert ng >= nw - 1e-15
    # equality only where the gain is exactly 1 (w = 0, or norms so small the
    # gain rounds to 1 in floating point)
    if STD.eval(nw * nw) > 1.0:
        assert ng > nw


# -- rho ---------------------------------------------------------------------

def test_rho_level_one_is_identity():
    res = rho([np.array([0.3])], STD)
    npt.assert_array_equal(res.value, [0.3])
    assert res.in_domain


def test_rho_hand_values():
    res = rho([np.array([0.0]), np.array([0.3])], STD)
    npt.assert_allclose(res.value, [0.3], rtol=1e-15)
    assert res.in_domain

    res = rho([np.array([0.5]), np.array([0.5])], STD)
    npt.assert_allclose(res.value, [0.5 + 0.5 / 0.75], rtol=1e-14)
    assert res.value[0] == pytest.approx(1.1667, abs=5e-5)
    assert not res.in_domain


def test_rho_raises_on_intermediate_exit():
    # level 1 already outside the ball: gamma is undefined there
    with pytest.raises(DomainError) as err:
        rho([np.array([1.2]), np.array([0.0]), np.array([0.0])], STD)
    assert err.value.level == 1


def _unrolled_rho3(e1, e2, e3, alpha):
    def g(w):
        return alpha.eval(float(w @ w)) * w
    return e3 + g(e2 + g(e1))


def test_rho_matches_unrolled_formula_on_random_in_domain_points():
    # constructive sampling: pick targets inside the ball and back out etas
    rng = np.random.default_rng(42)
    m = 2
    for _ in range(1000):
        targets = []
        for _ in range(3):
            v = rng.standard_normal(m)
            v *= rng.uniform(0.0, 0.95) / max(np.linalg.norm(v), 1e-12)
            targets.append(v)
        e1 = targets[0]
        e2 = targets[1] - gamma(targets[0], STD)
        e3 = targets[2] - gamma(targets[1], STD)
        res = rho([e1, e2, e3], STD)
        assert res.in_domain
        npt.assert_allclose(res.value, _unrolled_rho3(e1, e2, e3, STD),
                            rtol=0, atol=1e-12)
        npt.assert_allclose(res.value, targets[2], rtol=0, atol=1e-12)


# -- information vector --------------------------------------------------------

def test_info_vector_error_blocks_then_raw():
    info = build_info_vector([np.array([1.0]), np.array([2.0]), np.array([3.0])],
                             [np.array([1.0])], r=3, r_hat=1)
    npt.assert_array_equal(info, [0.0, 2.0, 3.0])


def test_info_vector_full_error():
    info = build_info_vector([[1.0], [2.0]], [[0.5], [0.5]], r=2, r_hat=2)
    npt.assert_array_equal(info, [0.5, 1.5])


def test_info_vector_shape_errors():
    with pytest.raises(ShapeError):
        build_info_vector([[1.0]], [[1.0]], r=2, r_hat=1)
    with pytest.raises(ShapeError):
        build_info_vector([[1.0], [1.0]], [[1.0], [1.0]], r=2, r_hat=1)
    with pytest.raises(ShapeError):
        build_info_vector([[1.0], [1.0, 2.0]], [[1.0]], r=2, r_hat=1)


# -- feedback law --------------------------------------------------------------

def _params(r=1, r_hat=None, n=None, phi=None):
    return DesignParams(phi=phi or FunnelFn.recip_exp(1.0, 1.0, 1.0),
                        n=n or SwitchingFn.probe(), alpha=STD,
                        r=r, r_hat=r_hat or r)


def test_feedback_zero_info_gives_zero_input():
    # r = 2, m = 1: exact tracking with all derivatives zero
    u, w = funnel_control(1.0, np.zeros(2), _params(r=2))
    npt.assert_array_equal(u, np.zeros(1))
    npt.assert_array_equal(w, np.zeros(1))
    # r = 2, m = 2
    u2, w2 = funnel_control(1.0, np.zeros(4), _params(r=2))
    npt.assert_array_equal(u2, np.zeros(2))
    npt.assert_array_equal(w2, np.zeros(2))


def test_feedback_probe_form_matches_composition():
    # with N(s) = s sin s and the standard gain, u = a sin(a) w, a = 1/(1-w^2)
    phi = FunnelFn.affine(1.0, 0.0)  # constant 1
    p = _params(r=1, n=SwitchingFn.probe(), phi=phi)
    info = np.array([0.6])
    u, w = funnel_control(0.0, info, p)
    a = 1.0 / (1.0 - 0.36)
    npt.assert_allclose(w, [0.6], rtol=1e-15)
    npt.assert_allclose(u, [a * math.sin(a) * 0.6], rtol=1e-14)


def test_feedback_identity_gain_hand_value():
    phi = FunnelFn.affine(1.0, 0.0)
    p = _params(r=1, n=SwitchingFn.identity(), phi=phi)
    u, w = funnel_control(0.0, np.array([0.5]), p)
    npt.assert_allclose(u, [(4.0 / 3.0) * 0.5], rtol=1e-14)
    assert u[0] == pytest.approx(0.6667, abs=5e-5)


def test_feedback_depends_on_info_only_through_scaled_vector():
    # two (phi, info) pairs with equal phi*info give identical (u, w)
    p1 = _params(r=2, phi=FunnelFn.affine(2.0, 0.0))
    p2 = _params(r=2, phi=FunnelFn.affine(1.0, 0.0))
    info = np.array([0.2, -0.1])
    u1, w1 = funnel_control(0.0, info, p1)
    u2, w2 = funnel_control(0.0, 2.0 * info, p2)
    npt.assert_allclose(u1, u2, rtol=1e-15)
    npt.assert_allclose(w1, w2, rtol=1e-15)


def test_feedback_norm_blows_up_near_ball_boundary():
    phi = FunnelFn.affine(1.0, 0.0)
    p = _params(r=1, n=SwitchingFn.identity(), phi=phi)
    u, _ = funnel_control(0.0, np.array([1.0 - 1e-4]), p)
    assert np.linalg.norm(u) > 1e3


def test_feedback_partial_reference_information_form():
    # r = 2, r_hat = 1: the signal is w = phi*ydot + gamma(phi*e)
    phi = FunnelFn.recip_exp(1.0, 0.5, 1.0)
    p = DesignParams(phi=phi, n=SwitchingFn.probe(), alpha=STD, r=2, r_hat=1)
    t, e, ydot = 0.7, 0.4, -0.3
    info = build_info_vector([[e + 1.0], [ydot]], [[1.0]], r=2, r_hat=1)
    _, w = funnel_control(t, info, p)
    ph = phi.eval(t)
    expect = ph * ydot + (ph * e) / (1.0 - (ph * e) ** 2)
    npt.assert_allclose(w, [expect], rtol=1e-14)
    # r = 2, r_hat = 2: w = phi*edot + gamma(phi*e)
    p2 = DesignParams(phi=phi, n=SwitchingFn.probe(), alpha=STD, r=2, r_hat=2)
    edot = 0.25
    info2 = build_info_vector([[e], [edot]], [[0.0], [0.0]], r=2, r_hat=2)
    _, w2 = funnel_control(t, info2, p2)
    expect2 = ph * edot + (ph * e) / (1.0 - (ph * e) ** 2)
    npt.assert_allclose(w2, [expect2], rtol=1e-14)


def test_feedback_violation_reports_time_and_level():
    p = _params(r=2, phi=FunnelFn.affine(1.0, 0.0))
    with pytest.raises(FunnelViolation) as err:
        funnel_control(3.25, np.array([0.999, 5.0]), p)
    assert err.value.t == 3.25
    assert err.value.level == 2


# -- initial condition ----------------------------------------------------------

def test_initial_condition_trivial_when_phi_starts_at_zero():
    p = _params(r=2, phi=FunnelFn.poly(1.0, 2))
    verdict = check_initial_condition(p, np.array([100.0, -50.0]))
    assert verdict.accepted


def test_initial_condition_scalar_rule():
    p = _params(r=1, phi=FunnelFn.affine(1.0, 0.0))
    assert check_initial_condition(p, np.array([0.5])).accepted
    res = check_initial_condition(p, np.array([1.5]))
    assert not res.accepted and res.level == 1


def test_initial_condition_second_level_rejection():
    # gamma(0.9) = 4.7368... so any second entry keeps level 2 outside
    p = _params(r=2, phi=FunnelFn.affine(1.0, 0.0))
    res = check_initial_condition(p, np.array([0.9, 0.0]))
    assert not res.accepted and res.level == 2


def test_initial_condition_agrees_with_rho_membership():
    rng = np.random.default_rng(7)
    p = _params(r=2, phi=FunnelFn.affine(0.8, 0.0))
    for _ in range(200):
        info = rng.uniform(-2.0, 2.0, size=2)
        verdict = check_initial_condition(p, info)
        try:
            res = rho([np.array([0.8 * info[0]]), np.array([0.8 * info[1]])], STD)
            expected = res.in_domain
        except DomainError:
            expected = False
        assert verdict.accepted == expected


# -- comparison controllers -----------------------------------------------------

def test_baseline_r2_zero_error_zero_input():
    u = baseline_control_r2(0.0, [0.0], [0.0], 1.0, 1.0, STD)
    npt.assert_array_equal(u, [0.0])


def test_baseline_r2_hand_value():
    u, w1 = baseline_control_r2_aux(0.0, [0.5], [0.0], 1.0, 1.0, STD)
    npt.assert_allclose(w1, [2.0 / 3.0], rtol=1e-15)
    npt.assert_allclose(u, [-1.2], rtol=1e-12)


def test_baseline_r2_domain_error():
    with pytest.raises(DomainError):
        baseline_control_r2(0.0, [1.0], [0.0], 1.0, 1.0, STD)


def test_baseline_r3_zero_error_zero_input():
    u = baseline_control_r3(0.0, [0.0], [0.0], [0.0], 1.0, 1.0, 1.0, 0.0, STD)
    npt.assert_array_equal(u, [0.0])


def test_baseline_r3_hand_value():
    # phi = phi1 = phi2 = 1, phi' = 0, e = 0.1, derivatives zero
    u, w1, w2 = baseline_control_r3_aux(0.0, [0.1], [0.0], [0.0],
                                        1.0, 1.0, 1.0, 0.0, STD)
    w1_expect = 0.1 / 0.99
    assert w1[0] == pytest.approx(w1_expect, rel=1e-14)
    assert w1[0] == pytest.approx(0.10101, abs=5e-6)
    a2 = 1.0 / (1.0 - w1_expect**2)
    w2_expect = a2 * w1_expect
    assert w2[0] == pytest.approx(w2_expect, rel=1e-13)
    u_expect = -w2_expect / (1.0 - w2_expect**2)
    assert u[0] == pytest.approx(u_expect, rel=1e-13)


def test_baseline_r3_derivative_term_matches_finite_difference():
    # w2 contains d/dt [alpha(phi^2 e^2) e]; check against a numeric derivative
    phi = FunnelFn.recip_exp(2.0, 0.2, 1.0)

    def e_of(t):
        return np.array([0.3 * math.sin(t)])

    def e_dot(t):
        return np.array([0.3 * math.cos(t)])

    def w1_of(t):
        e = e_of(t)
        return e_dot(t) + STD.eval(phi.eval(t) ** 2 * float(e @ e)) * e

    t0, h = 1.3, 1e-6
    e_ddot = np.array([-0.3 * math.sin(t0)])
    _, w1, w2 = baseline_control_r3_aux(
        t0, e_of(t0), e_dot(t0), e_ddot, phi.eval(t0), phi.eval(t0),
        phi.eval(t0), phi.deriv(t0), STD)
    w1_dot_fd = (w1_of(t0 + h) - w1_of(t0 - h)) / (2 * h)
    a2 = STD.eval(phi.eval(t0) ** 2 * float(w1 @ w1))
    npt.assert_allclose(w2, w1_dot_fd + a2 * w1, rtol=1e-6)

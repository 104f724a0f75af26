import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funnelsim.bounds import (
    BoundsInput,
    alpha_dagger,
    alpha_tilde,
    apriori_bounds,
    check_against_trajectory,
)
from funnelsim.design import AlphaFn, DesignParams, FunnelFn, SwitchingFn
from funnelsim.errors import DegenerateInput, MismatchedScenario, ParameterError
from funnelsim.reference import ref_preset
from funnelsim.sim import SimConfig, Trajectory, simulate
from funnelsim.systems import integrator_chain

STD = AlphaFn.standard()


# -- gain inverse -----------------------------------------------------------------

def test_alpha_dagger_trivial_and_closed_form():
    assert alpha_dagger(STD, 0.0) == 0.0
    assert alpha_dagger(STD, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert alpha_dagger(STD, 3.0) == pytest.approx(0.75, abs=1e-15)


def test_alpha_dagger_inverse_property():
    for s in np.linspace(0.0, 0.99, 100):
        y = s * STD.eval(s)
        assert abs(alpha_dagger(STD, y) - s) < 1e-10


def test_alpha_dagger_bisection_agrees_with_closed_form():
    # run the generic bisection by hiding the standard-name fast path
    disguised = AlphaFn(eval=STD.eval, deriv=STD.deriv, name="disguised")
    for y in np.linspace(0.0, 100.0, 64):
        assert abs(alpha_dagger(disguised, y) - y / (1.0 + y)) < 1e-10


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1e6))
def test_alpha_dagger_in_unit_interval(y):
    s = alpha_dagger(STD, y)
    assert 0.0 <= s < 1.0


def test_alpha_tilde_values():
    assert alpha_tilde(STD, 0.0) == 1.0
    assert alpha_tilde(STD, 0.5) == pytest.approx(6.0, rel=1e-14)
    for s in np.linspace(0.0, 0.9, 30):
        expect = (1.0 + s) / (1.0 - s) ** 2
        assert alpha_tilde(STD, s) == pytest.approx(expect, rel=1e-13)


# -- recursion --------------------------------------------------------------------

def _bounds_input(phi, e0, r_hat=3, mu0=None):
    return BoundsInput(r_hat=r_hat, phi=phi, alpha=STD,
                       e0_derivs=np.asarray(e0, dtype=float).reshape(-1, 1),
                       mu0=mu0)


def test_recursion_affine_funnel_zero_start():
    res = apriori_bounds(_bounds_input(FunnelFn.affine(1.0, 1.0),
                                       [0.0, 0.0, 0.0]))
    # sequences carry one entry per recursion level 1..r_hat-1
    assert res.c.shape == res.mu.shape == (2,)
    assert res.e0.shape == (2, 1) and res.envelopes.shape == (2,)
    assert res.c[0] == pytest.approx(math.sqrt(2.0 / 3.0), abs=1e-10)
    assert res.mu[0] == pytest.approx(1.0 + res.c[0], rel=1e-14)
    # envelope of the first derivative: c2 + c1 / (1 - c1^2)
    expect = res.c[1] + res.c[0] / (1.0 - res.c[0] ** 2)
    assert res.envelopes[1] == pytest.approx(expect, rel=1e-14)
    assert np.all(res.c < 1.0) and np.all(res.c > 0.0)


def test_recursion_constant_funnel():
    res = apriori_bounds(_bounds_input(FunnelFn.affine(1.0, 0.0),
                                       [0.0, 0.0, 0.0], mu0=0.0))
    assert res.c[0] == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_recursion_initial_error_branch():
    # ||e_1^0||^2 above the gain-inverse threshold wins the max (r_hat = 2:
    # a start this close to the boundary degenerates the next level)
    res = apriori_bounds(_bounds_input(FunnelFn.affine(1.0, 0.0),
                                       [0.9, 0.0], r_hat=2, mu0=0.0))
    assert res.c[0] == pytest.approx(0.9, rel=1e-14)
    # and the degenerate continuation is reported as such
    with pytest.raises(DegenerateInput):
        apriori_bounds(_bounds_input(FunnelFn.affine(1.0, 0.0),
                                     [0.9, 0.0, 0.0], mu0=0.0))


def test_recursion_rejects_initial_error_at_one():
    with pytest.raises(DegenerateInput):
        apriori_bounds(_bounds_input(FunnelFn.affine(1.0, 0.0),
                                     [1.0, 0.0, 0.0], mu0=0.0))


def test_recursion_monotone_in_funnel_steepness():
    mu_prev = None
    for mu0 in np.linspace(0.0, 3.0, 13):
        res = apriori_bounds(_bounds_input(FunnelFn.affine(1.0, 0.0),
                                           [0.0, 0.0, 0.0], mu0=mu0))
        if mu_prev is not None:
            assert np.all(res.mu >= mu_prev - 1e-12)
        mu_prev = res.mu


def test_bounds_input_validation():
    with pytest.raises(ParameterError):
        _bounds_input(FunnelFn.affine(1.0, 1.0), [0.0], r_hat=1)
    with pytest.raises(ParameterError):
        _bounds_input(FunnelFn.poly(1.0, 2), [0.0, 0.0, 0.0])  # phi(0) = 0
    with pytest.raises(ParameterError):
        _bounds_input(FunnelFn.affine(1.0, 1.0), [0.0])  # not enough data


# -- trajectory check ----------------------------------------------------------------

def _conforming_run():
    sys_ = integrator_chain(3, 1, [1.0, 0.0, -0.5])
    params = DesignParams(phi=FunnelFn.affine(1.0, 1.0),
                          n=SwitchingFn.negated_identity(), alpha=STD,
                          r=3, r_hat=3)
    ref = ref_preset("cos")
    traj = simulate(sys_, params, ref, SimConfig(t_end=10.0))
    y0 = sys_.initial_state().reshape(3, 1)
    e0 = y0 - ref.derivs(0.0, 3)
    binp = BoundsInput(r_hat=3, phi=params.phi, alpha=STD, e0_derivs=e0)
    return traj, apriori_bounds(binp)


def test_check_against_conforming_trajectory():
    traj, res = _conforming_run()
    assert traj.status == "completed"
    assert check_against_trajectory(res, traj) == [True, True]


def test_check_flags_injected_violation():
    traj, res = _conforming_run()
    bad_e = traj.e.copy()
    bad_e[len(bad_e) // 2] = 2.0 * res.c[0] / traj.phi[len(bad_e) // 2]
    bad_y = traj.y_derivs.copy()
    from funnelsim.reference import ref_values

    mid = len(bad_e) // 2
    bad_y[mid, 0, :] = bad_e[mid] + ref_values(traj.ref, traj.t[mid:mid + 1])[0]
    bad = Trajectory(t=traj.t, y_derivs=bad_y, e=bad_e, w=traj.w, u=traj.u,
                     phi=traj.phi, phi_norm_e=traj.phi_norm_e,
                     status=traj.status, status_time=None, r=traj.r, m=traj.m,
                     controller=traj.controller, ref=traj.ref)
    verdicts = check_against_trajectory(res, bad)
    assert verdicts[0] is False


def test_check_rejects_mismatched_funnel():
    traj, res = _conforming_run()
    other = DesignParams(phi=FunnelFn.affine(2.0, 1.0),
                         n=SwitchingFn.negated_identity(), alpha=STD,
                         r=3, r_hat=3)
    bad = Trajectory(t=traj.t, y_derivs=traj.y_derivs, e=traj.e, w=traj.w,
                     u=traj.u, phi=traj.phi, phi_norm_e=traj.phi_norm_e,
                     status=traj.status, status_time=None, r=traj.r, m=traj.m,
                     controller=other, ref=traj.ref)
    with pytest.raises(MismatchedScenario):
        check_against_trajectory(res, bad)


def test_envelope_curves_shape():
    _, res = _conforming_run()
    ts = np.linspace(0.0, 10.0, 11)
    curves = res.envelope_values(ts)
    assert curves.shape == (11, 2)
    npt.assert_allclose(curves[0], res.envelopes, rtol=1e-14)
    npt.assert_allclose(curves[-1], res.envelopes / 11.0, rtol=1e-14)

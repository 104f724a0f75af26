"""Compiled integration kernel for the shipped plant/controller structures.

The generic integrator in :mod:`funnelsim.sim` evaluates arbitrary Python
callables per stage; scenarios whose closed loop rides close to the gain
singularity need millions of accepted steps, which pure-Python stepping
cannot deliver within the scenario runtime budgets. This module compiles
the identical Dormand-Prince 5(4) loop (same tableau, same rejection and
guard semantics) with numba for the closed set of shipped structures:

* plants: integrator chain, linear with internal dynamics, two-joint
  manipulator, dead-zone example (affine branches), direction-probe example;
* controllers: the funnel feedback with the standard gain alpha(s)=1/(1-s)
  and a switching function of kind probe / identity / negated-identity /
  scaled;
* funnel families: recip-exp, poly, exp, capped-exp, affine;
* references: sinusoid-term stacks (all shipped presets).

Anything else falls back to the generic path. Trajectory-level agreement of
the two paths is covered by tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import DesignParams

try:
    import numba

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

_SYS_CHAIN, _SYS_LINEAR, _SYS_ROBOT, _SYS_DEADZONE, _SYS_PROBE = 0, 1, 2, 3, 4
_N_PROBE, _N_NUSSBAUM, _N_IDENTITY, _N_NEGATED, _N_SCALED = 0, 1, 2, 3, 4
_PHI_RECIP_EXP, _PHI_POLY, _PHI_EXP, _PHI_CAPPED, _PHI_AFFINE = 0, 1, 2, 3, 4

_N_KIND_BY_NAME = {
    "surjective-probe": _N_PROBE,
    "identity": _N_IDENTITY,
    "negated-identity": _N_NEGATED,
    "scaled": _N_SCALED,
}
_PHI_FAMILY_BY_NAME = {
    "recip-exp": _PHI_RECIP_EXP,
    "poly": _PHI_POLY,
    "exp": _PHI_EXP,
    "capped-exp": _PHI_CAPPED,
    "affine": _PHI_AFFINE,
}


@dataclass
class FastPlan:
    """Scenario encoding consumed by the compiled kernel."""

    sys_kind: int
    sys_params: np.ndarray
    R: np.ndarray        # (r, m, m) for linear plants, else (0, 0, 0)
    S: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    Gamma: np.ndarray
    n_kind: int
    n_sigma: float
    phi_family: int
    phi_params: np.ndarray
    ref_terms: np.ndarray    # rows (out_idx, amp, omega, phase)
    ref_offsets: np.ndarray
    r: int
    r_hat: int
    m: int
    k_eta: int
    x0: np.ndarray


def plan_for(system, controller, ref) -> FastPlan | None:
    """Encode the scenario for the kernel, or None when unsupported."""
    if not HAVE_NUMBA:
        return None
    if not isinstance(controller, DesignParams):
        return None
    if not controller.alpha.is_standard:
        return None
    if system.h > 0.0:
        return None
    n_kind = _N_KIND_BY_NAME.get(controller.n.kind)
    if n_kind is None:
        return None
    if controller.n.kind == "surjective-probe":
        if controller.n.probe_form == "s-sin-s":
            n_kind = _N_PROBE
        elif controller.n.probe_form == "s2-cos-s":
            n_kind = _N_NUSSBAUM
        else:
            return None
    phi_family = _PHI_FAMILY_BY_NAME.get(controller.phi.family)
    if phi_family is None:
        return None
    phi_params = np.zeros(4)
    phi_params[:len(controller.phi.params)] = controller.phi.params

    m, r = system.m, system.r
    empty3 = np.zeros((0, 0, 0))
    empty2 = np.zeros((0, 0))
    sys_params = np.zeros(10)
    R, S, P, Q, Gamma = empty3, empty2, empty2, empty2, empty2
    k_eta = 0
    name = system.name
    if name in ("linear", "mass-on-car"):
        op = system.T
        if not hasattr(op, "R"):
            return None
        R = np.ascontiguousarray(np.stack(op.R))
        S, P, Q = (np.ascontiguousarray(M) for M in (op.S, op.P, op.Q))
        k_eta = op.initial_state.size
        Gamma = _linear_gamma(system)
        if Gamma is None:
            return None
        sys_kind = _SYS_LINEAR
    elif name == "integrator-chain":
        sys_kind = _SYS_CHAIN
    elif name == "robot":
        sys_kind = _SYS_ROBOT
        sys_params[:5] = system.fast_params
    elif name == "dead-zone-example":
        fp = getattr(system, "fast_params", None)
        if fp is None:
            return None
        sys_kind = _SYS_DEADZONE
        sys_params[:9] = fp
        k_eta = 1
    elif name == "probe-example":
        sys_kind = _SYS_PROBE
    else:
        return None

    terms = []
    for i, tlist in enumerate(ref.terms):
        for amp, om, ph in tlist:
            terms.append((float(i), amp, om, ph))
    ref_terms = np.array(terms, dtype=float).reshape(-1, 4)
    ref_offsets = np.asarray(ref.offsets, dtype=float)

    x0 = np.concatenate([system.initial_state(), system.T.committed_state])
    return FastPlan(sys_kind=sys_kind, sys_params=sys_params, R=R, S=S, P=P,
                    Q=Q, Gamma=Gamma, n_kind=n_kind,
                    n_sigma=float(getattr(controller.n, "sigma", 1.0)),
                    phi_family=phi_family, phi_params=phi_params,
                    ref_terms=ref_terms, ref_offsets=ref_offsets,
                    r=r, r_hat=controller.r_hat, m=m, k_eta=k_eta, x0=x0)


def _linear_gamma(system):
    op = system.T
    probe = np.zeros(system.m)
    cols = []
    base = op.output(0.0, np.zeros(system.r * system.m),
                     np.zeros(op.state_dim))
    f0 = system.f(system.disturbance(0.0), base, probe)
    for j in range(system.m):
        e_j = np.zeros(system.m)
        e_j[j] = 1.0
        cols.append(system.f(system.disturbance(0.0), base, e_j) - f0)
    return np.ascontiguousarray(np.stack(cols, axis=1))


if HAVE_NUMBA:
    _njit = numba.njit(cache=True, fastmath=False)

    @_njit
    def _phi_eval(family, p, t):
        if family == _PHI_RECIP_EXP:
            return 1.0 / (p[0] * math.exp(-p[2] * t) + p[1])
        if family == _PHI_POLY:
            return p[0] * t ** p[1]
        if family == _PHI_EXP:
            return math.expm1(p[0] * t)
        if family == _PHI_CAPPED:
            v = math.expm1(p[0] * t)
            return v if v < p[1] else p[1]
        return p[0] + p[1] * t

    @_njit
    def _n_eval(kind, sigma, s):
        if kind == _N_PROBE:
            return s * math.sin(s)
        if kind == _N_NUSSBAUM:
            return s * s * math.cos(s)
        if kind == _N_IDENTITY:
            return s
        if kind == _N_NEGATED:
            return -s
        return sigma * s

    @_njit
    def _ref_fill(terms, offsets, t, count, out):
        m = offsets.shape[0]
        for k in range(count):
            for j in range(m):
                out[k, j] = offsets[j] if k == 0 else 0.0
        for row in range(terms.shape[0]):
            j = int(terms[row, 0])
            amp = terms[row, 1]
            om = terms[row, 2]
            ph = terms[row, 3]
            for k in range(count):
                out[k, j] += amp * om**k * math.sin(om * t + ph + k * 0.5 * math.pi)

    @_njit
    def _controller(t, X, terms, offsets, r, r_hat, m, phi_family, phi_params,
                    n_kind, n_sigma, w_guard, refbuf, cur, u_out, w_out):
        # returns 0 on success, or the first failing recursion level
        guard2 = (1.0 - 1e-12) ** 2
        phi_t = _phi_eval(phi_family, phi_params, t)
        _ref_fill(terms, offsets, t, r_hat, refbuf)
        for j in range(m):
            cur[j] = phi_t * (X[j] - refbuf[0, j])
        for k in range(1, r):
            n2 = 0.0
            for j in range(m):
                n2 += cur[j] * cur[j]
            if n2 >= guard2:
                return k
            a = 1.0 / (1.0 - n2)
            for j in range(m):
                base = X[k * m + j] - (refbuf[k, j] if k < r_hat else 0.0)
                cur[j] = phi_t * base + a * cur[j]
        n2 = 0.0
        for j in range(m):
            n2 += cur[j] * cur[j]
        if n2 >= guard2 or math.sqrt(n2) > w_guard:
            return r
        gain = _n_eval(n_kind, n_sigma, 1.0 / (1.0 - n2))
        for j in range(m):
            w_out[j] = cur[j]
            u_out[j] = gain * cur[j]
        return 0

    @_njit
    def _plant_rhs(sys_kind, sp, R, S, P, Q, Gamma, t, X, u, r, m, k_eta, out):
        n_y = r * m
        for j in range(n_y - m):
            out[j] = X[j + m]
        if sys_kind == _SYS_CHAIN:
            for j in range(m):
                out[n_y - m + j] = u[j]
        elif sys_kind == _SYS_LINEAR:
            for i in range(m):
                acc = 0.0
                for k in range(r):
                    for j in range(m):
                        acc += R[k, i, j] * X[k * m + j]
                for j in range(k_eta):
                    acc += S[i, j] * X[n_y + j]
                for j in range(m):
                    acc += Gamma[i, j] * u[j]
                out[n_y - m + i] = acc
            for i in range(k_eta):
                acc = 0.0
                for j in range(k_eta):
                    acc += Q[i, j] * X[n_y + j]
                for j in range(m):
                    acc += P[i, j] * X[j]
                out[n_y + i] = acc
        elif sys_kind == _SYS_ROBOT:
            m1, m2, l1, l2, g = sp[0], sp[1], sp[2], sp[3], sp[4]
            q2 = X[1]
            v1, v2 = X[2], X[3]
            c2 = math.cos(q2)
            s2 = math.sin(q2)
            a = m1 * l1 * l1 + m2 * (l1 * l1 + l2 * l2 + 2 * l1 * l2 * c2)
            b = m2 * (l2 * l2 + l1 * l2 * c2)
            d_ = m2 * l2 * l2
            h = m2 * l1 * l2 * s2
            c1 = math.cos(X[0])
            c12 = math.cos(X[0] + q2)
            g1 = g * (m1 * l1 * c1 + m2 * (l1 * c1 + l2 * c12))
            g2 = g * m2 * l2 * c12
            r1 = u[0] + (2 * h * v1 * v1 + h * v2 * v2) - g1
            r2 = u[1] + h * v1 * v1 - g2
            det = a * d_ - b * b
            out[2] = (d_ * r1 - b * r2) / det
            out[3] = (a * r2 - b * r1) / det
        elif sys_kind == _SYS_DEADZONE:
            a1, a2, a3, a4, a5 = sp[0], sp[1], sp[2], sp[3], sp[4]
            b_l, b_r, sl_l, sl_r = sp[5], sp[6], sp[7], sp[8]
            x1, x2, eta = X[0], X[1], X[2]
            uu = u[0]
            if uu >= b_r:
                b = sl_r * (uu - b_r)
            elif uu <= b_l:
                b = sl_l * (uu - b_l)
            else:
                b = 0.0
            one = 1.0 + x1 * x1
            out[1] = 2.0 * x1 * x2 * x2 / one + a2 * x2 \
                + one * (a1 * x1 + a3 * eta + b)
            out[2] = -eta * eta * (a4 * x1 + a5 * x2 / one + eta)
        else:  # probe example
            uu = u[0]
            out[0] = uu * math.sin(math.log(1.0 + abs(uu)))

    _C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0

    @_njit
    def _dp45_kernel(state, X, t_end, rel_tol, abs_tol, w_guard,
                     max_shrinks, min_dt, max_dt, max_steps,
                     sys_kind, sp, R, S, P, Q, Gamma,
                     terms, offsets, r, r_hat, m, k_eta,
                     phi_family, phi_params, n_kind, n_sigma,
                     A, E, rows, n_rows):
        # state: [t, dt, steps_done, shrinks]; rows: per accepted step
        # (t, X..., u..., w...). Returns (status, rows_written):
        # 0 completed, 1 domain-exit, 2 step-failure, 3 buffer full.
        nx = X.shape[0]
        t = state[0]
        dt = state[1]
        steps = state[2]
        shrinks = int(state[3])
        refbuf = np.zeros((r_hat, m))
        cur = np.zeros(m)
        u_s = np.zeros(m)
        w_s = np.zeros(m)
        u_acc = np.zeros(m)
        w_acc = np.zeros(m)
        tmp = np.zeros(nx)
        K = np.zeros((7, nx))
        written = 0
        # left-endpoint slope; the committed point was already accepted, so
        # this evaluation repeats a previously successful one
        bad = _controller(t, X, terms, offsets, r, r_hat, m, phi_family,
                          phi_params, n_kind, n_sigma, w_guard, refbuf,
                          cur, u_s, w_s)
        if bad != 0:
            state[0] = t
            state[1] = dt
            state[2] = steps
            state[3] = shrinks
            return 1, written
        _plant_rhs(sys_kind, sp, R, S, P, Q, Gamma, t, X, u_s, r, m,
                   k_eta, K[0])
        while t < t_end - 1e-12:
            if steps >= max_steps:
                status = 2
                state[0] = t
                state[1] = dt
                state[2] = steps
                state[3] = shrinks
                return status, written
            steps += 1
            if dt > t_end - t:
                dt = t_end - t
            if max_dt > 0 and dt > max_dt:
                dt = max_dt
            if dt < min_dt:
                state[0] = t
                state[1] = dt
                state[2] = steps
                state[3] = shrinks
                # stalling inside a violation streak is a domain exit
                return (1 if shrinks > 0 else 2), written
            bad = 0
            for i in range(1, 7):
                for j in range(nx):
                    acc = 0.0
                    for p_ in range(i):
                        acc += A[i, p_] * K[p_, j]
                    tmp[j] = X[j] + dt * acc
                if i == 1:
                    c = _C2
                elif i == 2:
                    c = _C3
                elif i == 3:
                    c = _C4
                elif i == 4:
                    c = _C5
                else:
                    c = 1.0
                ts = t + c * dt
                bad = _controller(ts, tmp, terms, offsets, r, r_hat, m,
                                  phi_family, phi_params, n_kind, n_sigma,
                                  w_guard, refbuf, cur, u_s, w_s)
                if bad != 0:
                    break
                _plant_rhs(sys_kind, sp, R, S, P, Q, Gamma, ts, tmp, u_s,
                           r, m, k_eta, K[i])
                if i == 6:
                    for j in range(m):
                        u_acc[j] = u_s[j]
                        w_acc[j] = w_s[j]
            if bad != 0:
                dt *= 0.5
                shrinks += 1
                if shrinks > max_shrinks:
                    state[0] = t
                    state[1] = dt
                    state[2] = steps
                    state[3] = shrinks
                    return 1, written
                continue
            errn = 0.0
            for j in range(nx):
                ev = 0.0
                for i in range(7):
                    ev += E[i] * K[i, j]
                ev *= dt
                xm = abs(X[j])
                if abs(tmp[j]) > xm:
                    xm = abs(tmp[j])
                sc = abs_tol + rel_tol * xm
                errn += (ev / sc) ** 2
            errn = math.sqrt(errn / nx)
            if not math.isfinite(errn) or errn > 1.0:
                if math.isfinite(errn):
                    f = 0.9 * errn ** -0.2
                    if f < 0.2:
                        f = 0.2
                    if f > 0.9:
                        f = 0.9
                else:
                    f = 0.2
                dt *= f
                continue
            t += dt
            for j in range(nx):
                X[j] = tmp[j]
                K[0, j] = K[6, j]
            shrinks = 0
            if errn > 0.0:
                f = 0.9 * errn ** -0.2
                if f < 0.2:
                    f = 0.2
                if f > 5.0:
                    f = 5.0
            else:
                f = 5.0
            dt *= f
            rows[written, 0] = t
            for j in range(nx):
                rows[written, 1 + j] = X[j]
            for j in range(m):
                rows[written, 1 + nx + j] = u_acc[j]
                rows[written, 1 + nx + m + j] = w_acc[j]
            written += 1
            if written >= n_rows:
                state[0] = t
                state[1] = dt
                state[2] = steps
                state[3] = shrinks
                return 3, written
        state[0] = t
        state[1] = dt
        state[2] = steps
        state[3] = shrinks
        return 0, written


def run_plan(plan: FastPlan, config):
    """Integrate a FastPlan; returns (status, status_time, rows).

    ``rows`` stacks (t, X, u, w) for every accepted step after t = 0.
    """
    from .sim import _DP_A, _DP_E  # shared tableau

    A = np.zeros((7, 6))
    for i in range(1, 7):
        A[i, :len(_DP_A[i])] = _DP_A[i]

    nx = plan.x0.size
    X = plan.x0.copy()
    state = np.array([0.0, config.dt_init, 0.0, 0.0])
    chunks = []
    cap = 1 << 18
    status = 0
    while True:
        rows = np.empty((cap, 1 + nx + 2 * plan.m))
        status, written = _dp45_kernel(
            state, X, config.t_end, config.rel_tol,
            config.abs_tol, config.w_guard, config.max_shrinks,
            config.min_dt, config.max_dt or -1.0, config.max_steps,
            plan.sys_kind, plan.sys_params, plan.R, plan.S, plan.P, plan.Q,
            plan.Gamma, plan.ref_terms, plan.ref_offsets, plan.r, plan.r_hat,
            plan.m, plan.k_eta, plan.phi_family, plan.phi_params,
            plan.n_kind, plan.n_sigma, A, _DP_E, rows, cap)
        chunks.append(rows[:written])
        if status != 3:
            break
        cap *= 2
    all_rows = np.vstack(chunks) if chunks else np.empty((0, 1 + nx + 2 * plan.m))
    status_name = {0: "completed", 1: "domain-exit", 2: "step-failure"}[status]
    status_time = None if status == 0 else float(state[0])
    return status_name, status_time, all_rows

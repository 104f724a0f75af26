"""Closed-loop integration of functional plants under tracking controllers.

The integrator is an embedded Dormand-Prince 5(4) pair with FSAL, extended
with funnel-aware step rejection: a step is rejected and halved whenever a
stage evaluation of the controller leaves its domain or drives the internal
signal norm past the configured guard. The gain alpha blows up at the unit
ball boundary, so rejecting early keeps the pair in its accuracy regime.

Plants with memory (h > 0) are integrated with a fixed-step classical
Runge-Kutta scheme over a cubic-Hermite dense history (method of steps);
adaptive stepping is disabled there because the correctness of delayed
lookups dominates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .controller import (
    BALL_GUARD,
    baseline_control_r2_aux,
    baseline_control_r3_aux,
    check_initial_condition,
    funnel_control,
)
from .design import AlphaFn, DesignParams, FunnelFn
from .errors import (
    DomainError,
    FunnelViolation,
    InitialConditionRejected,
    ParameterError,
)
from .operators import History
from .reference import RefSignal

__all__ = [
    "SimConfig", "Trajectory", "BaselineR2Params", "BaselineR3Params",
    "simulate", "derivative_consistency",
]


@dataclass(frozen=True)
class BaselineR2Params:
    """Derivative-feedback comparison controller for plants of order 2."""

    phi: FunnelFn
    phi1: FunnelFn
    alpha: AlphaFn
    r: int = 2


@dataclass(frozen=True)
class BaselineR3Params:
    """Derivative-feedback comparison controller for plants of order 3."""

    phi: FunnelFn
    phi1: FunnelFn
    phi2: FunnelFn
    alpha: AlphaFn
    r: int = 3


Controller = Union[DesignParams, BaselineR2Params, BaselineR3Params]


@dataclass(frozen=True)
class SimConfig:
    t_end: float
    dt_init: float = 1e-3
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    w_guard: float = 0.999
    max_shrinks: int = 60
    max_dt: Optional[float] = None
    min_dt: float = 1e-13
    max_steps: int = 20_000_000
    use_compiled: bool = True

    def __post_init__(self):
        if not 0.0 < self.w_guard < 1.0:
            raise ParameterError("w_guard must lie in (0, 1)")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ParameterError("solver tolerances must be positive")
        if self.t_end <= 0 or self.dt_init <= 0:
            raise ParameterError("t_end and dt_init must be positive")

    def scaled(self, factor: float) -> "SimConfig":
        """Copy with rel/abs tolerances multiplied by ``factor``."""
        return SimConfig(t_end=self.t_end, dt_init=self.dt_init,
                         rel_tol=self.rel_tol * factor,
                         abs_tol=self.abs_tol * factor,
                         w_guard=self.w_guard, max_shrinks=self.max_shrinks,
                         max_dt=self.max_dt, min_dt=self.min_dt,
                         max_steps=self.max_steps,
                         use_compiled=self.use_compiled)


@dataclass
class Trajectory:
    """Sampled closed-loop run on the accepted time grid.

    ``y_derivs[i, k]`` is y^(k)(t_i); ``w`` holds the controller's internal
    signal (the auxiliary variable w1 for the comparison controllers).
    ``status`` is 'completed', 'domain-exit' or 'step-failure'; for the
    latter two ``status_time`` is where integration stopped.
    """

    t: np.ndarray
    y_derivs: np.ndarray
    e: np.ndarray
    w: np.ndarray
    u: np.ndarray
    phi: np.ndarray
    phi_norm_e: np.ndarray
    status: str
    status_time: Optional[float]
    r: int
    m: int
    controller: Controller
    ref: RefSignal
    internal: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def completed(self) -> bool:
        return self.status == "completed"


# Dormand-Prince 5(4) tableau (FSAL)
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4


class _ControllerEval:
    """Controller evaluation bound to a reference signal and plant shape."""

    def __init__(self, controller: Controller, ref: RefSignal, r: int, m: int,
                 w_guard: float):
        self.controller = controller
        self.ref = ref
        self.r = r
        self.m = m
        self.w_guard = w_guard
        if isinstance(controller, DesignParams):
            if controller.r != r:
                raise ParameterError("controller order must match the plant order")
        elif isinstance(controller, BaselineR2Params):
            if r != 2:
                raise ParameterError("the order-2 comparison controller needs r = 2")
        elif isinstance(controller, BaselineR3Params):
            if r != 3:
                raise ParameterError("the order-3 comparison controller needs r = 3")
        else:
            raise ParameterError(f"unsupported controller {controller!r}")
        if ref.m != m:
            raise ParameterError("reference dimension must match the plant")

    def __call__(self, t: float, ystack: np.ndarray, guard: bool = True):
        c = self.controller
        m = self.m
        if isinstance(c, DesignParams):
            refd = self.ref.derivs(t, c.r_hat).ravel()
            info = np.concatenate([ystack[:c.r_hat * m] - refd,
                                   ystack[c.r_hat * m:]])
            u, w = funnel_control(t, info, c)
            limit = self.w_guard if guard else BALL_GUARD
            if math.sqrt(float(w @ w)) > limit:
                raise FunnelViolation(t, level=self.r)
            return u, w
        refd = self.ref.derivs(t, 3 if isinstance(c, BaselineR3Params) else 2)
        e = ystack[:m] - refd[0]
        e_dot = ystack[m:2 * m] - refd[1]
        limit = self.w_guard if guard else BALL_GUARD
        try:
            if isinstance(c, BaselineR2Params):
                phi_t, phi1_t = c.phi.eval(t), c.phi1.eval(t)
                self._guard_arg(t, phi_t * np.linalg.norm(e), limit, 1)
                u, w1 = baseline_control_r2_aux(t, e, e_dot, phi_t, phi1_t, c.alpha)
                self._guard_arg(t, phi1_t * np.linalg.norm(w1), limit, 2)
                return u, w1
            e_ddot = ystack[2 * m:3 * m] - refd[2]
            phi_t, phi1_t, phi2_t = c.phi.eval(t), c.phi1.eval(t), c.phi2.eval(t)
            self._guard_arg(t, phi_t * np.linalg.norm(e), limit, 1)
            u, w1, w2 = baseline_control_r3_aux(t, e, e_dot, e_ddot, phi_t,
                                                phi1_t, phi2_t,
                                                c.phi.deriv(t), c.alpha)
            self._guard_arg(t, phi1_t * np.linalg.norm(w1), limit, 2)
            self._guard_arg(t, phi2_t * np.linalg.norm(w2), limit, 3)
            return u, w1
        except DomainError as err:
            raise FunnelViolation(t, level=err.level) from err

    @staticmethod
    def _guard_arg(t, value, limit, level):
        if value > limit:
            raise FunnelViolation(t, level=level)


def _check_initial(controller, ctrl_eval, system, ref):
    x0 = system.initial_state()
    if isinstance(controller, DesignParams):
        refd = ref.derivs(0.0, controller.r_hat).ravel()
        m = system.m
        info0 = np.concatenate([x0[:controller.r_hat * m] - refd,
                                x0[controller.r_hat * m:]])
        verdict = check_initial_condition(controller, info0)
        if not verdict.accepted:
            raise InitialConditionRejected(verdict.level)
    else:
        try:
            ctrl_eval(0.0, x0, guard=False)
        except FunnelViolation as err:
            raise InitialConditionRejected(err.level) from err


def simulate(system, controller: Controller, ref: RefSignal,
             config: SimConfig) -> Trajectory:
    """Integrate the closed loop of ``system`` under ``controller``.

    Raises InitialConditionRejected if the controller domain excludes the
    initial data. Step failures are reported through ``Trajectory.status``
    so that partial runs remain inspectable.
    """
    ctrl_eval = _ControllerEval(controller, ref, system.r, system.m,
                                config.w_guard)
    _check_initial(controller, ctrl_eval, system, ref)
    system.T.reset()
    if system.h > 0.0:
        if system.T.state_dim:
            raise ParameterError(
                "plants combining memory (h > 0) with co-integrated operator "
                "state are not supported"
            )
        return _simulate_delay(system, controller, ctrl_eval, ref, config)
    if config.use_compiled:
        from . import fastpath

        plan = fastpath.plan_for(system, controller, ref)
        if plan is not None:
            return _simulate_compiled(system, controller, ctrl_eval, ref,
                                      config, plan)
    return _simulate_ode(system, controller, ctrl_eval, ref, config)


class _Recorder:
    def __init__(self, system, ref):
        self.system = system
        self.ref = ref
        self.rows = {k: [] for k in ("t", "y", "e", "w", "u", "phi", "pne")}
        self.internal = []

    def add(self, t, ystack, eta, u, w, phi_t):
        r, m = self.system.r, self.system.m
        yd = ystack.reshape(r, m)
        e = yd[0] - self.ref(t)
        self.rows["t"].append(t)
        self.rows["y"].append(yd.copy())
        self.rows["e"].append(e)
        self.rows["w"].append(np.atleast_1d(w).copy())
        self.rows["u"].append(np.atleast_1d(u).copy())
        self.rows["phi"].append(phi_t)
        self.rows["pne"].append(phi_t * float(np.linalg.norm(e)))
        if eta is not None and eta.size:
            self.internal.append(eta.copy())

    def build(self, status, status_time, controller):
        sys_, ref = self.system, self.ref
        return Trajectory(
            t=np.array(self.rows["t"]),
            y_derivs=np.array(self.rows["y"]),
            e=np.array(self.rows["e"]),
            w=np.array(self.rows["w"]),
            u=np.array(self.rows["u"]),
            phi=np.array(self.rows["phi"]),
            phi_norm_e=np.array(self.rows["pne"]),
            status=status,
            status_time=status_time,
            r=sys_.r,
            m=sys_.m,
            controller=controller,
            ref=ref,
            internal=np.array(self.internal) if self.internal else None,
        )


def _simulate_ode(system, controller, ctrl_eval, ref, config) -> Trajectory:
    r, m = system.r, system.m
    n_y = r * m
    k_eta = system.T.state_dim
    x = np.concatenate([system.initial_state(),
                        system.T.committed_state]) if k_eta else system.initial_state()
    phi = controller.phi

    def rhs(t, X):
        ystack = X[:n_y]
        eta = X[n_y:]
        u, w = ctrl_eval(t, ystack)
        z = system.T.output(t, ystack, eta)
        dX = np.empty_like(X)
        dX[:n_y - m] = ystack[m:]
        dX[n_y - m:n_y] = system.f(system.disturbance(t), z, u)
        if k_eta:
            dX[n_y:] = system.T.state_deriv(t, ystack, eta)
        return dX, u, w

    rec = _Recorder(system, ref)
    t = 0.0
    u0, w0 = ctrl_eval(0.0, x[:n_y], guard=False)
    rec.add(t, x[:n_y], x[n_y:], u0, w0, phi.eval(0.0))

    dt = config.dt_init
    if config.max_dt:
        dt = min(dt, config.max_dt)
    k1 = None
    shrinks = 0
    status, status_time = "completed", None
    steps = 0
    while t < config.t_end - 1e-12:
        if steps >= config.max_steps:
            status, status_time = "step-failure", t
            break
        steps += 1
        dt = min(dt, config.t_end - t)
        if dt < config.min_dt:
            # a stall inside a violation streak is a domain exit, not a
            # generic step failure
            status = "domain-exit" if shrinks > 0 else "step-failure"
            status_time = t
            break
        try:
            if k1 is None:
                k1, _, _ = rhs(t, x)
            K = np.empty((x.size, 7))
            K[:, 0] = k1
            for i in range(1, 7):
                xi = x + dt * (K[:, :i] @ _DP_A[i])
                ki, ui, wi = rhs(t + _DP_C[i] * dt, xi)
                K[:, i] = ki
        except FunnelViolation:
            # k1 belongs to the unchanged left endpoint and stays valid
            dt *= 0.5
            shrinks += 1
            if shrinks > config.max_shrinks:
                status, status_time = "domain-exit", t
                break
            continue
        x_new = x + dt * (K @ _DP_B5)
        err_vec = dt * (K @ _DP_E)
        scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(x), np.abs(x_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if not np.isfinite(err) or err > 1.0:
            factor = 0.2 if not np.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
            dt *= min(factor, 0.9)
            continue
        # accept: the last stage (FSAL) already evaluated the endpoint inside
        # the try block, so the controller domain holds there too
        t += dt
        x = x_new
        k1 = K[:, 6]
        rec.add(t, x[:n_y], x[n_y:], ui, wi, phi.eval(t))
        shrinks = 0
        if err > 0.0:
            dt *= min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            dt *= 5.0
        if config.max_dt:
            dt = min(dt, config.max_dt)
    if k_eta:
        # commit the final operator state for post-run inspection
        system.T.commit_state(t, x[n_y:])
    return rec.build(status, status_time, controller)


def _simulate_compiled(system, controller, ctrl_eval, ref, config,
                       plan) -> Trajectory:
    """Drive the compiled kernel and assemble the same Trajectory record."""
    from . import fastpath
    from .design import phi_values
    from .reference import ref_values

    r, m = system.r, system.m
    n_y = r * m
    nx = plan.x0.size
    u0, w0 = ctrl_eval(0.0, plan.x0[:n_y], guard=False)
    status, status_time, rows = fastpath.run_plan(plan, config)

    n_rows = rows.shape[0]
    t = np.empty(n_rows + 1)
    t[0] = 0.0
    t[1:] = rows[:, 0]
    X = np.empty((n_rows + 1, nx))
    X[0] = plan.x0
    X[1:] = rows[:, 1:1 + nx]
    u = np.empty((n_rows + 1, m))
    u[0] = u0
    u[1:] = rows[:, 1 + nx:1 + nx + m]
    w = np.empty((n_rows + 1, m))
    w[0] = w0
    w[1:] = rows[:, 1 + nx + m:1 + nx + 2 * m]

    y_derivs = X[:, :n_y].reshape(n_rows + 1, r, m)
    e = y_derivs[:, 0, :] - ref_values(ref, t)
    phi = phi_values(controller.phi, t)
    phi_norm_e = phi * np.linalg.norm(e, axis=1)
    internal = X[:, n_y:].copy() if plan.k_eta else None
    if plan.k_eta:
        system.T.commit_state(float(t[-1]), X[-1, n_y:])
    return Trajectory(t=t, y_derivs=y_derivs.copy(), e=e, w=w, u=u, phi=phi,
                      phi_norm_e=phi_norm_e, status=status,
                      status_time=status_time, r=r, m=m,
                      controller=controller, ref=ref, internal=internal)


def _simulate_delay(system, controller, ctrl_eval, ref, config) -> Trajectory:
    r, m = system.r, system.m
    n_y = r * m
    min_delay = min(getattr(system.T, "delays", [system.h]))
    dt = min(config.dt_init, min_delay, config.max_dt or math.inf)
    phi = controller.phi

    history = History(system.h, n_y, system.history0)

    def rhs(t, ystack, view_time):
        u, w = ctrl_eval(t, ystack)
        z = system.T.evaluate(t, history.view(view_time))
        dX = np.empty(n_y)
        dX[:n_y - m] = ystack[m:]
        dX[n_y - m:] = system.f(system.disturbance(t), z, u)
        return dX, u, w

    rec = _Recorder(system, ref)
    x = system.initial_state()
    t = 0.0
    u0, w0 = ctrl_eval(0.0, x, guard=False)
    rec.add(t, x, None, u0, w0, phi.eval(0.0))
    # initial Hermite slope from the already-evaluated (unguarded) input
    d0 = np.empty(n_y)
    d0[:n_y - m] = x[m:]
    d0[n_y - m:] = system.f(system.disturbance(0.0),
                            system.T.evaluate(0.0, history.view(0.0)), u0)
    history.set_initial_slope(d0)

    shrinks = 0
    status, status_time = "completed", None
    steps = 0
    while t < config.t_end - 1e-12:
        if steps >= config.max_steps:
            status, status_time = "step-failure", t
            break
        steps += 1
        h_step = min(dt, config.t_end - t)
        if h_step < config.min_dt:
            status = "domain-exit" if shrinks > 0 else "step-failure"
            status_time = t
            break
        try:
            kA, _, _ = rhs(t, x, t)
            kB, _, _ = rhs(t + h_step / 2, x + h_step / 2 * kA, t)
            kC, _, _ = rhs(t + h_step / 2, x + h_step / 2 * kB, t)
            kD, _, _ = rhs(t + h_step, x + h_step * kC, t)
            x_new = x + h_step / 6 * (kA + 2 * kB + 2 * kC + kD)
            t_new = t + h_step
            d_new, u_new, w_new = rhs(t_new, x_new, t)
        except FunnelViolation:
            dt *= 0.5
            shrinks += 1
            if shrinks > config.max_shrinks:
                status, status_time = "domain-exit", t
                break
            continue
        t = t_new
        x = x_new
        history.append(t, x, d_new)
        system.T.advance(t, history.view(t))
        rec.add(t, x, None, u_new, w_new, phi.eval(t))
        shrinks = 0
    return rec.build(status, status_time, controller)


def derivative_consistency(traj: Trajectory) -> float:
    """Max residual of the stacked-integrator contract d/dt y^(k) = y^(k+1).

    Uses the second-order non-uniform central difference on interior grid
    points; small for smooth completed runs (O(spacing^2)).
    """
    if traj.t.size < 3 or traj.r < 2:
        return 0.0
    worst = 0.0
    t = traj.t
    for k in range(traj.r - 1):
        yk = traj.y_derivs[:, k, :]
        yk1 = traj.y_derivs[:, k + 1, :]
        h1 = (t[1:-1] - t[:-2])[:, None]
        h2 = (t[2:] - t[1:-1])[:, None]
        fd = (-h2 / (h1 * (h1 + h2)) * yk[:-2]
              + (h2 - h1) / (h1 * h2) * yk[1:-1]
              + h1 / (h2 * (h1 + h2)) * yk[2:])
        worst = max(worst, float(np.max(np.abs(fd - yk1[1:-1]))))
    return worst

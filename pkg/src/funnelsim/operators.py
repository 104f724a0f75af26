"""Causal operators mapping output trajectories to feedback quantities.

Operators are causal, locally Lipschitz, and bounded-input bounded-output;
they may carry internal state (co-integrated dynamics) or read delayed
values from a committed history. Internal state follows commit-on-accept
semantics: ``evaluate`` is pure for a tentative time, ``advance`` commits
after the integrator accepts a step.
"""

from __future__ import annotations

import bisect
import math

import numpy as np
from scipy.linalg import expm

from .errors import HistoryUnderflow, LookaheadError

_EDGE_TOL = 1e-9


class History:
    """Committed dense output of a stacked trajectory with memory window.

    Knots (t_k, x_k, x'_k) are interpolated by cubic Hermite polynomials;
    times in [-h, 0] are served by the initial-history callable. Lookups
    beyond the last committed knot are refused (causality).
    """

    def __init__(self, h: float, dim: int, initial_fn, t0: float = 0.0):
        self.h = float(h)
        self.dim = int(dim)
        self.initial_fn = initial_fn
        self.t0 = float(t0)
        self.ts = [t0]
        self.xs = [np.asarray(initial_fn(t0), dtype=float).reshape(dim)]
        self.fs = [None]  # derivative at t0 filled by the first append

    @property
    def t_last(self) -> float:
        return self.ts[-1]

    def append(self, t: float, x, dxdt) -> None:
        if t <= self.ts[-1]:
            raise ValueError("history knots must be strictly increasing")
        self.ts.append(float(t))
        self.xs.append(np.asarray(x, dtype=float).reshape(self.dim))
        self.fs.append(np.asarray(dxdt, dtype=float).reshape(self.dim))

    def set_initial_slope(self, dxdt) -> None:
        self.fs[0] = np.asarray(dxdt, dtype=float).reshape(self.dim)

    def __call__(self, s: float) -> np.ndarray:
        if s < self.t0 - self.h - _EDGE_TOL:
            raise HistoryUnderflow(
                f"lookup at t={s:.6g} precedes the stored memory window"
            )
        if s > self.ts[-1] + _EDGE_TOL:
            raise LookaheadError(
                f"lookup at t={s:.6g} is ahead of committed history t={self.ts[-1]:.6g}"
            )
        if s <= self.t0:
            return np.asarray(self.initial_fn(max(s, self.t0 - self.h)),
                              dtype=float).reshape(self.dim)
        i = bisect.bisect_right(self.ts, s) - 1
        i = min(max(i, 0), len(self.ts) - 2)
        t0, t1 = self.ts[i], self.ts[i + 1]
        x0, x1 = self.xs[i], self.xs[i + 1]
        f0 = self.fs[i] if self.fs[i] is not None else (x1 - x0) / (t1 - t0)
        f1 = self.fs[i + 1]
        dt = t1 - t0
        tau = (s - t0) / dt
        h00 = (1 + 2 * tau) * (1 - tau) ** 2
        h10 = tau * (1 - tau) ** 2
        h01 = tau * tau * (3 - 2 * tau)
        h11 = tau * tau * (tau - 1)
        return h00 * x0 + h10 * dt * f0 + h01 * x1 + h11 * dt * f1

    def view(self, t_max: float) -> "HistoryView":
        return HistoryView(self, t_max)


class HistoryView:
    """Causality-enforcing window onto a history: refuses lookups past t_max."""

    def __init__(self, history, t_max: float):
        self._history = history
        self.t_max = float(t_max)

    def __call__(self, s: float) -> np.ndarray:
        if s > self.t_max + _EDGE_TOL:
            raise LookaheadError(
                f"lookup at t={s:.6g} is ahead of the evaluation time {self.t_max:.6g}"
            )
        return self._history(s)


class OperatorT:
    """Base causal operator: maps a stacked history to values in R^q.

    Subclasses fix ``q_dim``, memory ``h`` and the internal state dimension.
    """

    q_dim = 1
    h = 0.0
    state_dim = 0
    substep = 1e-3  # internal sub-integration step of the history interface

    def __init__(self):
        self.initial_state = np.zeros(self.state_dim)
        self.reset()

    def reset(self) -> None:
        self._t_commit = 0.0
        self._state_commit = self.initial_state.copy()

    @property
    def committed_time(self) -> float:
        return self._t_commit

    @property
    def committed_state(self) -> np.ndarray:
        return self._state_commit.copy()

    def commit_state(self, t: float, state) -> None:
        """Overwrite the committed state (integrators that co-integrate it)."""
        self._t_commit = float(t)
        self._state_commit = np.atleast_1d(np.asarray(state, dtype=float)).copy()

    # -- ODE-coupled interface (state_dim > 0 or pointwise output) ---------
    def output(self, t: float, zeta: np.ndarray, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def state_deriv(self, t: float, zeta: np.ndarray, eta: np.ndarray) -> np.ndarray:
        return np.zeros(0)

    # -- history interface --------------------------------------------------
    def evaluate(self, t: float, history) -> np.ndarray:
        """Operator value at time t, reading the history only on [-h, t]."""
        eta = self._integrate_state(t, history)
        return self.output(t, np.asarray(history(t), dtype=float), eta)

    def advance(self, t: float, history) -> None:
        """Commit internal state at time t after the step was accepted."""
        if self.state_dim:
            self._state_commit = self._integrate_state(t, history)
        self._t_commit = float(t)

    def _integrate_state(self, t: float, history) -> np.ndarray:
        """Internal state at t, integrating forward from the committed point."""
        if not self.state_dim:
            return np.zeros(0)
        t0, eta = self._t_commit, self._state_commit.copy()
        if t < t0 - _EDGE_TOL:
            raise LookaheadError(
                f"operator state was already committed at t={t0:.6g} > {t:.6g}"
            )
        span = t - t0
        if span <= 0.0:
            return eta
        nsub = max(1, int(math.ceil(span / self.substep)))
        for i in range(nsub):
            # endpoints picked so the last one is exactly t (no rounding past
            # the causality horizon)
            s0 = t0 + span * i / nsub
            s1 = t if i == nsub - 1 else t0 + span * (i + 1) / nsub
            dt = s1 - s0
            mid = s0 + 0.5 * dt
            k1 = self.state_deriv(s0, history(s0), eta)
            k2 = self.state_deriv(mid, history(mid), eta + dt / 2 * k1)
            k3 = self.state_deriv(mid, history(mid), eta + dt / 2 * k2)
            k4 = self.state_deriv(s1, history(s1), eta + dt * k3)
            eta = eta + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return eta


class StaticOperator(OperatorT):
    """Stateless pointwise operator z(t) = fn(t, zeta(t))."""

    def __init__(self, fn, q_dim: int):
        self.q_dim = int(q_dim)
        self._fn = fn
        super().__init__()

    def output(self, t, zeta, eta):
        return np.atleast_1d(np.asarray(self._fn(t, zeta), dtype=float))


def identity_operator(n: int) -> StaticOperator:
    """z(t) = zeta(t): feeds the stacked output derivatives through."""
    return StaticOperator(lambda t, zeta: zeta, q_dim=n)


def zero_operator(q_dim: int = 1) -> StaticOperator:
    """Trivial operator of a memoryless plant."""
    return StaticOperator(lambda t, zeta: np.zeros(q_dim), q_dim=q_dim)


class InternalDynamicsOperator(OperatorT):
    """Operator whose value is a function of co-integrated internal state:

        eta'(t) = deriv_fn(t, zeta(t), eta(t)),   z(t) = output_fn(t, zeta(t), eta(t)).

    In closed-loop simulation eta is integrated alongside the plant state;
    the history interface integrates it on demand from the committed point.
    """

    def __init__(self, output_fn, deriv_fn, eta0, q_dim: int):
        eta0 = np.atleast_1d(np.asarray(eta0, dtype=float))
        self.q_dim = int(q_dim)
        self.state_dim = eta0.size
        self._output_fn = output_fn
        self._deriv_fn = deriv_fn
        super().__init__()
        self.initial_state = eta0.copy()
        self.reset()

    def output(self, t, zeta, eta):
        return np.atleast_1d(np.asarray(self._output_fn(t, zeta, eta), dtype=float))

    def state_deriv(self, t, zeta, eta):
        return np.atleast_1d(np.asarray(self._deriv_fn(t, zeta, eta), dtype=float))


class LinearInternalOperator(InternalDynamicsOperator):
    """Linear-plant operator  z = sum_k R_k zeta_k + S eta,  eta' = Q eta + P zeta_1.

    Co-integrating eta replaces both the convolution with e^{Q(t-tau)} P and
    the free response S e^{Qt} eta0 (state augmentation instead of quadrature).
    """

    def __init__(self, R, S, P, Q, eta0):
        self.R = tuple(np.atleast_2d(np.asarray(Rk, dtype=float)) for Rk in R)
        self.S = np.atleast_2d(np.asarray(S, dtype=float))
        self.P = np.atleast_2d(np.asarray(P, dtype=float))
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.m = self.R[0].shape[0]
        self.r = len(self.R)
        eta0 = np.atleast_1d(np.asarray(eta0, dtype=float))

        def out(t, zeta, eta):
            z = np.zeros(self.m)
            for k, Rk in enumerate(self.R):
                z += Rk @ zeta[k * self.m:(k + 1) * self.m]
            if eta.size:
                z += self.S @ eta
            return z

        def deriv(t, zeta, eta):
            if not eta.size:
                return eta
            return self.Q @ eta + self.P @ zeta[:self.m]

        super().__init__(out, deriv, eta0, q_dim=self.m)

    def bibo_bound(self, c1: float, horizon: float = 200.0, n_grid: int = 4001) -> float:
        """A c2 such that sup ||zeta|| < c1 implies ess-sup ||z|| < c2.

        Uses numerical quadrature of ||e^{Q tau}|| (valid for Hurwitz Q; the
        horizon must cover the decay of the matrix exponential). The grid of
        exponentials is built by repeated multiplication with e^{Q dtau}.
        """
        bound = sum(np.linalg.norm(Rk, 2) for Rk in self.R) * c1
        if self.initial_state.size:
            dtau = horizon / (n_grid - 1)
            step = expm(self.Q * dtau)
            cur = np.eye(self.Q.shape[0])
            norms = np.empty(n_grid)
            free = 0.0
            for i in range(n_grid):
                norms[i] = np.linalg.norm(cur, 2)
                free = max(free, np.linalg.norm(cur @ self.initial_state))
                cur = step @ cur
            conv = float(np.trapezoid(norms, dx=dtau)) * np.linalg.norm(self.P, 2) * c1
            bound += np.linalg.norm(self.S, 2) * (free + conv)
        return float(bound) * (1.0 + 1e-6)


class PointDelayOperator(OperatorT):
    """z(t) = sum_i Psi_i(t, zeta(t - h_i)) for fixed point delays h_i > 0."""

    def __init__(self, psis, delays, q_dim: int = 1):
        if len(psis) != len(delays):
            raise ValueError("need one delay per map")
        if any(h <= 0 for h in delays):
            raise ValueError("point delays must be positive")
        self.psis = list(psis)
        self.delays = [float(h) for h in delays]
        self.h = max(self.delays)
        self.q_dim = int(q_dim)
        super().__init__()

    def evaluate(self, t, history):
        z = np.zeros(self.q_dim)
        for psi, hi in zip(self.psis, self.delays):
            z = z + np.atleast_1d(np.asarray(psi(t, history(t - hi)), dtype=float))
        return z

"""Tracking-controller construction: scaled information vector, the gain
recursion mapping it into the open unit ball, the resulting feedback law,
and the derivative-based comparison controllers it is benchmarked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import AlphaFn, DesignParams
from .errors import DomainError, FunnelViolation, ShapeError


def _norm(v: np.ndarray) -> float:
    # hot path: avoids np.linalg.norm dispatch overhead
    return math.sqrt(float(v @ v))

# Strict open-ball membership guard: protects against floating-point ties at
# the boundary, where the gain alpha blows up.
BALL_GUARD = 1.0 - 1e-12


def gamma(w, alpha: AlphaFn) -> np.ndarray:
    """Norm-weighted gain map w -> alpha(||w||^2) * w on the open unit ball.

    Raises DomainError if ||w|| is at or beyond the guarded ball boundary.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    nw = _norm(w)
    if nw >= BALL_GUARD:
        raise DomainError(f"gamma argument has norm {nw:.6g} >= 1")
    return alpha.eval(nw * nw) * w


@dataclass(frozen=True)
class RhoResult:
    """Value of the gain recursion with domain bookkeeping.

    ``levels`` holds the intermediate recursion values rho_1, ..., rho_k;
    ``in_domain`` reports whether the final value lies in the open unit ball.
    """

    value: np.ndarray
    in_domain: bool
    levels: list

    @property
    def norm(self) -> float:
        return _norm(self.value)


def rho(etas, alpha: AlphaFn) -> RhoResult:
    """Recursion rho_1 = eta_1, rho_k = eta_k + gamma(rho_{k-1}).

    All intermediate values rho_1, ..., rho_{k-1} must lie in the open unit
    ball (otherwise the next gamma is undefined and DomainError is raised,
    carrying the first failing level). The final value is always returned,
    flagged by ``in_domain``. The gamma map is inlined on squared norms;
    equivalence with the nested closed form is covered by tests.
    """
    etas = [np.atleast_1d(np.asarray(e, dtype=float)) for e in etas]
    guard_sq = BALL_GUARD * BALL_GUARD
    levels = []
    current = etas[0]
    for k, eta in enumerate(etas[1:], start=2):
        n2 = float(current @ current)
        if n2 >= guard_sq:
            raise DomainError(
                f"gain recursion left the unit ball at level {k - 1}", level=k - 1
            )
        levels.append(current)
        current = eta + alpha.eval(n2) * current
    levels.append(current)
    in_domain = float(current @ current) < guard_sq
    return RhoResult(value=current, in_domain=in_domain, levels=levels)


def build_info_vector(y_derivs, yref_derivs, r: int, r_hat: int) -> np.ndarray:
    """Stack the feedback information vector from output and reference derivatives.

    The first ``r_hat`` blocks are tracking-error derivatives
    e^(k) = y^(k) - y_ref^(k); the remaining blocks are the raw output
    derivatives y^(k), k = r_hat, ..., r-1.
    """
    y_derivs = [np.atleast_1d(np.asarray(y, dtype=float)) for y in y_derivs]
    yref_derivs = [np.atleast_1d(np.asarray(y, dtype=float)) for y in yref_derivs]
    if len(y_derivs) != r:
        raise ShapeError(f"expected {r} output-derivative blocks, got {len(y_derivs)}")
    if len(yref_derivs) != r_hat:
        raise ShapeError(
            f"expected {r_hat} reference-derivative blocks, got {len(yref_derivs)}"
        )
    m = y_derivs[0].shape[0]
    for blk in y_derivs + yref_derivs:
        if blk.shape != (m,):
            raise ShapeError("inconsistent block dimensions in information vector")
    blocks = [y_derivs[k] - yref_derivs[k] for k in range(r_hat)]
    blocks += [y_derivs[k] for k in range(r_hat, r)]
    return np.concatenate(blocks)


def _info_blocks(info: np.ndarray, r: int) -> list:
    info = np.asarray(info, dtype=float)
    if info.ndim != 1 or info.size % r:
        raise ShapeError(f"information vector of size {info.size} is not r*m with r={r}")
    m = info.size // r
    return [info[k * m:(k + 1) * m] for k in range(r)]


def funnel_control(t: float, info, params: DesignParams):
    """Feedback law u = N(alpha(||w||^2)) * w with w = rho_r(phi(t) * info).

    Raises FunnelViolation (carrying t and the failing recursion level) when
    the scaled information vector is outside the recursion domain; the
    integrator owns step rejection, the controller never clamps.
    """
    phi_t = params.phi.eval(t)
    blocks = _info_blocks(np.asarray(info, dtype=float) * phi_t, params.r)
    try:
        res = rho(blocks, params.alpha)
    except DomainError as err:
        raise FunnelViolation(t, level=err.level) from err
    if not res.in_domain:
        raise FunnelViolation(t, level=params.r)
    w = res.value
    u = params.n.eval(params.alpha.eval(res.norm**2)) * w
    return u, w


@dataclass(frozen=True)
class InitialCondition:
    accepted: bool
    level: int | None = None


def check_initial_condition(params: DesignParams, info0) -> InitialCondition:
    """Whether phi(0) * info0 lies in the domain of the full gain recursion.

    Trivially accepted when phi(0) = 0; for r = 1 it reduces to
    phi(0) * ||e(0)|| < 1.
    """
    phi0 = params.phi.eval(0.0)
    blocks = _info_blocks(np.asarray(info0, dtype=float) * phi0, params.r)
    try:
        res = rho(blocks, params.alpha)
    except DomainError as err:
        return InitialCondition(accepted=False, level=err.level)
    if not res.in_domain:
        return InitialCondition(accepted=False, level=params.r)
    return InitialCondition(accepted=True)


def _checked_gain(alpha: AlphaFn, arg: float, what: str) -> float:
    if arg >= 1.0 - 1e-12:
        raise DomainError(f"{what} = {arg:.6g} leaves the gain domain [0,1)")
    return alpha.eval(arg)


def baseline_control_r2(t, e, e_dot, phi, phi1, alpha: AlphaFn) -> np.ndarray:
    """Comparison controller for r = 2 (also its multivariate version):

        w1 = e_dot + alpha(phi^2 ||e||^2) e,   u = -alpha(phi1^2 ||w1||^2) w1.

    ``phi`` and ``phi1`` are the funnel-function values at time t.
    """
    u, _ = baseline_control_r2_aux(t, e, e_dot, phi, phi1, alpha)
    return u


def baseline_control_r2_aux(t, e, e_dot, phi, phi1, alpha: AlphaFn):
    e = np.atleast_1d(np.asarray(e, dtype=float))
    e_dot = np.atleast_1d(np.asarray(e_dot, dtype=float))
    ne2 = float(e @ e)
    a1 = _checked_gain(alpha, phi**2 * ne2, "phi^2||e||^2")
    w1 = e_dot + a1 * e
    nw2 = float(w1 @ w1)
    a2 = _checked_gain(alpha, phi1**2 * nw2, "phi1^2||w1||^2")
    return -a2 * w1, w1


def baseline_control_r3(t, e, e_dot, e_ddot, phi, phi1, phi2, phi_dot,
                        alpha: AlphaFn) -> np.ndarray:
    """Comparison controller for r = 3, with the auxiliary-variable derivative

        w1 = e_dot + alpha(phi^2 ||e||^2) e,
        w2 = w1_dot + alpha(phi1^2 ||w1||^2) w1,
        u  = -alpha(phi2^2 ||w2||^2) w2,

    where w1_dot is expanded through the chain rule (for the standard gain
    alpha(s) = 1/(1-s) the derivative factor equals 2 alpha^2).
    """
    u, _, _ = baseline_control_r3_aux(t, e, e_dot, e_ddot, phi, phi1, phi2,
                                      phi_dot, alpha)
    return u


def baseline_control_r3_aux(t, e, e_dot, e_ddot, phi, phi1, phi2, phi_dot,
                            alpha: AlphaFn):
    e = np.atleast_1d(np.asarray(e, dtype=float))
    e_dot = np.atleast_1d(np.asarray(e_dot, dtype=float))
    e_ddot = np.atleast_1d(np.asarray(e_ddot, dtype=float))
    ne2 = float(e @ e)
    s1 = phi**2 * ne2
    a1 = _checked_gain(alpha, s1, "phi^2||e||^2")
    w1 = e_dot + a1 * e
    # d/dt alpha(phi^2 ||e||^2) = alpha'(s1) * 2 (phi_dot phi ||e||^2 + phi^2 <e, e_dot>)
    a1_dot = alpha.deriv(s1) * 2.0 * (phi_dot * phi * ne2 + phi**2 * float(e @ e_dot))
    nw1 = float(w1 @ w1)
    a2 = _checked_gain(alpha, phi1**2 * nw1, "phi1^2||w1||^2")
    w1_dot = e_ddot + a1_dot * e + a1 * e_dot
    w2 = w1_dot + a2 * w1
    nw2 = float(w2 @ w2)
    a3 = _checked_gain(alpha, phi2**2 * nw2, "phi2^2||w2||^2")
    return -a3 * w2, w1, w2

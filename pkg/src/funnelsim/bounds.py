"""A-priori tracking-error envelopes from the design parameters alone.

For r_hat >= 2, phi(0) > 0 and a gain bijection with non-decreasing
derivative, the recursion below produces constants c_k < 1 such that along
every closed-loop solution

    ||e(t)||      <= c_1 / phi(t),
    ||e^(k)(t)||  <= (c_{k+1} + c_k alpha(c_k^2)) / phi(t),   k = 1..r_hat-2.

The constants depend only on phi, alpha and the initial data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import AlphaFn, FunnelFn, mu0_on_grid, phi_values
from .errors import DegenerateInput, MismatchedScenario, ParameterError

__all__ = [
    "alpha_dagger", "alpha_tilde", "BoundsInput", "BoundsResult",
    "apriori_bounds", "check_against_trajectory",
]


def alpha_dagger(alpha: AlphaFn, y: float, tol: float = 1e-12) -> float:
    """Inverse of the increasing bijection s -> s * alpha(s) on [0, 1).

    Closed form y / (1 + y) for the standard gain; bisection otherwise.
    """
    if y < 0:
        raise ParameterError("alpha_dagger is defined on [0, inf)")
    if y == 0.0:
        return 0.0
    if alpha.is_standard:
        return y / (1.0 + y)
    lo, hi = 0.0, 0.5
    while hi * alpha.eval(hi) < y:
        hi = 0.5 * (1.0 + hi)
        if 1.0 - hi < 1e-15:
            break
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid * alpha.eval(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def alpha_tilde(alpha: AlphaFn, s: float) -> float:
    """The combination 2 s alpha'(s) + alpha(s) (derivative of s alpha(s^2)
    composed suitably); equals (1+s)/(1-s)^2 for the standard gain."""
    return 2.0 * s * alpha.deriv(s) + alpha.eval(s)


@dataclass(frozen=True)
class BoundsInput:
    """Data determining the envelope constants.

    ``e0_derivs`` stacks e(0), e'(0), ..., e^(r_hat-1)(0) row-wise.
    ``mu0`` is ess-sup |phi'|/phi (computed from the family if omitted).
    """

    r_hat: int
    phi: FunnelFn
    alpha: AlphaFn
    e0_derivs: np.ndarray
    mu0: float | None = None
    t_end: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "e0_derivs",
                           np.atleast_2d(np.asarray(self.e0_derivs, dtype=float)))
        if self.r_hat < 2:
            raise ParameterError("envelope recursion requires r_hat >= 2")
        if self.phi.eval(0.0) <= 0.0:
            raise ParameterError("envelope recursion requires phi(0) > 0")
        if self.e0_derivs.shape[0] < self.r_hat:
            raise ParameterError(
                f"need e(0) derivatives up to order {self.r_hat - 1}"
            )
        # non-decreasing derivative of the gain, checked on a sample grid
        grid = np.linspace(0.0, 0.95, 96)
        dvals = [self.alpha.deriv(s) for s in grid]
        if any(b < a - 1e-9 for a, b in zip(dvals, dvals[1:])):
            raise ParameterError(
                "envelope recursion requires a non-decreasing gain derivative"
            )

    def resolved_mu0(self) -> float:
        if self.mu0 is not None:
            return self.mu0
        return mu0_on_grid(self.phi, self.t_end)


@dataclass(frozen=True)
class BoundsResult:
    c: np.ndarray           # c_1 .. c_{r_hat-1}
    mu: np.ndarray          # mu_1 .. mu_{r_hat-1}
    e0: np.ndarray          # rows e_1^0 .. e_{r_hat-1}^0
    envelopes: np.ndarray   # envelope for e, e', ..., e^(r_hat-2)
    r_hat: int
    phi: FunnelFn
    alpha: AlphaFn

    def envelope_values(self, ts: np.ndarray) -> np.ndarray:
        """Envelope curves envelope_k / phi(t), shape (len(ts), r_hat-1)."""
        pv = phi_values(self.phi, ts)
        return self.envelopes[None, :] / pv[:, None]


def apriori_bounds(inp: BoundsInput) -> BoundsResult:
    """Run the envelope recursion; raises DegenerateInput if any c_k >= 1."""
    mu0 = inp.resolved_mu0()
    phi0 = inp.phi.eval(0.0)
    alpha = inp.alpha

    e_k0 = phi0 * inp.e0_derivs[0]
    c_list, mu_list, e0_list = [], [], []
    nrm2 = float(e_k0 @ e_k0)
    c = max(nrm2, alpha_dagger(alpha, 1.0 + mu0)) ** 0.5
    if c >= 1.0:
        raise DegenerateInput(f"c_1 = {c:.6g} is not below 1")
    mu = 1.0 + mu0 * c
    c_list.append(c)
    mu_list.append(mu)
    e0_list.append(e_k0)

    for k in range(2, inp.r_hat):
        c_prev, mu_prev, e_prev = c_list[-1], mu_list[-1], e0_list[-1]
        gain_prev = c_prev * alpha.eval(c_prev**2)
        mu = 1.0 + mu0 * (1.0 + gain_prev) \
            + alpha_tilde(alpha, c_prev**2) * (mu_prev + gain_prev)
        e_k0 = phi0 * inp.e0_derivs[k - 1] \
            + alpha.eval(float(e_prev @ e_prev)) * e_prev
        c = max(float(e_k0 @ e_k0), alpha_dagger(alpha, mu)) ** 0.5
        if c >= 1.0:
            raise DegenerateInput(f"c_{k} = {c:.6g} is not below 1")
        c_list.append(c)
        mu_list.append(mu)
        e0_list.append(e_k0)

    c_arr = np.array(c_list)
    envelopes = np.empty(inp.r_hat - 1)
    envelopes[0] = c_arr[0]
    for k in range(1, inp.r_hat - 1):
        envelopes[k] = c_arr[k] + c_arr[k - 1] * alpha.eval(c_arr[k - 1] ** 2)
    return BoundsResult(c=c_arr, mu=np.array(mu_list), e0=np.array(e0_list),
                        envelopes=envelopes, r_hat=inp.r_hat, phi=inp.phi,
                        alpha=inp.alpha)


def check_against_trajectory(bounds: BoundsResult, traj,
                             rel_slack: float = 1e-6) -> list:
    """Per-derivative verdicts of phi(t) ||e^(k)(t)|| <= envelope_k.

    The trajectory must have been produced with the same phi, alpha and an
    r_hat matching the bounds (MismatchedScenario otherwise).
    """
    from .reference import ref_values

    controller = traj.controller
    phi = getattr(controller, "phi", None)
    if phi is None or phi.family != bounds.phi.family \
            or phi.params != bounds.phi.params:
        raise MismatchedScenario("trajectory was run with a different funnel")
    if getattr(controller, "alpha", None) is not None and \
            controller.alpha.name != bounds.alpha.name:
        raise MismatchedScenario("trajectory was run with a different gain")
    if getattr(controller, "r_hat", None) not in (None, bounds.r_hat):
        raise MismatchedScenario("trajectory was run with a different r_hat")

    verdicts = []
    limit = 1.0 + rel_slack
    for k in range(bounds.r_hat - 1):
        ek = traj.y_derivs[:, k, :] - ref_values(traj.ref, traj.t, level=k)
        scaled = traj.phi * np.linalg.norm(ek, axis=1)
        verdicts.append(bool(np.all(scaled <= bounds.envelopes[k] * limit)))
    return verdicts

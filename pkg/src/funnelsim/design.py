"""Controller design parameters: the gain bijection, the switching function
and the funnel function.

The controller is parameterized by a triple ``(phi, N, alpha)``:

* ``alpha`` -- a C^1 bijection [0,1) -> [1,infty) used as a norm-dependent gain,
* ``N`` -- a continuous surjection R>=0 -> R probing the control direction,
* ``phi`` -- the reciprocal funnel-radius function shaping the error envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class AlphaFn:
    """Gain bijection [0,1) -> [1,infty) with derivative access."""

    eval: Callable[[float], float]
    deriv: Callable[[float], float]
    name: str = "custom"

    @property
    def is_standard(self) -> bool:
        return self.name == "standard"

    @staticmethod
    def standard() -> "AlphaFn":
        """alpha(s) = 1/(1-s), the blow-up gain used throughout."""
        return AlphaFn(
            eval=lambda s: 1.0 / (1.0 - s),
            deriv=lambda s: 1.0 / (1.0 - s) ** 2,
            name="standard",
        )


@dataclass(frozen=True)
class SwitchingFn:
    """Direction-probing gain N applied to the composed alpha value.

    ``kind`` is one of ``surjective-probe`` (full probing capability),
    ``identity`` / ``negated-identity`` (direction known a priori), or
    ``scaled`` (sigma * s).
    """

    eval: Callable[[float], float]
    kind: str
    sigma: float = 1.0
    probe_form: str = ""

    @staticmethod
    def probe() -> "SwitchingFn":
        """N(s) = s sin s: surjective but not of Nussbaum type."""
        return SwitchingFn(eval=lambda s: s * math.sin(s),
                           kind="surjective-probe", probe_form="s-sin-s")

    @staticmethod
    def nussbaum() -> "SwitchingFn":
        """N(s) = s^2 cos s, the classical Nussbaum gain, for comparison."""
        return SwitchingFn(eval=lambda s: s * s * math.cos(s),
                           kind="surjective-probe", probe_form="s2-cos-s")

    @staticmethod
    def identity() -> "SwitchingFn":
        return SwitchingFn(eval=lambda s: s, kind="identity")

    @staticmethod
    def negated_identity() -> "SwitchingFn":
        return SwitchingFn(eval=lambda s: -s, kind="negated-identity")

    @staticmethod
    def scaled(sigma: float) -> "SwitchingFn":
        return SwitchingFn(eval=lambda s: sigma * s, kind="scaled", sigma=sigma)


@dataclass(frozen=True)
class FunnelFn:
    """Reciprocal funnel radius phi: R>=0 -> R>=0.

    Admissible funnel functions are positive on (0, infty), bounded away from
    zero at infinity and have derivative growth bounded by c*(1 + phi).
    ``mu0`` is the essential supremum of \\|phi'|/phi where finite in closed
    form (used by the a-priori bounds); families without a closed form fall
    back to grid maximization via :func:`mu0_on_grid`.
    """

    eval: Callable[[float], float]
    deriv: Callable[[float], float]
    bounded: bool
    family: str
    params: tuple = ()
    mu0: float | None = field(default=None)

    @staticmethod
    def recip_exp(c0: float, c1: float, rate: float) -> "FunnelFn":
        """phi(t) = 1/(c0*exp(-rate*t) + c1); bounded by 1/c1."""
        if c0 <= 0 or c1 <= 0 or rate <= 0:
            raise ParameterError("recip-exp funnel needs c0, c1, rate > 0")

        def f(t):
            return 1.0 / (c0 * math.exp(-rate * t) + c1)

        def df(t):
            den = c0 * math.exp(-rate * t) + c1
            return rate * c0 * math.exp(-rate * t) / den**2

        # |phi'|/phi = rate*c0*exp(-rate t)/(c0*exp(-rate t)+c1), maximal at t=0
        return FunnelFn(f, df, bounded=True, family="recip-exp",
                        params=(c0, c1, rate), mu0=rate * c0 / (c0 + c1))

    @staticmethod
    def poly(a: float, ell: int) -> "FunnelFn":
        """phi(t) = a * t**ell; unbounded, phi(0) = 0."""
        if a <= 0 or ell < 1:
            raise ParameterError("poly funnel needs a > 0 and ell >= 1")
        return FunnelFn(
            eval=lambda t: a * t**ell,
            deriv=lambda t: a * ell * t ** (ell - 1),
            bounded=False,
            family="poly",
            params=(a, ell),
        )

    @staticmethod
    def exp_growth(a: float) -> "FunnelFn":
        """phi(t) = exp(a*t) - 1; unbounded, phi(0) = 0."""
        if a <= 0:
            raise ParameterError("exp funnel needs a > 0")
        return FunnelFn(
            eval=lambda t: math.expm1(a * t),
            deriv=lambda t: a * math.exp(a * t),
            bounded=False,
            family="exp",
            params=(a,),
        )

    @staticmethod
    def capped_exp(a: float, b: float) -> "FunnelFn":
        """phi(t) = min(exp(a*t) - 1, b); bounded by b."""
        if a <= 0 or b <= 0:
            raise ParameterError("capped-exp funnel needs a, b > 0")
        t_cap = math.log1p(b) / a
        return FunnelFn(
            eval=lambda t: min(math.expm1(a * t), b),
            deriv=lambda t: a * math.exp(a * t) if t < t_cap else 0.0,
            bounded=True,
            family="capped-exp",
            params=(a, b),
        )

    @staticmethod
    def affine(a: float, b: float) -> "FunnelFn":
        """phi(t) = a + b*t with a > 0; unbounded for b > 0."""
        if a <= 0 or b < 0:
            raise ParameterError("affine funnel needs a > 0 and b >= 0")
        return FunnelFn(
            eval=lambda t: a + b * t,
            deriv=lambda t: b,
            bounded=(b == 0),
            family="affine",
            params=(a, b),
            mu0=b / a,
        )


def phi_values(phi: FunnelFn, ts: np.ndarray) -> np.ndarray:
    """Vectorized funnel-function evaluation on a time grid."""
    ts = np.asarray(ts, dtype=float)
    p = phi.params
    if phi.family == "recip-exp":
        return 1.0 / (p[0] * np.exp(-p[2] * ts) + p[1])
    if phi.family == "poly":
        return p[0] * ts ** p[1]
    if phi.family == "exp":
        return np.expm1(p[0] * ts)
    if phi.family == "capped-exp":
        return np.minimum(np.expm1(p[0] * ts), p[1])
    if phi.family == "affine":
        return p[0] + p[1] * ts
    return np.array([phi.eval(t) for t in ts])


def mu0_on_grid(phi: FunnelFn, t_end: float, n: int = 10_000) -> float:
    """ess-sup of |phi'|/phi over [0, t_end], by grid maximization.

    Requires phi(0) > 0 (otherwise the ratio is unbounded near zero and the
    a-priori bound hypotheses do not hold anyway).
    """
    if phi.mu0 is not None:
        return phi.mu0
    if phi.eval(0.0) <= 0.0:
        raise ParameterError("mu0 is unbounded when phi(0) = 0")
    ts = np.linspace(0.0, t_end, n)
    return float(max(abs(phi.deriv(t)) / phi.eval(t) for t in ts))


@dataclass(frozen=True)
class DesignParams:
    """Complete design parameter set for an order-r tracking controller.

    ``r_hat`` is the number of reference derivatives available to the
    controller (1 <= r_hat <= r); if fewer than r are available the funnel
    function must be bounded.
    """

    phi: FunnelFn
    n: SwitchingFn
    alpha: AlphaFn
    r: int
    r_hat: int

    def __post_init__(self):
        if self.r < 1:
            raise ParameterError("r must be a positive integer")
        if not 1 <= self.r_hat <= self.r:
            raise ParameterError("r_hat must lie in {1, ..., r}")
        if self.r_hat < self.r and not self.phi.bounded:
            raise ParameterError(
                "a bounded funnel function is required when r_hat < r"
            )

"""Concrete functional plants y^(r) = f(d(t), T(y, ..., y^(r-1))(t), u(t)).

Includes the benchmark models used by the shipped scenarios: the mass-on-car
rig, the two-joint planar manipulator, a plant with dead-zone input and
input-to-state stable internal dynamics, the direction-probing scalar
example, and the reduction of linear plants with strict relative degree to
functional form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NoRelativeDegree, ParameterError, SingularMass
from .linear_analysis import StateSpace, byrnes_isidori, relative_degree
from .operators import (
    InternalDynamicsOperator,
    LinearInternalOperator,
    OperatorT,
    PointDelayOperator,
    StaticOperator,
    identity_operator,
    zero_operator,
)

__all__ = [
    "FunctionalSystem", "DeadZone", "mass_on_car", "mass_on_car_state_space",
    "robot_manipulator", "dead_zone", "dead_zone_example_system",
    "linear_to_functional", "probe_example_system", "integrator_chain",
    "point_delay_operator",
]


@dataclass
class FunctionalSystem:
    """A plant of order r with m inputs/outputs, disturbance dimension p,
    operator output dimension q and memory h.

    ``history0`` returns the stacked initial data (y, y', ..., y^(r-1))(s)
    for s in [-h, 0]; for memoryless plants only history0(0.0) is used.
    A system instance owns mutable operator state and is therefore bound to
    a single simulation at a time.
    """

    m: int
    r: int
    f: Callable
    T: OperatorT
    history0: Callable
    d: Callable | None = None
    p: int = 1
    name: str = "system"
    fast_params: tuple | None = None  # compiled-path encoding, see fastpath

    @property
    def q(self) -> int:
        return self.T.q_dim

    @property
    def h(self) -> float:
        return self.T.h

    def disturbance(self, t: float) -> np.ndarray:
        if self.d is None:
            return np.zeros(self.p)
        return np.atleast_1d(np.asarray(self.d(t), dtype=float))

    def initial_state(self) -> np.ndarray:
        return np.asarray(self.history0(0.0), dtype=float).reshape(self.r * self.m)


def _constant_history(x0: np.ndarray):
    x0 = np.asarray(x0, dtype=float).ravel()
    return lambda s: x0


# ---------------------------------------------------------------------------
# mass-on-car rig
# ---------------------------------------------------------------------------

def mass_on_car_state_space(m1: float, m2: float, k: float, d: float,
                            theta: float) -> StateSpace:
    """Linear model of a spring-damper mass on a ramp mounted on a driven car.

    State (z, z', s, s'): car position, relative ramp position; output is the
    horizontal position y = z + s cos(theta). Relative degree is 2 for
    theta in (0, pi/2) and 3 for theta = 0.
    """
    if min(m1, m2, k, d) <= 0:
        raise ParameterError("masses and spring/damper coefficients must be positive")
    if not 0.0 <= theta < math.pi / 2:
        raise ParameterError("ramp angle must lie in [0, pi/2)")
    mu = m2 * (m1 + m2 * math.sin(theta) ** 2)
    mu1, mu2 = m1 / mu, m2 / mu
    c = math.cos(theta)
    A = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, mu2 * k * c, mu2 * d * c],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -(mu1 + mu2) * k, -(mu1 + mu2) * d],
    ])
    B = np.array([0.0, mu2, 0.0, -mu2 * c])
    C = np.array([1.0, 0.0, c, 0.0])
    return StateSpace(A, B, C)


def mass_on_car(m1: float, m2: float, k: float, d: float, theta: float,
                x0=None):
    """State-space model and its functional-form reduction.

    Returns (StateSpace, FunctionalSystem); x0 defaults to the origin.
    """
    ss = mass_on_car_state_space(m1, m2, k, d, theta)
    x0 = np.zeros(4) if x0 is None else np.asarray(x0, dtype=float)
    sys = linear_to_functional(ss, x0)
    sys.name = "mass-on-car"
    return ss, sys


# ---------------------------------------------------------------------------
# linear plants with strict relative degree
# ---------------------------------------------------------------------------

def linear_to_functional(ss: StateSpace, x0) -> FunctionalSystem:
    """Reduce x' = Ax + Bu, y = Cx with strict relative degree r to
    functional form y^(r) = T(y, ..., y^(r-1)) + Gamma u.

    The operator output absorbs the chain couplings R_k, the internal
    coupling S eta, and the free internal response (eta is co-integrated
    from eta(0) = [0 I] U x0, so no convolution quadrature is needed).
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    rd = relative_degree(ss)
    if rd is None:
        raise NoRelativeDegree("plant has no strict relative degree")
    r, Gamma = rd
    bi = byrnes_isidori(ss, r)
    m = ss.m
    z0 = bi.U @ x0
    eta0 = z0[r * m:]
    T = LinearInternalOperator(bi.R, bi.S, bi.P, bi.Q, eta0)

    def f(delta, z, u):
        return z + Gamma @ np.atleast_1d(u)

    y_derivs0 = z0[:r * m]
    return FunctionalSystem(m=m, r=r, f=f, T=T,
                            history0=_constant_history(y_derivs0),
                            name="linear")


def integrator_chain(r: int, m: int = 1, x0=None) -> FunctionalSystem:
    """y^(r) = u: the plain chain of integrators with trivial operator."""
    x0 = np.zeros(r * m) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if x0.size != r * m:
        raise ParameterError(f"x0 must have r*m = {r * m} entries")

    def f(delta, z, u):
        return np.atleast_1d(np.asarray(u, dtype=float))

    return FunctionalSystem(m=m, r=r, f=f, T=zero_operator(1),
                            history0=_constant_history(x0),
                            name="integrator-chain")


# ---------------------------------------------------------------------------
# planar two-joint manipulator
# ---------------------------------------------------------------------------

def robot_inertia(m1, m2, l1, l2, y) -> np.ndarray:
    c2 = math.cos(y[1])
    return np.array([
        [m1 * l1**2 + m2 * (l1**2 + l2**2 + 2 * l1 * l2 * c2),
         m2 * (l2**2 + l1 * l2 * c2)],
        [m2 * (l2**2 + l1 * l2 * c2), m2 * l2**2],
    ])


def robot_coriolis(m1, m2, l1, l2, y, ydot) -> np.ndarray:
    s2 = math.sin(y[1])
    return np.array([
        [-2 * m2 * l1 * l2 * s2 * ydot[0], -m2 * l1 * l2 * s2 * ydot[1]],
        [-m2 * l1 * l2 * s2 * ydot[0], 0.0],
    ])


def robot_gravity(m1, m2, l1, l2, g, y) -> np.ndarray:
    c1 = math.cos(y[0])
    c12 = math.cos(y[0] + y[1])
    return g * np.array([
        m1 * l1 * c1 + m2 * (l1 * c1 + l2 * c12),
        m2 * l2 * c12,
    ])


def robot_manipulator(m1: float, m2: float, l1: float, l2: float,
                      g: float = 9.81, y0=(0.0, 0.0),
                      ydot0=(0.0, 0.0)) -> FunctionalSystem:
    """Two-joint planar manipulator M(y) y'' + C(y, y') y' + G(y) = u,
    inverted to functional form y'' = M(y)^{-1} (u - C y' - G).

    The inertia matrix is pointwise positive definite for admissible
    parameters; SingularMass is raised if it is numerically singular
    anywhere on the joint-angle range.
    """
    if min(m1, m2, l1, l2) <= 0:
        raise ParameterError("masses and link lengths must be positive")
    for y2 in np.linspace(0.0, 2 * math.pi, 73):
        M = robot_inertia(m1, m2, l1, l2, (0.0, y2))
        if np.linalg.cond(M) > 1e12:
            raise SingularMass(
                f"inertia matrix is numerically singular at joint angle {y2:.3f}"
            )

    def f(delta, z, u):
        # closed-form 2x2 solve of M(y) y'' = u - C(y, y') y' - G(y)
        q2 = z[1]
        v1, v2 = z[2], z[3]
        c2, s2 = math.cos(q2), math.sin(q2)
        a = m1 * l1**2 + m2 * (l1**2 + l2**2 + 2 * l1 * l2 * c2)
        b = m2 * (l2**2 + l1 * l2 * c2)
        d_ = m2 * l2**2
        h = m2 * l1 * l2 * s2
        c1 = math.cos(z[0])
        c12 = math.cos(z[0] + q2)
        g1 = g * (m1 * l1 * c1 + m2 * (l1 * c1 + l2 * c12))
        g2 = g * m2 * l2 * c12
        u = np.atleast_1d(u)
        # C(y, v) v with C = [[-2 h v1, -h v2], [-h v1, 0]], h = m2 l1 l2 sin(y2)
        r1 = u[0] + (2 * h * v1 * v1 + h * v2 * v2) - g1
        r2 = u[1] + h * v1 * v1 - g2
        det = a * d_ - b * b
        return np.array([(d_ * r1 - b * r2) / det, (a * r2 - b * r1) / det])

    x0 = np.concatenate([np.asarray(y0, dtype=float), np.asarray(ydot0, dtype=float)])
    return FunctionalSystem(m=2, r=2, f=f, T=identity_operator(4),
                            history0=_constant_history(x0), name="robot",
                            fast_params=(m1, m2, l1, l2, g))


# ---------------------------------------------------------------------------
# dead-zone input and the ISS internal-dynamics example
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeadZone:
    """Input nonlinearity that is exactly zero on the deadband (b_l, b_r)."""

    b_l: float
    b_r: float
    D_l: Callable[[float], float]
    D_r: Callable[[float], float]
    affine_slopes: tuple | None = None  # set when both branches are affine

    def __post_init__(self):
        if not self.b_l < 0.0 < self.b_r:
            raise ParameterError("deadband edges must satisfy b_l < 0 < b_r")

    def __call__(self, v: float) -> float:
        if v >= self.b_r:
            return self.D_r(v)
        if v <= self.b_l:
            return self.D_l(v)
        return 0.0

    @staticmethod
    def affine(b_l: float, b_r: float, slope: float = 1.0) -> "DeadZone":
        """Branches slope*(v - edge): continuous at the edges, unbounded."""
        return DeadZone(b_l, b_r,
                        D_l=lambda v: slope * (v - b_l),
                        D_r=lambda v: slope * (v - b_r),
                        affine_slopes=(slope, slope))


def dead_zone(b_l: float, b_r: float, D_l, D_r) -> DeadZone:
    return DeadZone(b_l, b_r, D_l, D_r)


def dead_zone_example_system(alphas, beta: DeadZone, xi0=(0.0, 0.0),
                             eta0: float = 0.0) -> FunctionalSystem:
    """Order-2 scalar plant with dead-zone input and scalar internal state:

        y   = xi_1,                y' = (1 + xi_1^2) xi_2,
        y'' = f(y, y', eta, u),    eta' = g(y, y', eta),

    where g has the Lyapunov estimate z*g(x, z) <= -z^4/4 + (a ||x||)^4 / 4
    (input-to-state stable internal dynamics, a = |alpha_4| + |alpha_5|).
    """
    a1, a2, a3, a4, a5 = (float(a) for a in alphas)

    def g(t, zeta, eta):
        y1, y2 = zeta[0], zeta[1]
        z = eta[0]
        return np.array([-z * z * (a4 * y1 + a5 * y2 / (1.0 + y1 * y1) + z)])

    def out(t, zeta, eta):
        return np.array([zeta[0], zeta[1], eta[0]])

    T = InternalDynamicsOperator(out, g, np.array([eta0]), q_dim=3)

    def f(delta, z, u):
        x1, x2, zz = z[0], z[1], z[2]
        uu = float(np.atleast_1d(u)[0])
        val = 2.0 * x1 * x2 * x2 / (1.0 + x1 * x1) + a2 * x2 \
            + (1.0 + x1 * x1) * (a1 * x1 + a3 * zz + beta(uu))
        return np.array([val])

    y0 = float(xi0[0])
    ydot0 = (1.0 + y0 * y0) * float(xi0[1])
    fast = None
    if beta.affine_slopes is not None:
        fast = (a1, a2, a3, a4, a5, beta.b_l, beta.b_r,
                beta.affine_slopes[0], beta.affine_slopes[1])
    return FunctionalSystem(m=1, r=2, f=f, T=T,
                            history0=_constant_history([y0, ydot0]),
                            name="dead-zone-example", fast_params=fast)


# ---------------------------------------------------------------------------
# scalar direction-probing example
# ---------------------------------------------------------------------------

def probe_example_system(x0: float = 1.0) -> FunctionalSystem:
    """x' = u sin(ln(1 + |u|)): the gain direction alternates with |u|,
    so feedback of either sign can stabilize it (zeros at |u| = e^{k pi} - 1).
    """

    def f(delta, z, u):
        uu = float(np.atleast_1d(u)[0])
        return np.array([uu * math.sin(math.log1p(abs(uu)))])

    return FunctionalSystem(m=1, r=1, f=f, T=zero_operator(1),
                            history0=_constant_history([x0]),
                            name="probe-example")


def point_delay_operator(psis, delays, q_dim: int = 1) -> PointDelayOperator:
    """Sum of point-delay reads z(t) = sum_i Psi_i(t, zeta(t - h_i))."""
    return PointDelayOperator(psis, delays, q_dim=q_dim)

"""Numerical verification: funnel margins, gain-direction probing of the
plant nonlinearity, asymptotic-tracking checks and run comparison metrics.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .design import DesignParams
from .errors import HypothesisMismatch, ParameterError
from .reference import ref_values

__all__ = [
    "ChiProbe", "Verdict", "refine_probe", "chi_estimate",
    "high_gain_verdict", "funnel_margin", "asymptotic_tracking_check",
    "RunMetrics", "compare_runs",
]


@dataclass(frozen=True)
class Verdict:
    """One named check: pass iff ``value <comparison> threshold``."""

    quantity: str
    value: float
    threshold: float
    comparison: str = "<"
    context: str = ""

    @property
    def passed(self) -> bool:
        ops = {
            "<": lambda a, b: a < b,
            "<=": lambda a, b: a <= b,
            ">": lambda a, b: a > b,
            ">=": lambda a, b: a >= b,
        }
        return ops[self.comparison](self.value, self.threshold)

    def __str__(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        ctx = f" [{self.context}]" if self.context else ""
        return (f"{tag} {self.quantity}: {self.value:.6g} "
                f"{self.comparison} {self.threshold:.6g}{ctx}")


@dataclass(frozen=True)
class ChiProbe:
    """Sampling plan for the direction-probing minimization

        chi(s) = min { <v, f(delta, z, -s v)> :
                       (delta, z) in K_p x K_q,  v_star <= ||v|| <= 1 }.

    ``K_p`` / ``K_q`` are per-axis intervals of the compact boxes. The
    estimate is an upper bound of the true minimum that converges under
    grid refinement (see :func:`refine_probe`, which keeps grids nested).
    """

    m: int = 1
    v_star: float = 0.5
    K_p: tuple = ((0.0, 0.0),)
    K_q: tuple = ((0.0, 0.0),)
    v_grid_density: int = 64
    box_grid_density: int = 5
    n_directions: int = 512
    n_radii: int = 16
    seed: int = 0
    s_grid: tuple | None = None  # default sample points for the verdict scan

    def __post_init__(self):
        if not 0.0 < self.v_star < 1.0:
            raise ParameterError("v_star must lie in (0, 1)")
        if self.v_grid_density < 2 or self.n_radii < 2 \
                or self.box_grid_density < 1 or self.n_directions < 1:
            raise ParameterError("probe grids must be non-empty")

    def box_points(self, box) -> np.ndarray:
        axes = []
        for lo, hi in box:
            if hi < lo:
                raise ParameterError("box interval with hi < lo")
            if hi == lo:
                axes.append(np.array([lo]))
            else:
                axes.append(np.linspace(lo, hi, self.box_grid_density))
        return np.array(list(itertools.product(*axes)))

    def v_samples(self) -> np.ndarray:
        if self.m == 1:
            mags = np.linspace(self.v_star, 1.0, self.v_grid_density)
            return np.concatenate([mags, -mags])[:, None]
        radii = np.linspace(self.v_star, 1.0, self.n_radii)
        if self.m == 2:
            angles = 2.0 * math.pi * np.arange(self.n_directions) / self.n_directions
            dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        else:
            rng = np.random.default_rng(self.seed)
            dirs = rng.standard_normal((self.n_directions, self.m))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return (dirs[:, None, :] * radii[None, :, None]).reshape(-1, self.m)


def refine_probe(probe: ChiProbe) -> ChiProbe:
    """Nested refinement: every old sample point is kept, so the estimate
    can only decrease."""
    return replace(probe,
                   v_grid_density=2 * probe.v_grid_density - 1,
                   box_grid_density=2 * probe.box_grid_density - 1,
                   n_directions=2 * probe.n_directions,
                   n_radii=2 * probe.n_radii - 1)


def chi_estimate(f, probe: ChiProbe, s: float) -> float:
    """Grid estimate of chi(s); an upper bound of the true minimum."""
    deltas = probe.box_points(probe.K_p)
    zs = probe.box_points(probe.K_q)
    vs = probe.v_samples()
    best = math.inf
    for delta in deltas:
        for z in zs:
            for v in vs:
                val = float(v @ np.atleast_1d(f(delta, z, -s * v)))
                if val < best:
                    best = val
    return best


def high_gain_verdict(f, probe: ChiProbe, s_max: float,
                      s_grid=None, growth_factor: float = 10.0) -> str:
    """Detect on which side(s) chi grows without bound (sampled evidence).

    Growth on s < 0 is reported as 'positive-definite', growth on s > 0 as
    'negative-definite', growth on both sides as 'both'. 'undetected' never
    claims the property fails; it only records that the sampled grids showed
    no growth up to s_max.
    """
    if s_grid is None:
        s_grid = probe.s_grid
    if s_grid is None:
        n = max(2, int(math.ceil(math.log10(max(s_max, 10.0)))) * 4)
        mags = np.geomspace(1.0, s_max, n)
        s_grid = np.concatenate([mags, -mags])
    s_grid = np.asarray(s_grid, dtype=float)

    def side_detected(values):
        if len(values) < 2:
            return False
        baseline = max(1.0, values[0])
        return max(values[1:]) > growth_factor * baseline

    pos_s = np.sort(s_grid[s_grid > 0])
    neg_s = np.sort(-s_grid[s_grid < 0])  # magnitudes, ascending
    chi_pos = [chi_estimate(f, probe, s) for s in pos_s]
    chi_neg = [chi_estimate(f, probe, -s) for s in neg_s]
    grow_pos = side_detected(chi_pos)   # sup_{s>0} chi = inf evidence
    grow_neg = side_detected(chi_neg)   # sup_{s<0} chi = inf evidence
    if grow_pos and grow_neg:
        return "both"
    if grow_pos:
        return "negative-definite"
    if grow_neg:
        return "positive-definite"
    return "undetected"


def funnel_margin(traj) -> float:
    """max over samples of phi(t) ||e(t)||; below 1 means the error stayed
    inside the funnel with that margin."""
    return float(np.max(traj.phi_norm_e))


def asymptotic_tracking_check(traj, k: int, t_tail: float) -> Verdict:
    """Funnel-implied decay of the k-th error derivative on the tail grid.

    Requires an unbounded funnel and r_hat = r. Passes iff
    phi(t) ||e^(k)(t)|| <= 1 on [t_tail, t_end] and phi(t_end) ||e(t_end)|| <= 1.
    """
    controller = traj.controller
    if not isinstance(controller, DesignParams):
        raise HypothesisMismatch("asymptotic tracking is a funnel-controller check")
    if controller.r_hat < controller.r:
        raise HypothesisMismatch("asymptotic tracking requires r_hat = r")
    if controller.phi.bounded:
        raise HypothesisMismatch("asymptotic tracking requires an unbounded funnel")
    if not 0 <= k < traj.r:
        raise ParameterError(f"derivative order k={k} outside 0..{traj.r - 1}")

    mask = traj.t >= t_tail
    ek = traj.y_derivs[mask, k, :] - ref_values(traj.ref, traj.t[mask], level=k)
    tail_max = float(np.max(traj.phi[mask] * np.linalg.norm(ek, axis=1)))
    end_val = float(traj.phi[-1] * np.linalg.norm(traj.e[-1]))
    return Verdict(quantity=f"tail-decay e^({k})",
                   value=max(tail_max, end_val), threshold=1.0,
                   comparison="<=", context=f"t in [{t_tail:g}, {traj.t[-1]:g}]")


@dataclass(frozen=True)
class RunMetrics:
    max_u: float
    l2_effort: float
    margin: float


def _metrics(traj) -> RunMetrics:
    unorm = np.linalg.norm(traj.u, axis=1)
    return RunMetrics(
        max_u=float(np.max(unorm)),
        l2_effort=float(np.trapezoid(unorm**2, traj.t)),
        margin=funnel_margin(traj),
    )


def compare_runs(a, b) -> dict:
    """Side-by-side metrics of two runs (b is resampled onto a's grid when
    the grids differ, metric-wise via linear interpolation)."""
    ma = _metrics(a)
    if a.t.shape == b.t.shape and np.array_equal(a.t, b.t):
        mb = _metrics(b)
    else:
        u_b = np.stack([np.interp(a.t, b.t, b.u[:, j]) for j in range(b.m)], axis=1)
        pne_b = np.interp(a.t, b.t, b.phi_norm_e)
        unorm = np.linalg.norm(u_b, axis=1)
        mb = RunMetrics(max_u=float(np.max(unorm)),
                        l2_effort=float(np.trapezoid(unorm**2, a.t)),
                        margin=float(np.max(pne_b)))
    return {"a": ma, "b": mb}

"""Shared fixtures: shipped scenarios are expensive to run, so each one is
simulated once per session (plus once at halved tolerances) and reused by
the unit and acceptance tests."""

import time
from dataclasses import dataclass, replace
from importlib import resources

import pytest

from funnelsim.scenario import Scenario, load_scenario
from funnelsim.sim import Trajectory, simulate

SCENARIO_IDS = [
    "mass_on_car_case1",
    "mass_on_car_case1_baseline",
    "mass_on_car_case2",
    "mass_on_car_case2_baseline",
    "robot_mimo",
    "dead_zone_rhat2",
    "dead_zone_rhat1",
    "probe_sigma_neg",
    "probe_sigma_pos",
    "envelope_bounds",
]

# scenarios exercised by the funnel-invariant acceptance criterion
FUNNEL_SCENARIOS = [
    "mass_on_car_case1",
    "mass_on_car_case2",
    "robot_mimo",
    "dead_zone_rhat2",
    "dead_zone_rhat1",
]


def scenario_path(name: str) -> str:
    return str(resources.files("funnelsim") / "scenarios" / f"{name}.toml")


@dataclass
class RunRecord:
    scenario: Scenario
    traj: Trajectory
    runtime: float


def _timed_run(name: str, tol_scale: float = 1.0) -> RunRecord:
    sc = load_scenario(scenario_path(name))
    config = sc.config if tol_scale == 1.0 else sc.config.scaled(tol_scale)
    # warm up compiled kernels so the timing reflects the integration itself
    warm = load_scenario(scenario_path(name))
    simulate(warm.system, warm.controller, warm.ref,
             replace_t_end(warm.config, 0.01))
    t0 = time.perf_counter()
    traj = simulate(sc.system, sc.controller, sc.ref, config)
    runtime = time.perf_counter() - t0
    return RunRecord(scenario=sc, traj=traj, runtime=runtime)


def replace_t_end(config, t_end):
    return replace(config, t_end=t_end)


@pytest.fixture(scope="session")
def shipped_runs():
    """Nominal-tolerance run of every shipped scenario, keyed by id."""
    return {name: _timed_run(name) for name in SCENARIO_IDS}


@pytest.fixture(scope="session")
def halved_tolerance_runs():
    """Halved-tolerance runs of the funnel-invariant scenarios."""
    return {name: _timed_run(name, tol_scale=0.5) for name in FUNNEL_SCENARIOS}

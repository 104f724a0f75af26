"""Declarative scenario files: parsing, validation and object construction.

A scenario is a single TOML file with tables [system], [controller],
[reference], [sim], optional [bounds] and an array of [[verify]] checks.
See the README for the full grammar. Validation failures raise ConfigError
with a message naming the violated rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .design import AlphaFn, DesignParams, FunnelFn, SwitchingFn
from .errors import ConfigError, FunnelSimError
from .linear_analysis import StateSpace
from .reference import RefSignal, constant_reference, custom_reference, ref_preset
from .sim import BaselineR2Params, BaselineR3Params, SimConfig
from .systems import (
    DeadZone,
    FunctionalSystem,
    dead_zone_example_system,
    integrator_chain,
    linear_to_functional,
    mass_on_car,
    probe_example_system,
    robot_manipulator,
)

SYSTEM_KINDS = ("mass-on-car", "robot", "dead-zone-example", "probe-example",
                "linear", "integrator-chain")
CONTROLLER_KINDS = ("funnel", "baseline-r2", "baseline-r3", "baseline-mimo")
CHECK_KINDS = ("funnel-margin", "tail-decay", "derivative-consistency",
               "end-error", "input-range")


@dataclass
class Scenario:
    id: str
    system: FunctionalSystem
    state_space: StateSpace | None
    controller: object
    ref: RefSignal
    config: SimConfig
    checks: list = field(default_factory=list)
    bounds_r_hat: int | None = None
    seed: int = 0
    raw: dict = field(default_factory=dict)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"scenario file does not parse: {err}")
    if "id" not in data:
        data["id"] = path.stem
    return build_scenario(data)


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing required key {key!r} in [{where}]")
    return table[key]


def build_scenario(data: dict) -> Scenario:
    sid = str(data.get("id", "scenario"))
    system_tab = data.get("system")
    if not isinstance(system_tab, dict):
        raise ConfigError("scenario needs a [system] table")
    controller_tab = data.get("controller")
    if not isinstance(controller_tab, dict):
        raise ConfigError("scenario needs a [controller] table")
    sim_tab = data.get("sim", {})
    ref_tab = data.get("reference", {})

    try:
        system, state_space = build_system(system_tab)
        ref = build_reference(ref_tab, system.m)
        controller = build_controller(controller_tab, system)
        config = build_sim_config(sim_tab)
    except ConfigError:
        raise
    except FunnelSimError as err:
        raise ConfigError(str(err))

    if ref.m != system.m:
        raise ConfigError(
            f"reference dimension {ref.m} does not match plant dimension {system.m}"
        )

    checks = []
    for check in data.get("verify", []):
        kind = check.get("check")
        if kind not in CHECK_KINDS:
            raise ConfigError(
                f"unknown verification check {kind!r}; known: {CHECK_KINDS}"
            )
        checks.append(dict(check))

    bounds_tab = data.get("bounds", {})
    bounds_r_hat = bounds_tab.get("r_hat")

    return Scenario(id=sid, system=system, state_space=state_space,
                    controller=controller, ref=ref, config=config,
                    checks=checks, bounds_r_hat=bounds_r_hat,
                    seed=int(data.get("seed", 0)), raw=data)


def build_state_space(tab: dict) -> StateSpace:
    """State-space model only (no functional reduction), for analysis of
    plants that may lack a strict relative degree."""
    kind = _require(tab, "kind", "system")
    if kind == "mass-on-car":
        from .systems import mass_on_car_state_space

        return mass_on_car_state_space(
            m1=float(_require(tab, "m1", "system")),
            m2=float(_require(tab, "m2", "system")),
            k=float(_require(tab, "k", "system")),
            d=float(_require(tab, "d", "system")),
            theta=float(_require(tab, "theta", "system")),
        )
    if kind == "linear":
        return StateSpace(np.array(_require(tab, "A", "system"), dtype=float),
                          np.array(_require(tab, "B", "system"), dtype=float),
                          np.array(_require(tab, "C", "system"), dtype=float))
    raise ConfigError(
        f"structure analysis needs a linear plant (mass-on-car or linear), "
        f"got {kind!r}"
    )


def build_system(tab: dict):
    kind = _require(tab, "kind", "system")
    if kind == "mass-on-car":
        ss, sys_ = mass_on_car(
            m1=float(_require(tab, "m1", "system")),
            m2=float(_require(tab, "m2", "system")),
            k=float(_require(tab, "k", "system")),
            d=float(_require(tab, "d", "system")),
            theta=float(_require(tab, "theta", "system")),
            x0=tab.get("x0"),
        )
        return sys_, ss
    if kind == "robot":
        sys_ = robot_manipulator(
            m1=float(_require(tab, "m1", "system")),
            m2=float(_require(tab, "m2", "system")),
            l1=float(_require(tab, "l1", "system")),
            l2=float(_require(tab, "l2", "system")),
            g=float(tab.get("g", 9.81)),
            y0=tab.get("y0", (0.0, 0.0)),
            ydot0=tab.get("ydot0", (0.0, 0.0)),
        )
        return sys_, None
    if kind == "dead-zone-example":
        alphas = _require(tab, "alphas", "system")
        if len(alphas) != 5:
            raise ConfigError("dead-zone-example needs exactly 5 alphas")
        beta = DeadZone.affine(float(tab.get("b_l", -1.0)),
                               float(tab.get("b_r", 1.0)),
                               float(tab.get("slope", 1.0)))
        sys_ = dead_zone_example_system(alphas, beta,
                                        xi0=tab.get("xi0", (0.0, 0.0)),
                                        eta0=float(tab.get("eta0", 0.0)))
        return sys_, None
    if kind == "probe-example":
        return probe_example_system(float(tab.get("x0", 1.0))), None
    if kind == "linear":
        A = np.array(_require(tab, "A", "system"), dtype=float)
        B = np.array(_require(tab, "B", "system"), dtype=float)
        C = np.array(_require(tab, "C", "system"), dtype=float)
        ss = StateSpace(A, B, C)
        x0 = np.array(tab.get("x0", np.zeros(ss.n)), dtype=float)
        return linear_to_functional(ss, x0), ss
    if kind == "integrator-chain":
        r = int(_require(tab, "r", "system"))
        m = int(tab.get("m", 1))
        return integrator_chain(r, m, tab.get("x0")), None
    raise ConfigError(f"unknown system kind {kind!r}; known: {SYSTEM_KINDS}")


def build_alpha(name) -> AlphaFn:
    if name in (None, "standard"):
        return AlphaFn.standard()
    raise ConfigError(f"unknown gain bijection {name!r} (only 'standard' is "
                      "available from scenario files)")


def build_switching(tab: dict) -> SwitchingFn:
    kind = tab.get("kind", "probe")
    if kind == "probe":
        return SwitchingFn.probe()
    if kind == "nussbaum":
        return SwitchingFn.nussbaum()
    if kind == "identity":
        return SwitchingFn.identity()
    if kind == "negated-identity":
        return SwitchingFn.negated_identity()
    if kind == "scaled":
        return SwitchingFn.scaled(float(_require(tab, "sigma", "controller.n")))
    raise ConfigError(f"unknown switching function kind {kind!r}")


def build_funnel(tab: dict) -> FunnelFn:
    family = _require(tab, "family", "controller.phi")
    if family == "recip-exp":
        return FunnelFn.recip_exp(float(tab["c0"]), float(tab["c1"]),
                                  float(tab["rate"]))
    if family == "poly":
        return FunnelFn.poly(float(tab.get("a", 1.0)), int(tab["ell"]))
    if family == "exp":
        return FunnelFn.exp_growth(float(tab["a"]))
    if family == "capped-exp":
        return FunnelFn.capped_exp(float(tab["a"]), float(tab["b"]))
    if family == "affine":
        return FunnelFn.affine(float(tab["a"]), float(tab.get("b", 0.0)))
    raise ConfigError(f"unknown funnel family {family!r}")


def build_controller(tab: dict, system: FunctionalSystem):
    kind = _require(tab, "kind", "controller")
    alpha = build_alpha(tab.get("alpha"))
    phi = build_funnel(_require(tab, "phi", "controller"))
    if kind == "funnel":
        r_hat = int(tab.get("r_hat", system.r))
        if not 1 <= r_hat <= system.r:
            raise ConfigError(
                f"r_hat={r_hat} must lie in 1..r={system.r}"
            )
        if r_hat < system.r and not phi.bounded:
            raise ConfigError(
                "a bounded funnel function is required when r_hat < r "
                f"(r_hat={r_hat}, r={system.r}, funnel family "
                f"{phi.family!r} is unbounded)"
            )
        n = build_switching(tab.get("n", {}))
        return DesignParams(phi=phi, n=n, alpha=alpha, r=system.r, r_hat=r_hat)
    if kind in ("baseline-r2", "baseline-mimo"):
        if system.r != 2:
            raise ConfigError("baseline-r2 requires a plant of order 2")
        phi1 = build_funnel(tab["phi1"]) if "phi1" in tab else phi
        return BaselineR2Params(phi=phi, phi1=phi1, alpha=alpha)
    if kind == "baseline-r3":
        if system.r != 3:
            raise ConfigError("baseline-r3 requires a plant of order 3")
        phi1 = build_funnel(tab["phi1"]) if "phi1" in tab else phi
        phi2 = build_funnel(tab["phi2"]) if "phi2" in tab else phi
        return BaselineR3Params(phi=phi, phi1=phi1, phi2=phi2, alpha=alpha)
    raise ConfigError(f"unknown controller kind {kind!r}; known: {CONTROLLER_KINDS}")


def build_reference(tab: dict, m: int) -> RefSignal:
    preset = tab.get("preset")
    if preset == "custom" or (preset is None and "terms" in tab):
        terms = _require(tab, "terms", "reference")
        return custom_reference(terms, tab.get("offsets"))
    if preset in (None, "zero"):
        return constant_reference(np.full(m, float(tab.get("value", 0.0))))
    if preset == "constant":
        return constant_reference(tab.get("value", np.zeros(m)))
    return ref_preset(preset, m)


def build_sim_config(tab: dict) -> SimConfig:
    kwargs = {"t_end": float(tab.get("t_end", 10.0))}
    for key in ("dt_init", "rel_tol", "abs_tol", "w_guard", "max_dt", "min_dt"):
        if key in tab:
            kwargs[key] = float(tab[key])
    for key in ("max_shrinks", "max_steps"):
        if key in tab:
            kwargs[key] = int(tab[key])
    if "use_compiled" in tab:
        kwargs["use_compiled"] = bool(tab["use_compiled"])
    return SimConfig(**kwargs)

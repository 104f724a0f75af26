"""Command-line front end: run scenarios, analyze linear plants, print
a-priori bounds, and batch-run scenario sets.

Artifacts per run: <id>.csv (time series), <id>.verdicts.txt, <id>.svg
(figure; suppressed by --no-svg), optional <id>.derivs.csv. Exit codes:
0 all verdicts pass and the run completed; 1 verdict failure, incomplete
run or rejected initial condition; 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from .bounds import BoundsInput, apriori_bounds
from .errors import (
    ConfigError,
    DegenerateInput,
    FunnelSimError,
    HypothesisMismatch,
    InitialConditionRejected,
)
from .linear_analysis import (
    byrnes_isidori,
    relative_degree,
    sign_definiteness,
    zero_dynamics_stable,
)
from .scenario import Scenario, load_scenario
from .sim import derivative_consistency, simulate
from .verify import Verdict, asymptotic_tracking_check, funnel_margin

OUT_DIR_ENV = "FUNNELSIM_OUT_DIR"


def _resolve_scenario(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    if p.suffix == "" and os.sep not in name:
        shipped = resources.files("funnelsim") / "scenarios" / f"{name}.toml"
        try:
            if shipped.is_file():
                return Path(str(shipped))
        except (OSError, TypeError):
            pass
    raise ConfigError(f"scenario file not found: {name}")


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _run_checks(sc: Scenario, traj) -> list:
    verdicts = []
    for check in sc.checks:
        kind = check["check"]
        if kind == "funnel-margin":
            verdicts.append(Verdict("funnel margin", funnel_margin(traj),
                                    float(check.get("threshold", 1.0)), "<",
                                    context=sc.id))
        elif kind == "tail-decay":
            verdicts.append(asymptotic_tracking_check(
                traj, int(check.get("k", 0)),
                float(check.get("t_tail", 0.5 * traj.t[-1]))))
        elif kind == "derivative-consistency":
            verdicts.append(Verdict("derivative consistency",
                                    derivative_consistency(traj),
                                    float(check.get("max_residual", 1e-3)),
                                    "<=", context=sc.id))
        elif kind == "end-error":
            verdicts.append(Verdict("final error norm",
                                    float(np.linalg.norm(traj.e[-1])),
                                    float(check["max"]), "<=", context=sc.id))
        elif kind == "input-range":
            mask = np.ones_like(traj.t, dtype=bool)
            if "t_from" in check:
                mask &= traj.t >= float(check["t_from"])
            if "t_to" in check:
                mask &= traj.t <= float(check["t_to"])
            u = traj.u[mask]
            verdicts.append(Verdict("input max", float(np.max(u)),
                                    float(check["hi"]), "<=", context=sc.id))
            verdicts.append(Verdict("input min", float(np.min(u)),
                                    float(check["lo"]), ">=", context=sc.id))
    return verdicts


def _run_one(sc: Scenario, args, out_dir: Path) -> int:
    from . import report

    config = sc.config
    if args.tolerance_scale != 1.0:
        config = config.scaled(args.tolerance_scale)
    try:
        traj = simulate(sc.system, sc.controller, sc.ref, config)
    except InitialConditionRejected as err:
        print(f"{sc.id}: InitialConditionRejected: {err}", file=sys.stderr)
        return 1
    try:
        verdicts = _run_checks(sc, traj)
    except HypothesisMismatch as err:
        print(f"{sc.id}: config error: {err}", file=sys.stderr)
        return 2

    report.write_csv(traj, out_dir / f"{sc.id}.csv")
    report.write_verdicts(verdicts, traj.status, out_dir / f"{sc.id}.verdicts.txt")
    if getattr(args, "derivatives", False):
        report.write_derivatives_csv(traj, out_dir / f"{sc.id}.derivs.csv")
    if not args.no_svg:
        report.render_figure(traj, out_dir / f"{sc.id}.svg", title=sc.id)

    print(f"{sc.id}: status={traj.status}")
    for v in verdicts:
        print(f"{sc.id}: {v}")
    ok = traj.status == "completed" and all(v.passed for v in verdicts)
    return 0 if ok else 1


def cmd_run(args) -> int:
    try:
        sc = load_scenario(_resolve_scenario(args.scenario))
        out_dir = _out_dir(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    return _run_one(sc, args, out_dir)


def cmd_batch(args) -> int:
    try:
        scenarios = [load_scenario(_resolve_scenario(s)) for s in args.scenarios]
        out_dir = _out_dir(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    codes = []
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = [pool.submit(_run_one, sc, args, out_dir) for sc in scenarios]
        codes = [f.result() for f in futures]
    return max(codes) if codes else 0


def cmd_analyze(args) -> int:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    from .scenario import build_state_space

    try:
        path = _resolve_scenario(args.system_file)
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        ss = build_state_space(data.get("system", data))
    except (ConfigError, FunnelSimError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    rd = relative_degree(ss)
    if rd is None:
        print("no strict relative degree")
        return 0
    r, gamma = rd
    print(f"relative degree r = {r}")
    print(f"Gamma = {np.array2string(gamma, precision=12)}")
    print(f"sign-definiteness: {sign_definiteness(gamma)}")
    bi = byrnes_isidori(ss, r)
    zd = zero_dynamics_stable(ss)
    if bi.internal_dim == 0:
        print("internal dynamics: none (full relative degree)")
    else:
        eigs = np.sort_complex(zd.q_eigenvalues)
        print(f"eig(Q) = {np.array2string(eigs, precision=10)}")
    verdict = "asymptotically stable (minimum phase)" if zd.stable else "not asymptotically stable"
    agree = "agrees" if zd.pencil_agrees else "DISAGREES"
    print(f"zero dynamics: {verdict}; pencil determinant cross-check {agree}")
    return 0


def cmd_bounds(args) -> int:
    try:
        sc = load_scenario(_resolve_scenario(args.scenario))
        out_dir = _out_dir(args)
        controller = sc.controller
        if not hasattr(controller, "r_hat"):
            raise ConfigError("bounds need a funnel controller scenario")
        r_hat = sc.bounds_r_hat or controller.r_hat
        y0 = sc.system.initial_state().reshape(sc.system.r, sc.system.m)
        ref0 = sc.ref.derivs(0.0, r_hat)
        e0 = y0[:r_hat] - ref0
        binput = BoundsInput(r_hat=r_hat, phi=controller.phi,
                             alpha=controller.alpha, e0_derivs=e0,
                             t_end=sc.config.t_end)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        res = apriori_bounds(binput)
    except DegenerateInput as err:
        print(f"degenerate input: {err}", file=sys.stderr)
        return 1

    print(f"{sc.id}: a-priori envelope constants (r_hat = {r_hat})")
    for k in range(res.c.size):
        print(f"  c_{k + 1} = {res.c[k]:.12g}   mu_{k + 1} = {res.mu[k]:.12g}   "
              f"||e_{k + 1}^0|| = {np.linalg.norm(res.e0[k]):.12g}")
    labels = ["e"] + [f"e^({k})" for k in range(1, r_hat - 1)]
    for k, lbl in enumerate(labels):
        print(f"  envelope[{lbl}] = {res.envelopes[k]:.12g} / phi(t)")

    ts = np.linspace(0.0, sc.config.t_end, 501)
    curves = res.envelope_values(ts)
    path = out_dir / f"{sc.id}.bounds.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["t"] + [f"envelope_{lbl}" for lbl in labels]) + "\n")
        for i, t in enumerate(ts):
            fh.write(",".join("%.17g" % v for v in [t, *curves[i]]) + "\n")
    print(f"wrote {path}")
    return 0


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", default=None,
                   help=f"artifact directory (default: ${OUT_DIR_ENV} or cwd)")
    p.add_argument("--tolerance-scale", type=float, default=1.0,
                   help="multiply rel/abs solver tolerances (stability checks)")
    p.add_argument("--no-svg", action="store_true", help="skip figure rendering")
    p.add_argument("--derivatives", action="store_true",
                   help="also write the derivative companion CSV")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="funnelsim",
        description="Funnel-control simulation and verification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario file")
    p_run.add_argument("scenario", help="scenario path or shipped scenario name")
    _common_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="run scenarios in parallel")
    p_batch.add_argument("scenarios", nargs="+")
    p_batch.add_argument("--jobs", type=int, default=4)
    _common_flags(p_batch)
    p_batch.set_defaults(func=cmd_batch)

    p_an = sub.add_parser("analyze", help="structure analysis of a linear plant")
    p_an.add_argument("system_file")
    p_an.set_defaults(func=cmd_analyze)

    p_bounds = sub.add_parser("bounds", help="a-priori error envelopes")
    p_bounds.add_argument("scenario")
    p_bounds.add_argument("--out-dir", default=None)
    p_bounds.set_defaults(func=cmd_bounds)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

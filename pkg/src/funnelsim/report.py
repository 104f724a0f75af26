"""Run artifacts: delimited time series, verdict listings and figures.

CSV layout (comma-delimited, '.' decimal separator, header row):
    t, y_1..y_m, e_1..e_m, u_1..u_m, phi, phi_norm_e, w_norm
printed with 17 significant digits so parsing reproduces the samples
bit-identically. Higher derivatives go to a companion file on request.

Figures are rendered with matplotlib (object-oriented API, safe for batch
worker threads) and saved as SVG: tracking error against the funnel
boundary +-1/phi, and the input trajectory.
"""

from __future__ import annotations

import numpy as np
from matplotlib.figure import Figure

from .sim import Trajectory

_FMT = "%.17g"


def _fmt_row(values) -> str:
    return ",".join(_FMT % v for v in values)


def write_csv(traj: Trajectory, path) -> None:
    m = traj.m
    header = (["t"]
              + [f"y_{j + 1}" for j in range(m)]
              + [f"e_{j + 1}" for j in range(m)]
              + [f"u_{j + 1}" for j in range(m)]
              + ["phi", "phi_norm_e", "w_norm"])
    w_norm = np.linalg.norm(traj.w, axis=1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(traj.t.size):
            row = ([traj.t[i]]
                   + list(traj.y_derivs[i, 0, :])
                   + list(traj.e[i])
                   + list(traj.u[i])
                   + [traj.phi[i], traj.phi_norm_e[i], w_norm[i]])
            fh.write(_fmt_row(row) + "\n")


def write_derivatives_csv(traj: Trajectory, path) -> None:
    """Companion file with all stored output derivatives."""
    m, r = traj.m, traj.r
    header = ["t"] + [f"y{k}_{j + 1}" for k in range(r) for j in range(m)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(traj.t.size):
            row = [traj.t[i]] + list(traj.y_derivs[i].ravel())
            fh.write(_fmt_row(row) + "\n")


def read_csv(path):
    """Parse a CSV written by :func:`write_csv` into (header, array)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = [[float(v) for v in line.strip().split(",")]
                for line in fh if line.strip()]
    return header, np.array(data)


def write_verdicts(verdicts, status: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"status: {status}\n")
        for v in verdicts:
            fh.write(str(v) + "\n")


def _decimate(n: int, limit: int = 20_000) -> np.ndarray:
    if n <= limit:
        return np.arange(n)
    idx = np.linspace(0, n - 1, limit).astype(int)
    return np.unique(idx)


def render_figure(traj: Trajectory, path, title: str = "") -> None:
    """Tracking error vs funnel boundary, and input, stacked; saved as SVG."""
    idx = _decimate(traj.t.size)
    t = traj.t[idx]
    fig = Figure(figsize=(8.0, 6.0))
    ax_e, ax_u = fig.subplots(2, 1, sharex=True)

    with np.errstate(divide="ignore"):
        radius = np.where(traj.phi[idx] > 0.0, 1.0 / traj.phi[idx], np.nan)
    ax_e.plot(t, radius, "k--", lw=1.0, label="funnel boundary")
    ax_e.plot(t, -radius, "k--", lw=1.0)
    for j in range(traj.m):
        ax_e.plot(t, traj.e[idx, j], lw=1.2, label=f"e_{j + 1}")
    finite = radius[np.isfinite(radius)]
    if finite.size:
        span = min(np.max(finite), 3.0 * np.max(np.abs(traj.e)) + 1e-9)
        ax_e.set_ylim(-1.1 * span, 1.1 * span)
    ax_e.set_ylabel("tracking error")
    ax_e.legend(loc="upper right", fontsize=8)
    if title:
        ax_e.set_title(title)

    for j in range(traj.m):
        ax_u.plot(t, traj.u[idx, j], lw=1.0, label=f"u_{j + 1}")
    ax_u.set_xlabel("t")
    ax_u.set_ylabel("input")
    ax_u.legend(loc="upper right", fontsize=8)

    fig.tight_layout()
    fig.savefig(path, format="svg")


def render_bounds_figure(ts, curves, labels, measured, path, title="") -> None:
    """Envelope curves with measured error norms overlaid; saved as SVG."""
    fig = Figure(figsize=(8.0, 4.5))
    ax = fig.subplots(1, 1)
    for j, lbl in enumerate(labels):
        ax.plot(ts, curves[:, j], "--", lw=1.2, label=f"envelope {lbl}")
    for j, (lbl, vals) in enumerate(measured.items()):
        ax.plot(ts, vals, lw=1.0, label=lbl)
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.legend(loc="upper right", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")

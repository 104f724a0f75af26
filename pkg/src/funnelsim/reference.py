"""Reference signals with analytic derivative stacks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, UnknownPreset


@dataclass(frozen=True)
class RefSignal:
    """Smooth reference with derivatives of every order available.

    Each output is a constant offset plus a sum of sinusoid terms
    (amplitude, omega, phase); level-k derivatives are evaluated in closed
    form as amp * omega^k * sin(omega t + phase + k pi/2).
    """

    m: int
    family: str
    terms: tuple          # per output: tuple of (amp, omega, phase) triples
    offsets: tuple        # per output: constant part

    def derivs(self, t: float, count: int) -> np.ndarray:
        """Stack of derivative levels 0..count-1, shape (count, m)."""
        out = np.zeros((count, self.m))
        out[0, :] = self.offsets
        half_pi = 0.5 * math.pi
        for i, tlist in enumerate(self.terms):
            for amp, om, ph in tlist:
                for k in range(count):
                    out[k, i] += amp * om**k * math.sin(om * t + ph + k * half_pi)
        return out

    def __call__(self, t: float) -> np.ndarray:
        return self.derivs(t, 1)[0]


def ref_values(ref: RefSignal, ts: np.ndarray, level: int = 0) -> np.ndarray:
    """Vectorized level-k derivative on a time grid, shape (len(ts), m)."""
    ts = np.asarray(ts, dtype=float)
    if level == 0:
        out = np.tile(np.asarray(ref.offsets, dtype=float), (ts.size, 1))
    else:
        out = np.zeros((ts.size, ref.m))
    shift = level * 0.5 * math.pi
    for i, tlist in enumerate(ref.terms):
        for amp, om, ph in tlist:
            out[:, i] += amp * om**level * np.sin(om * ts + ph + shift)
    return out


def custom_reference(terms, offsets=None, family: str = "custom") -> RefSignal:
    """Build a reference from per-output sinusoid term lists."""
    terms = tuple(tuple(tuple(float(v) for v in term) for term in tlist)
                  for tlist in terms)
    m = len(terms)
    if m == 0:
        raise ParameterError("reference needs at least one output")
    if offsets is None:
        offsets = (0.0,) * m
    offsets = tuple(float(o) for o in offsets)
    if len(offsets) != m:
        raise ParameterError("one offset per output required")
    return RefSignal(m=m, family=family, terms=terms, offsets=offsets)


def constant_reference(values) -> RefSignal:
    values = np.atleast_1d(np.asarray(values, dtype=float))
    return RefSignal(m=values.size, family="constant",
                     terms=tuple(() for _ in values),
                     offsets=tuple(float(v) for v in values))


def ref_preset(name: str, m: int = 1) -> RefSignal:
    """Named references used by the shipped scenarios.

    'cos' and 'sin' are scalar; 'sin-sin2' is the two-output
    (sin t, sin 2t); 'zero' is the constant origin in R^m.
    """
    if name == "cos":
        if m != 1:
            raise ParameterError("'cos' preset is scalar")
        return custom_reference([[(1.0, 1.0, math.pi / 2)]], family="cos")
    if name == "sin":
        if m != 1:
            raise ParameterError("'sin' preset is scalar")
        return custom_reference([[(1.0, 1.0, 0.0)]], family="sin")
    if name == "sin-sin2":
        if m != 2:
            raise ParameterError("'sin-sin2' preset has two outputs")
        return custom_reference([[(1.0, 1.0, 0.0)], [(1.0, 2.0, 0.0)]],
                                family="sin-sin2")
    if name == "zero":
        return constant_reference(np.zeros(max(m, 1)))
    raise UnknownPreset(f"no reference preset named {name!r}")

"""Interference-fringe visibility from count rates over a phase scan."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fitting import FitError


@dataclass(frozen=True)
class FringeFit:
    offset: float
    amplitude: float
    phase: float
    i_max: float
    i_min: float
    visibility: float
    zero_amplitude: bool = False
    clamped: bool = False

    def __iter__(self):
        # (I_max, I_min, V) unpacking
        return iter((self.i_max, self.i_min, self.visibility))


def fringe_scan(count_rates, phases=None) -> FringeFit:
    """Sine fit ``offset + amp*cos(phi + phase)`` and V = (Imax-Imin)/(Imax+Imin).

    ``phases`` defaults to equal steps over one period.  The cosine/sine
    basis makes the fit linear, so it is solved in one least-squares step.
    """
    y = np.asarray(count_rates, float)
    if phases is None:
        phases = np.arange(y.size) * 2 * np.pi / y.size
    phi = np.asarray(phases, float)
    if y.size < 8:
        raise FitError("fringe scan needs at least 8 phase samples")
    if np.ptp(phi) < 2 * np.pi * (1 - 1 / y.size) - 1e-9:
        raise FitError("phase samples must span one period")
    basis = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    (c, a, b), *_ = np.linalg.lstsq(basis, y, rcond=None)
    amp = float(np.hypot(a, b))
    phase = float(np.arctan2(-b, a))
    scale = max(abs(c), np.abs(y).max(), 1e-300)
    if amp <= 1e-12 * scale:
        return FringeFit(float(c), 0.0, 0.0, float(c), float(c), 0.0, zero_amplitude=True)
    i_max, i_min = c + amp, c - amp
    clamped = False
    if i_max + i_min <= 0:
        v, clamped = 0.0, True
    else:
        v = (i_max - i_min) / (i_max + i_min)
    if v > 1:
        warnings.warn("fringe amplitude exceeds offset; visibility clamped to 1", RuntimeWarning, stacklevel=2)
        v, clamped = 1.0, True
    return FringeFit(float(c), amp, phase, float(i_max), float(i_min), float(v), clamped=clamped)

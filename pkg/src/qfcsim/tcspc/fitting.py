"""Damped least-squares fitting and the model fits used by the analyses.

The minimiser is a plain Levenberg-Marquardt loop with central-difference
Jacobians, so any model function can be plugged in without derivatives.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..optics import SINC2_HALF_MAX, sinc2
from ..streams import ContractError
from .correlate import DecayHistogram


class FitError(ContractError):
    pass


@dataclass
class FitResult:
    parameters: dict[str, float]
    standard_errors: dict[str, float]
    reduced_chi2: float
    converged: bool = True
    singular: bool = False
    iterations: int = 0
    extras: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        if name in self.parameters:
            return self.parameters[name]
        return self.extras[name]

    def error(self, name: str) -> float:
        return self.standard_errors[name]

    def report(self) -> str:
        lines = []
        for k, v in {**self.parameters, **self.extras}.items():
            lines.append(f"{k} = {v!r}")
            if k in self.standard_errors:
                lines.append(f"{k}_stderr = {self.standard_errors[k]!r}")
        lines += [
            f"reduced_chi2 = {self.reduced_chi2!r}",
            f"converged = {str(self.converged).lower()}",
            f"singular = {str(self.singular).lower()}",
            f"iterations = {self.iterations}",
        ]
        return "\n".join(lines) + "\n"


def _jacobian(f, p, scale):
    h = 1e-6 * scale
    cols = []
    for j in range(p.size):
        dp = np.zeros_like(p)
        dp[j] = h[j]
        cols.append((f(p + dp) - f(p - dp)) / (2 * h[j]))
    return np.stack(cols, axis=1)


def levenberg_marquardt(
    model: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    p0: Sequence[float],
    names: Sequence[str],
    sigma: np.ndarray | None = None,
    *,
    max_iter: int = 200,
    xtol: float = 1e-8,
) -> FitResult:
    """Minimise sum(((y - model(x, p)) / sigma)^2).

    With ``sigma`` the standard errors are absolute; without it they are
    scaled by the reduced chi^2.  Stops when every parameter changes by less
    than ``xtol`` relative or after ``max_iter`` iterations.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    p = np.asarray(p0, float).copy()
    wts = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, float)
    # finite-difference step scale; the floor keeps it usable when a
    # parameter converges to zero (e.g. a centre position)
    floor = np.where(np.abs(p) > 0, 1e-3 * np.abs(p), 1.0)
    scale = np.maximum(np.abs(p), floor)

    def resid(q):
        return (y - model(x, q)) * wts

    r = resid(p)
    cost = r @ r
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = -_jacobian(resid, p, scale)
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag[diag == 0] = 1.0
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10
                if lam > 1e16:
                    break
                continue
            trial = p + step
            r_new = resid(trial)
            cost_new = r_new @ r_new
            if np.isfinite(cost_new) and cost_new <= cost:
                lam = max(lam / 10, 1e-12)
                break
            lam *= 10
            if lam > 1e16:
                break
        if lam > 1e16:
            # no downhill step left: we sit at a minimum to working precision
            converged = True
            break
        rel = np.abs(step) / np.maximum(np.abs(p), 1e-300)
        p, r, cost = trial, r_new, cost_new
        scale = np.maximum(np.abs(p), floor)
        if np.all(rel < xtol):
            converged = True
            break

    dof = max(y.size - p.size, 1)
    chi2_red = float(cost / dof)
    J = -_jacobian(resid, p, scale)
    # equilibrate the columns before inverting so that very different
    # parameter magnitudes (ps against counts/ps) do not look singular
    norms = np.linalg.norm(J, axis=0)
    D = np.diag(np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0))
    As = D @ (J.T @ J) @ D
    singular = False
    try:
        if np.linalg.cond(As) > 1e15:
            raise np.linalg.LinAlgError
        cov = D @ np.linalg.inv(As) @ D
    except np.linalg.LinAlgError:
        singular = True
        cov = np.full((p.size, p.size), np.nan)
    if sigma is None:
        cov = cov * chi2_red
    err = np.sqrt(np.abs(np.diag(cov)))
    if not converged:
        warnings.warn("fit did not converge within the iteration limit", RuntimeWarning, stacklevel=2)
    return FitResult(
        dict(zip(names, map(float, p))),
        dict(zip(names, map(float, err))),
        chi2_red,
        converged=converged,
        singular=singular,
        iterations=it,
    )


def poisson_sigma(counts) -> np.ndarray:
    return np.sqrt(np.maximum(np.asarray(counts, float), 1.0))


# -- decay histograms -------------------------------------------------------

def _exp_integral(t0, t1, tau):
    # integral of exp(-t/tau)/tau over [t0, t1]
    return np.exp(-t0 / tau) - np.exp(-t1 / tau)


def fit_biexponential(
    hist: DecayHistogram,
    t_min: float | None = None,
    t_max: float | None = None,
    *,
    fix_weight: float | None = None,
    offset: bool = True,
    p0: dict | None = None,
) -> FitResult:
    """Fit fast decay plus slow refilling tail to a start-stop histogram.

    Expected counts in a bin are ``amplitude * [(1-w) * F_fast + w * F_slow]``
    with ``F`` the exponential probability mass of the bin, plus a flat
    ``offset`` (counts per ps).  A first pass weights bins by their observed
    counts; two further passes weight by the fitted expectation, which removes
    the downward bias of observed-count weights on sparse tails.  Pass
    ``fix_weight=0`` for a single-exponential fit.
    """
    edges = np.asarray(hist.edges, float)
    counts = np.asarray(hist.counts, float)
    sel = np.ones(counts.size, bool)
    if t_min is not None:
        sel &= edges[:-1] >= t_min
    if t_max is not None:
        sel &= edges[1:] <= t_max
    t0, t1, y = edges[:-1][sel], edges[1:][sel], counts[sel]
    if np.count_nonzero(y) < 10:
        raise FitError("biexponential fit needs at least 10 non-empty bins")
    single = fix_weight == 0

    guess = dict(p0 or {})
    width = t1 - t0
    dens = y / width  # bins may have unequal widths
    peak = int(np.argmax(dens))
    if "tau_fast" not in guess:
        # 1/e point of the count density after the peak
        tail = np.flatnonzero(dens[peak:] < dens[peak] / math.e)
        guess["tau_fast"] = float(t0[peak + tail[0]] - t0[peak]) if tail.size else float(t1[-1] - t0[0]) / 3
        guess["tau_fast"] = max(guess["tau_fast"], float(np.min(width)))
    guess.setdefault("offset", float(max(np.median(y[-max(y.size // 10, 1):]), 0.5) / np.mean(width[-max(y.size // 10, 1):])))
    if not single and ("tau_slow" not in guess or "weight" not in guess):
        # log-linear fit of the offset-subtracted density well after the fast decay
        late = (t0 > t0[peak] + 10 * guess["tau_fast"]) & (dens > 2 * guess["offset"])
        slow_tau, slow_w = float(t1[-1] - t0[0]) / 3, 0.1
        if np.count_nonzero(late) >= 3:
            slope, icpt = np.polyfit(t0[late], np.log(dens[late] - guess["offset"]), 1)
            if slope < 0:
                slow_tau = -1.0 / slope
                slow_mass = math.exp(icpt) * slow_tau * math.exp(-t0[0] / slow_tau)
                slow_w = min(max(slow_mass / max(y.sum(), 1.0), 1e-3), 0.9)
        guess.setdefault("tau_slow", slow_tau)
        guess.setdefault("weight", slow_w if fix_weight is None else fix_weight)
    guess.setdefault("weight", 0.1 if fix_weight is None else fix_weight)
    guess.setdefault("amplitude", float(y.sum()))

    names = ["amplitude", "tau_fast"]
    if not single:
        names.append("tau_slow")
        if fix_weight is None:
            names.append("weight")
    if offset:
        names.append("offset")

    def unpack(p):
        d = dict(zip(names, p))
        w = fix_weight if fix_weight is not None else d["weight"]
        return d, w

    def model(_, p):
        d, w = unpack(p)
        m = (1 - w) * _exp_integral(t0, t1, d["tau_fast"])
        if not single:
            m = m + w * _exp_integral(t0, t1, d["tau_slow"])
        m = d["amplitude"] * m
        if offset:
            m = m + d["offset"] * (t1 - t0)
        return m

    res = levenberg_marquardt(model, t0, y, [guess[n] for n in names], names, poisson_sigma(y))
    for _ in range(2):
        best = [res.parameters[n] for n in names]
        res = levenberg_marquardt(model, t0, y, best, names, poisson_sigma(model(t0, best)))
    if fix_weight is not None:
        res.parameters["weight"] = float(fix_weight)
        res.standard_errors["weight"] = 0.0
    res.extras["n_bins"] = float(y.size)
    return res


# -- visibility and fringes -------------------------------------------------

def fit_visibility_decay(tau, visibility, sigma=None) -> FitResult:
    """Fit ``V0 * exp(-|tau| / T2)`` to visibility-versus-delay points."""
    tau = np.asarray(tau, float)
    v = np.asarray(visibility, float)
    if tau.size < 4:
        raise FitError("need at least 4 delay points")
    if not np.any(v > 0):
        raise FitError("all visibilities are zero")
    at = np.abs(tau)
    pos = v > 0
    if np.count_nonzero(pos) >= 2 and np.ptp(at[pos]) > 0:
        slope, icpt = np.polyfit(at[pos], np.log(v[pos]), 1)
        T2 = -1.0 / slope if slope < 0 else np.ptp(at)
        V0 = math.exp(icpt)
    else:
        T2, V0 = max(np.ptp(at), 1.0), float(v.max())

    def model(x, p):
        return p[0] * np.exp(-np.abs(x) / p[1])

    return levenberg_marquardt(model, tau, v, [V0, T2], ["V0", "T2"], sigma)


def fit_exponential(x, y, sigma=None) -> FitResult:
    """Plain ``A * exp(-x / tau)`` fit (log-linear start values)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    pos = y > 0
    if np.count_nonzero(pos) < 3:
        raise FitError("need at least 3 positive samples")
    slope, icpt = np.polyfit(x[pos], np.log(y[pos]), 1)
    tau0 = -1.0 / slope if slope < 0 else np.ptp(x)

    def model(x_, p):
        return p[0] * np.exp(-x_ / p[1])

    return levenberg_marquardt(model, x, y, [math.exp(icpt), tau0], ["amplitude", "tau"], sigma)


def fit_sinc2(x, y, sigma=None) -> FitResult:
    """Fit ``A * sinc^2(a (x - x0))``; reports FWHM and centre."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 6:
        raise FitError("need at least 6 points")
    i = int(np.argmax(y))
    if i == 0 or i == x.size - 1:
        raise FitError("samples must bracket the peak")
    A0, x00 = y[i], x[i]
    above = x[y >= A0 / 2]
    fwhm0 = max(above.max() - above.min(), np.min(np.diff(np.sort(x))))
    a0 = 2 * SINC2_HALF_MAX / fwhm0

    def model(x_, p):
        return p[0] * sinc2(p[1] * (x_ - p[2]))

    res = levenberg_marquardt(model, x, y, [A0, a0, x00], ["amplitude", "a", "center"], sigma)
    a, da = res.parameters["a"], res.standard_errors["a"]
    res.extras["fwhm"] = 2 * SINC2_HALF_MAX / abs(a)
    res.standard_errors["fwhm"] = res.extras["fwhm"] * da / abs(a)
    return res


def fit_sin2_efficiency(power, efficiency, length: float, sigma=None, p0=(0.3, 1.0)) -> FitResult:
    """Fit ``scale * sin^2(sqrt(eta P) L)`` for the normalised efficiency eta."""
    power = np.asarray(power, float)

    def model(P, p):
        return p[0] * np.sin(np.sqrt(np.abs(p[1]) * P) * length) ** 2

    return levenberg_marquardt(model, power, np.asarray(efficiency, float), list(p0), ["scale", "eta"], sigma)

import math

import numpy as np
import pytest

from qfcsim.optics import ConversionSpec, acceptance_transmission
from qfcsim.tcspc import (
    DecayHistogram,
    FitError,
    fit_biexponential,
    fit_exponential,
    fit_sin2_efficiency,
    fit_sinc2,
    fit_visibility_decay,
    levenberg_marquardt,
)
from qfcsim.tcspc.fitting import poisson_sigma


def biexp_counts(edges, amplitude, tau_fast, tau_slow, weight, offset):
    t0, t1 = edges[:-1], edges[1:]
    mass = (1 - weight) * (np.exp(-t0 / tau_fast) - np.exp(-t1 / tau_fast))
    mass += weight * (np.exp(-t0 / tau_slow) - np.exp(-t1 / tau_slow))
    return amplitude * mass + offset * (t1 - t0)


def test_lm_linear_model_exact():
    x = np.linspace(0, 1, 20)
    res = levenberg_marquardt(lambda x, p: p[0] + p[1] * x, x, 3 + 2 * x, [0.0, 0.0], ["a", "b"])
    assert res["a"] == pytest.approx(3, rel=1e-9) and res["b"] == pytest.approx(2, rel=1e-9)
    assert res.converged and not res.singular


def test_lm_report_is_key_value():
    x = np.linspace(0, 1, 10)
    res = levenberg_marquardt(lambda x, p: p[0] * x, x, 2 * x + 0.01 * np.sin(9 * x), [1.0], ["slope"])
    lines = res.report().splitlines()
    assert all(" = " in ln for ln in lines)
    assert any(ln.startswith("reduced_chi2 = ") for ln in lines)


def test_biexponential_noiseless_recovery():
    edges = np.concatenate([np.arange(0, 50_000, 50.0), np.arange(50_000, 25_000_001, 10_000.0)])
    truth = dict(amplitude=1e6, tau_fast=2600.0, tau_slow=2.5e6, weight=0.25, offset=2e-3)
    counts = biexp_counts(edges, **truth)
    res = fit_biexponential(DecayHistogram(edges, counts), 0.0)
    for k, v in truth.items():
        assert res[k] == pytest.approx(v, rel=1e-6)


def test_single_exponential_poisson_within_two_sigma():
    r = np.random.default_rng(5)
    edges = np.arange(0, 30_001, 100.0)
    counts = r.poisson(biexp_counts(edges, 2e5, 2600.0, 1e6, 0.0, 0.0))
    res = fit_biexponential(DecayHistogram(edges, counts), 0.0, fix_weight=0.0, offset=False)
    assert abs(res["tau_fast"] - 2600) < 2 * res.error("tau_fast")
    assert res["weight"] == 0.0


def test_biexponential_needs_data():
    with pytest.raises(FitError):
        fit_biexponential(DecayHistogram(np.arange(6.0), np.zeros(5)))


def test_visibility_decay_noiseless():
    tau = np.linspace(-150, 150, 13)
    res = fit_visibility_decay(tau, 0.9 * np.exp(-np.abs(tau) / 42))
    assert res["T2"] == pytest.approx(42, rel=1e-6)
    assert res["V0"] == pytest.approx(0.9, rel=1e-6)


def test_visibility_decay_rejects_zero_and_short_input():
    with pytest.raises(FitError):
        fit_visibility_decay([0, 10, 20, 30], [0, 0, 0, 0])
    with pytest.raises(FitError):
        fit_visibility_decay([0, 10, 20], [1, 0.8, 0.6])


def test_exponential_noiseless():
    x = np.linspace(0, 10_000, 40)
    res = fit_exponential(x, 500 * np.exp(-x / 2600))
    assert res["tau"] == pytest.approx(2600, rel=1e-6) and res["amplitude"] == pytest.approx(500, rel=1e-6)


def test_sinc2_on_acceptance_curve():
    x = np.linspace(-150, 150, 61)
    res = fit_sinc2(x, acceptance_transmission(x, ConversionSpec()))
    assert res["fwhm"] == pytest.approx(54.6, abs=0.1)


def test_sinc2_shifted_centre():
    x = np.linspace(-100, 140, 49)
    y = 0.7 * acceptance_transmission(x - 17.25, ConversionSpec())
    res = fit_sinc2(x, y)
    assert res["center"] == pytest.approx(17.25, rel=1e-6)
    assert res["amplitude"] == pytest.approx(0.7, rel=1e-6)


def test_sinc2_one_percent_noise():
    r = np.random.default_rng(8)
    x = np.linspace(-150, 150, 61)
    y = acceptance_transmission(x, ConversionSpec()) * (1 + 0.01 * r.standard_normal(x.size))
    assert fit_sinc2(x, y)["fwhm"] == pytest.approx(54.6, rel=0.02)


def test_sinc2_requires_bracketed_peak():
    x = np.linspace(0, 100, 10)
    with pytest.raises(FitError):
        fit_sinc2(x, np.exp(-x))


def test_sin2_efficiency_noiseless():
    P = np.linspace(0, 0.3, 16)
    eta = 0.32 * np.sin(np.sqrt(1.15 * P) * 4) ** 2
    res = fit_sin2_efficiency(P, eta, 4.0)
    assert res["eta"] == pytest.approx(1.15, rel=1e-6)
    assert res["scale"] == pytest.approx(0.32, rel=1e-6)


def test_poisson_sigma_floor():
    assert np.array_equal(poisson_sigma([0, 1, 4]), [1.0, 1.0, 2.0])
    assert math.isclose(poisson_sigma([100])[0], 10.0)

"""The five experiments as sequential pipelines over immutable streams."""
from __future__ import annotations

import dataclasses
import math
import time

import numpy as np

from ..detection import beamsplitter, delay_line, detect
from ..emitter import generate_background_stream, generate_signal_stream
from ..optics import (
    apply_filter,
    conversion_probability,
    convert_stream,
    converted_coherence_time,
    detuning_ghz,
    etalon_transmission,
)
from ..streams import NOISE_ORIGINS, PS_PER_S, ContractError, Origin, PhotonStream, merge_streams
from ..tcspc import (
    CorrelationConfig,
    cross_correlate,
    find_dip,
    fit_biexponential,
    fit_sin2_efficiency,
    fit_visibility_decay,
    fringe_scan,
    g2_zero,
    normalize_g2,
    start_stop_histogram,
)
from ..tcspc.io import histogram_csv
from .report import RunReport, csv_table
from .scenario import Scenario, block_seed


def source_stream(scn: Scenario, duration: float, seed: int) -> PhotonStream:
    """Collected emitter light: single photons plus etalon-filtered background."""
    em = scn.emitter
    sig = generate_signal_stream(em, duration, seed)
    spectrum = None
    if scn.etalon is not None:
        et = scn.etalon
        spectrum = lambda wl: etalon_transmission(detuning_ghz(wl, em.lines[0].center_wavelength), et)  # noqa: E731
    bg = generate_background_stream(em.background_rate, em.background_band, duration, seed, spectrum=spectrum)
    return merge_streams(sig, bg)


def convert(scn: Scenario, stream: PhotonStream, duration: float, seed: int) -> PhotonStream:
    return convert_stream(stream, scn.pump, scn.conversion, duration, seed, scn.fbg)


def _noise(stream: PhotonStream) -> int:
    return stream.count(*NOISE_ORIGINS)


def _snr(signal: int, noise: int) -> float:
    if noise == 0:
        return math.inf if signal else math.nan
    return signal / noise


def _new_report(scn: Scenario) -> RunReport:
    return RunReport(scn.kind, scn.name, scn.to_dict())


def _span(duration: float) -> tuple[int, int]:
    return 0, int(round(duration * PS_PER_S))


# -- HBT --------------------------------------------------------------------

def run_hbt(scenario: Scenario) -> RunReport:
    """Auto-correlation of the visible or the converted single photons."""
    if scenario.kind not in ("hbt_visible", "hbt_converted"):
        raise ContractError("run_hbt needs an hbt_visible or hbt_converted scenario")
    t0 = time.perf_counter()
    scn = scenario.scaled()
    converted = scn.kind == "hbt_converted"
    cfg = scn.correlation
    fine_cfg = CorrelationConfig.around(scn.fine_bin, scn.fine_window) if scn.fine_bin else None
    total = fine_total = None
    rows = []
    n_events = 0
    for b in range(scn.blocks):
        seed = block_seed(scn.seed, b)
        src = source_stream(scn, scn.duration, seed)
        light = convert(scn, src, scn.duration, seed) if converted else src
        arm_a, arm_b = beamsplitter(light, 0.5, seed, "harness.beamsplitter")
        ta = detect(arm_a, scn.detector_a, scn.duration, seed, "harness.detector_a")
        tb = detect(arm_b, scn.detector_b, scn.duration, seed, "harness.detector_b")
        span = _span(scn.duration)
        h = cross_correlate(ta, tb, cfg, span, span)
        total = h if total is None else total + h
        g_fine = math.nan
        if fine_cfg is not None:
            hf = cross_correlate(ta, tb, fine_cfg, span, span)
            fine_total = hf if fine_total is None else fine_total + hf
            g_fine = g2_zero(normalize_g2(hf))
        n_events += len(src) + len(light) + ta.size + tb.size
        rows.append(
            (b, seed, g2_zero(normalize_g2(h)), g_fine, light.count(Origin.SIGNAL), _noise(light),
             src.count(Origin.SIGNAL), _noise(src), int(ta.size), int(tb.size))
        )
    rep = _new_report(scenario)
    rep.tables["g2_histogram.csv"] = histogram_csv(total)
    header = ("block", "seed", "g2_zero", "g2_zero_fine", "signal", "noise", "source_signal", "source_noise",
              "tags_a", "tags_b")
    rep.tables["blocks.csv"] = csv_table(header, rows)
    g_blocks = np.array([r[2] for r in rows])
    m = rep.metrics
    m["g2_zero"] = g2_zero(normalize_g2(total))
    m["g2_zero_block_mean"] = float(g_blocks.mean())
    m["g2_zero_block_sem"] = float(g_blocks.std(ddof=1) / math.sqrt(g_blocks.size)) if g_blocks.size > 1 else math.nan
    if fine_total is not None:
        rep.tables["g2_histogram_fine.csv"] = histogram_csv(fine_total)
        m["g2_zero_fine"] = g2_zero(normalize_g2(fine_total))
    m["snr"] = _snr(sum(r[4] for r in rows), sum(r[5] for r in rows))
    m["source_snr"] = _snr(sum(r[6] for r in rows), sum(r[7] for r in rows))
    m["rate_a"] = total.rate1
    m["rate_b"] = total.rate2
    rep.stats.update(wall_time_s=time.perf_counter() - t0, events=n_events, blocks=scn.blocks)
    return rep


def run_cross_hbt(scenario: Scenario) -> RunReport:
    """Hybrid HBT: visible arm on the first detector, converted and delayed arm on the second."""
    if scenario.kind != "hbt_cross":
        raise ContractError("run_cross_hbt needs an hbt_cross scenario")
    t0 = time.perf_counter()
    scn = scenario.scaled()
    cfg = scn.correlation
    if abs(scn.arm_delay) > cfg.window:
        raise ContractError("arm_delay lies outside the correlation window")
    total = None
    rows = []
    n_events = 0
    for b in range(scn.blocks):
        seed = block_seed(scn.seed, b)
        src = source_stream(scn, scn.duration, seed)
        vis, ir_in = beamsplitter(src, 0.5, seed, "harness.beamsplitter")
        ir = convert(scn, ir_in, scn.duration, seed)
        ta = detect(vis, scn.detector_a, scn.duration, seed, "harness.detector_a")
        tb = detect(delay_line(ir, scn.arm_delay), scn.detector_b, scn.duration, seed, "harness.detector_b")
        span = _span(scn.duration)
        h = cross_correlate(ta, tb, cfg, span, span)
        total = h if total is None else total + h
        n_events += len(src) + len(ir) + ta.size + tb.size
        rows.append((b, seed, vis.count(Origin.SIGNAL), _noise(vis), ir.count(Origin.SIGNAL), _noise(ir),
                     int(ta.size), int(tb.size)))
    rep = _new_report(scenario)
    rep.tables["g2_histogram.csv"] = histogram_csv(total)
    rep.tables["blocks.csv"] = csv_table(
        ("block", "seed", "visible_signal", "visible_noise", "converted_signal", "converted_noise", "tags_a", "tags_b"),
        rows,
    )
    curve = normalize_g2(total)
    dip_tau, dip_value = find_dip(curve)
    ir_signal = sum(r[4] for r in rows)
    m = rep.metrics
    m["dip_position_ps"] = dip_tau
    m["dip_value"] = dip_value
    m["g2_at_arm_delay"] = g2_zero(curve, scn.arm_delay)
    m["visible_snr"] = _snr(sum(r[2] for r in rows), sum(r[3] for r in rows))
    m["converted_snr"] = _snr(ir_signal, sum(r[5] for r in rows))
    # without converted signal photons the histogram holds only accidental (noise) coincidences
    m["no_signal_coincidences"] = ir_signal == 0
    rep.stats.update(wall_time_s=time.perf_counter() - t0, events=n_events, blocks=scn.blocks)
    return rep


# -- first-order coherence ---------------------------------------------------

def run_michelson(scenario: Scenario) -> RunReport:
    """Fringe visibility versus arm delay and the fitted coherence time.

    Interference acts at the probability level: a photon leaves the
    detected port with probability ``T/2 * (1 + V cos phi)``, where
    ``V = exp(-|tau| / T2)`` for signal photons and 0 for noise.
    """
    if scenario.kind != "michelson":
        raise ContractError("run_michelson needs a michelson scenario")
    t0 = time.perf_counter()
    scn = scenario.scaled()
    converted = scn.mode == "converted"
    T2 = scn.emitter.coherence_time_T2
    if converted:
        T2 = converted_coherence_time(T2, scn.pump.coherence_time_T2p)
    M = scn.phase_steps
    phases = np.arange(M) * 2 * np.pi / M
    det = scn.detector_a
    T = scn.interferometer_transmission
    if not 0 <= T <= 1:
        raise ContractError("interferometer_transmission must lie in [0, 1]")
    fringe_rows, vis_rows = [], []
    signal = noise = n_events = 0
    for i, tau in enumerate(scn.delays):
        v_sig = math.exp(-abs(tau) / T2)
        rates = []
        for j, phi in enumerate(phases):
            seed = block_seed(scn.seed, i * M + j)
            light = source_stream(scn, scn.duration, seed)
            if converted:
                light = convert(scn, light, scn.duration, seed)
            signal += light.count(Origin.SIGNAL)
            noise += _noise(light)

            def port(s, phi=phi):
                v = np.where(s.origins == Origin.SIGNAL, v_sig, 0.0)
                return 0.5 * T * (1 + v * math.cos(phi))

            out = apply_filter(light, port, seed, "harness.michelson")
            tags = detect(out, det, scn.duration, seed, "harness.detector_a")
            n_events += len(light) + tags.size
            rates.append(tags.size / scn.duration)
            fringe_rows.append((tau, float(phi), int(tags.size), tags.size / scn.duration))
        fit = fringe_scan(rates, phases)
        # Poisson error of V from the fringe counts (sum over the phase steps)
        n_tot = sum(r * scn.duration for r in rates)
        sigma_v = math.sqrt(2.0 / max(n_tot, 1.0)) * math.sqrt(max(1 - fit.visibility**2 / 2, 0.0) + 1e-12)
        vis_rows.append((tau, fit.visibility, sigma_v, fit.i_max, fit.i_min))
    rep = _new_report(scenario)
    rep.tables["fringes.csv"] = csv_table(("tau_ps", "phase_rad", "counts", "rate"), fringe_rows)
    rep.tables["visibility.csv"] = csv_table(("tau_ps", "visibility", "sigma", "i_max", "i_min"), vis_rows)
    taus = [r[0] for r in vis_rows]
    vs = [r[1] for r in vis_rows]
    sig = [r[2] for r in vis_rows]
    fit = fit_visibility_decay(taus, vs, sig)
    m = rep.metrics
    m["T2"] = fit["T2"]
    m["T2_stderr"] = fit.error("T2")
    m["V0"] = fit["V0"]
    m["T2_model"] = T2
    m["snr"] = _snr(signal, noise)
    if 0.0 in scn.delays:
        m["visibility_at_zero"] = vs[scn.delays.index(0.0)]
    rep.stats.update(wall_time_s=time.perf_counter() - t0, events=n_events, delays=len(scn.delays), phase_steps=M)
    return rep


# -- lifetime ---------------------------------------------------------------

def run_lifetime(scenario: Scenario) -> RunReport:
    """Start-stop decay histogram against the excitation sync and its biexponential fit."""
    if scenario.kind != "lifetime":
        raise ContractError("run_lifetime needs a lifetime scenario")
    t0 = time.perf_counter()
    scn = scenario.scaled()
    em = scn.emitter
    total = None
    signal = noise = n_events = 0
    period = int(round(em.period_ps))
    for b in range(scn.blocks):
        seed = block_seed(scn.seed, b)
        light = source_stream(scn, scn.duration, seed)
        if scn.mode == "converted":
            light = convert(scn, light, scn.duration, seed)
        signal += light.count(Origin.SIGNAL)
        noise += _noise(light)
        tags = detect(light, scn.detector_a, scn.duration, seed, "harness.detector_a")
        n_pulses = int(math.floor(scn.duration * PS_PER_S / em.period_ps)) + 1
        sync = np.rint(np.arange(n_pulses) * em.period_ps).astype(np.int64)
        h = start_stop_histogram(sync, tags, CorrelationConfig(scn.lifetime_bin, 0), period=period)
        total = h if total is None else dataclasses.replace(total, counts=total.counts + h.counts)
        n_events += len(light) + tags.size + sync.size
    hist = total.coarsen(scn.lifetime_split, scn.lifetime_coarse_factor) if scn.lifetime_coarse_factor > 1 else total
    rep = _new_report(scenario)
    rep.tables["decay_histogram.csv"] = csv_table(
        ("t_start_ps", "t_stop_ps", "counts"),
        zip(hist.edges[:-1].tolist(), hist.edges[1:].tolist(), hist.counts.tolist()),
    )
    fix = 0.0 if em.refill_weight == 0 else None
    # photons of the next pulse that jitter ahead of its sync pile up in the
    # last bins of the range; stop the fit five coarse bins earlier
    t_stop = float(hist.edges[-1]) - 5 * scn.lifetime_bin * max(scn.lifetime_coarse_factor, 1)
    fit = fit_biexponential(hist, scn.lifetime_fit_start, t_stop, fix_weight=fix)
    m = rep.metrics
    m["tau_fast"] = fit["tau_fast"]
    m["tau_fast_stderr"] = fit.error("tau_fast")
    if fix is None:
        m["tau_slow"] = fit["tau_slow"]
        m["tau_slow_stderr"] = fit.error("tau_slow")
        m["slow_weight"] = fit["weight"]
    m["fit_reduced_chi2"] = fit.reduced_chi2
    m["fit_start_ps"] = float(scn.lifetime_fit_start)
    m["fit_stop_ps"] = t_stop
    m["snr"] = _snr(signal, noise)
    rep.stats.update(wall_time_s=time.perf_counter() - t0, events=n_events, detected=int(total.counts.sum()))
    return rep


# -- conversion efficiency --------------------------------------------------

def run_efficiency_sweep(scenario: Scenario) -> RunReport:
    """Total conversion efficiency N_out/N_in and converter SNR versus pump power.

    ``eta`` counts converted signal photons over incoming signal photons.
    ``snr`` is converted signal over converter noise, the figure of merit of
    the conversion stage itself; ``stream_snr`` also counts emitter
    background that survives conversion.
    """
    if scenario.kind != "efficiency_sweep":
        raise ContractError("run_efficiency_sweep needs an efficiency_sweep scenario")
    t0 = time.perf_counter()
    scn = scenario.scaled()
    rows = []
    n_events = 0
    for i, P in enumerate(scn.powers):
        seed = block_seed(scn.seed, i)
        src = source_stream(scn, scn.duration, seed)
        out = convert_stream(src, scn.pump.with_power(P), scn.conversion, scn.duration, seed, scn.fbg)
        n_in = src.count(Origin.SIGNAL)
        n_out = out.count(Origin.SIGNAL)
        n_conv = out.count(Origin.CONVERTER_NOISE)
        n_noise = _noise(out)
        n_events += len(src) + len(out)
        rows.append((P, n_out / n_in, _snr(n_out, n_conv), _snr(n_out, n_noise), n_in, n_out, n_conv, n_noise))
    rep = _new_report(scenario)
    rep.tables["efficiency.csv"] = csv_table(
        ("power_w", "eta", "snr", "stream_snr", "n_in", "n_out", "n_converter_noise", "n_noise"), rows
    )
    P = np.array([r[0] for r in rows])
    eta = np.array([r[1] for r in rows])
    sigma = np.array([math.sqrt(max(r[5], 1)) / r[4] for r in rows])
    m = rep.metrics
    L = scn.conversion.length_L
    if P.size >= 3:
        guess = (float(eta.max()) or 0.3, scn.conversion.normalized_efficiency_eta)
        fit = fit_sin2_efficiency(P, eta, L, sigma, p0=guess)
        m["eta_normalized"] = abs(fit["eta"])
        m["eta_normalized_stderr"] = fit.error("eta")
        m["eta_scale"] = fit["scale"]
    i_max = int(np.argmax(eta))
    m["eta_max"] = float(eta[i_max])
    m["power_at_eta_max"] = float(P[i_max])
    m["snr_at_eta_max"] = rows[i_max][2]
    ref = scn.pump.power
    if ref in scn.powers:
        k = scn.powers.index(ref)
        m["eta_at_pump_power"] = float(eta[k])
        m["snr_at_pump_power"] = rows[k][2]
    m["eta_model_at_pump_power"] = conversion_probability(scn.pump, scn.conversion)
    m["pump_power"] = ref
    rep.stats.update(wall_time_s=time.perf_counter() - t0, events=n_events, points=len(rows))
    return rep


RUNNERS = {
    "hbt_visible": run_hbt,
    "hbt_converted": run_hbt,
    "hbt_cross": run_cross_hbt,
    "michelson": run_michelson,
    "lifetime": run_lifetime,
    "efficiency_sweep": run_efficiency_sweep,
}


def run(scenario: Scenario, out_dir=None) -> RunReport:
    """Run any scenario; with ``out_dir`` the CSV tables and report are written there."""
    rep = RUNNERS[scenario.kind](scenario)
    if out_dir is not None:
        rep.write(out_dir)
    return rep


__all__ = [
    "RUNNERS",
    "convert",
    "run",
    "run_cross_hbt",
    "run_efficiency_sweep",
    "run_hbt",
    "run_lifetime",
    "run_michelson",
    "source_stream",
]

"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  Tolerances are pinned here and nowhere else.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import erfc

from ddlab import dist_fit
from ddlab import distributions as dists
from ddlab.channel_model import GridSpec, PathSet, load_tddl_preset, make_pilot_values, synthesize_tf_grid
from ddlab.dd_estimator import coarse_dd, detect_mpc, estimate_noise_floor, extract_pilot_fading, reconstruct_dd, refine_paths
from ddlab.otfs_link import build_hdd, run_ber_sweep, run_mismatch_experiment
from ddlab.stationarity import cdd_matrix, dd_power, quasi_stationary_intervals


def report(num: int, ok: bool, detail: str) -> None:
    print(f"[ACCEPTANCE {num}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


def as_paths(grid: GridSpec, ells, kays, coeffs) -> PathSet:
    taus = np.asarray(ells, float) / (grid.M * grid.delta_f_hz)
    nus = np.asarray(kays, float) / (grid.N * grid.symbol_time_s)
    return PathSet(taus, nus, np.asarray(coeffs, complex))


def test_criterion_1_off_grid_recovery():
    """TDDL-C delays/Dopplers on fractional bins: <=0.15 bin, <=1 dB, <=1e-3."""
    t0 = time.perf_counter()
    spec = GridSpec(128, 64, 15e3, 2, 2)
    model = load_tddl_preset("TDDL-C")
    # fixed mapping constants chosen so paths land on well-separated
    # fractional bins: delays 0 / 927.93 / 2139.24 ns -> l = 0 / 20.45 / 47.15,
    # Dopplers 150.52 / 38.95 / -21.64 Hz -> k = 7.526 / 1.948 / -1.082
    delay_to_bins = 20.45 / 927.93
    doppler_to_bins = 0.05
    ells = np.array([t.delay_ns for t in model.taps]) * delay_to_bins
    kays = np.array([t.doppler_hz for t in model.taps]) * doppler_to_bins
    amps = 10.0 ** (np.array([t.power_db for t in model.taps]) / 20.0)
    rng = np.random.default_rng(7)
    coeffs = amps * np.exp(2j * math.pi * rng.random(3))

    pilots = make_pilot_values(spec, 3)
    tf = synthesize_tf_grid(as_paths(spec, ells, kays, coeffs), spec, pilots)
    grid = coarse_dd(extract_pilot_fading(tf, pilots))
    peaks = detect_mpc(grid, estimate_noise_floor(grid))
    paths = refine_paths(grid, peaks[:3])
    rec = reconstruct_dd(paths, spec)
    residual = float(np.linalg.norm(rec.grid - grid.grid) / np.linalg.norm(grid.grid))

    worst_l = worst_k = worst_db = 0.0
    for p in paths:
        i = int(np.argmin(np.abs(p.l_hat - ells)))
        worst_l = max(worst_l, abs(p.l_hat - ells[i]))
        worst_k = max(worst_k, abs(p.k_hat - kays[i]))
        worst_db = max(worst_db, abs(20 * math.log10(abs(p.h_hat) / amps[i])))
    elapsed = time.perf_counter() - t0

    ok = (len(peaks) == 3 and len(paths) == 3 and worst_l <= 0.15 and worst_k <= 0.15
          and worst_db <= 1.0 and residual <= 1e-3 and elapsed < 10.0)
    report(1, ok, f"3 paths; |dl|<={worst_l:.2e}, |dk|<={worst_k:.2e} bins, "
                  f"|dP|<={worst_db:.2e} dB, residual={residual:.2e}, {elapsed:.2f}s")


def test_criterion_2_channel_matrix_oracle():
    """build_hdd action matches the literal double-sum on 20 random path sets."""
    t0 = time.perf_counter()
    grid = GridSpec(8, 4, 15e3, 1, 1)
    rng = np.random.default_rng(11)
    nn = np.arange(4)
    mm = np.arange(8)
    worst = 0.0
    for _ in range(20):
        p_count = int(rng.integers(1, 5))
        ells = rng.uniform(0, 7.5, p_count)
        kays = rng.uniform(-1.9, 1.9, p_count)
        coeffs = rng.normal(size=p_count) + 1j * rng.normal(size=p_count)
        ps = as_paths(grid, ells, kays, coeffs)
        x = rng.normal(size=32) + 1j * rng.normal(size=32)
        hx = build_hdd(ps, grid).matrix @ x

        xg = x.reshape(4, 8)
        direct = np.zeros((4, 8), dtype=complex)
        for k in range(4):
            for l in range(8):
                acc = 0j
                for kp in range(4):
                    for lp in range(8):
                        kern = 0j
                        for li, ki, ci, tau, nu in zip(ells, kays, coeffs, ps.taus_s, ps.nus_hz):
                            d_n = np.sum(np.exp(-2j * math.pi * (k - kp - ki) * nn / 4))
                            d_m = np.sum(np.exp(-2j * math.pi * (l - lp - li) * mm / 8))
                            kern += ci * np.exp(-2j * math.pi * nu * tau) * d_n * d_m
                        acc += xg[kp, lp] * kern
                direct[k, l] = acc / 32.0
        rel = np.linalg.norm(hx - direct.reshape(-1)) / np.linalg.norm(direct)
        worst = max(worst, float(rel))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 5.0
    report(2, ok, f"worst relative error {worst:.2e} over 20 path sets, {elapsed:.2f}s")


def test_criterion_3_awgn_validation():
    """Single-tap QPSK BER matches Q(sqrt(2 Eb/N0)) within 3 sigma at 1e6 bits."""
    t0 = time.perf_counter()
    grid = GridSpec(64, 32, 15e3, 1, 1)
    bits_per_frame = 2 * 64 * 32
    frames = math.ceil(1e6 / bits_per_frame)
    details = []
    ok = True
    for ebn0 in (4.0, 6.0, 8.0):
        snr_db = ebn0 + 10 * math.log10(2)
        (pt,) = run_ber_sweep("awgn", [snr_db], frames, grid, seed=int(ebn0 * 10))
        p = 0.5 * erfc(math.sqrt(10 ** (ebn0 / 10)))
        sigma = math.sqrt(p * (1 - p) / pt.bits)
        ok &= abs(pt.ber - p) < 3 * sigma
        details.append(f"Eb/N0={ebn0:g}: ber={pt.ber:.3e} theory={p:.3e} 3sig={3*sigma:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120.0
    report(3, ok, "; ".join(details) + f"; {elapsed:.1f}s")


def test_criterion_4_distribution_selection():
    """Each catalog amplitude spec: correct family in >=90 of 100 trials."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    specs = []
    for name in ("TDDL-A", "TDDL-B", "TDDL-C"):
        specs += [(f"{name} tap {i + 1}", t.amplitude)
                  for i, t in enumerate(load_tddl_preset(name).taps)]
    ok = True
    worst = (None, 100)
    for label, spec in specs:
        hits = 0
        for _ in range(100):
            sel = dist_fit.select_best(dists.sample(spec, rng, 1000))
            hits += sel.best.family is spec.family
        ok &= hits >= 90
        if hits < worst[1]:
            worst = (f"{label} ({spec.family.value})", hits)
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120.0
    report(4, ok, f"12 specs x 100 trials; worst {worst[0]} at {worst[1]}/100; {elapsed:.1f}s")


def test_criterion_5_stationarity_boundary():
    """Piecewise channel: boundary within one window; T_mean monotone in alpha."""
    spec = GridSpec(64, 32, 15e3, 2, 2)
    pilots = make_pilot_values(spec, 5)
    regime_a = as_paths(spec, [4.3, 13.6], [2.2, -3.4], [1.0, 0.4 + 0.2j])
    regime_b = as_paths(spec, [22.9, 28.4], [6.6, -1.3], [0.9 - 0.3j, 0.5])
    step_s = 1e-3
    spectra = []
    for w in range(20):
        ps = regime_a if w < 10 else regime_b
        grid = coarse_dd(extract_pilot_fading(synthesize_tf_grid(ps, spec, pilots), pilots))
        spectra.append(dd_power(grid, w * step_s))
    matrix = cdd_matrix(spectra)

    rep09 = quasi_stationary_intervals(matrix, 0.9)
    boundary_ok = (len(rep09.intervals) == 2
                   and abs(rep09.intervals[0][1] - 10 * step_s) <= step_s
                   and abs(rep09.intervals[1][0] - 10 * step_s) <= step_s)
    means = [quasi_stationary_intervals(matrix, a).t_mean_ms for a in (0.7, 0.8, 0.9)]
    monotone_ok = means[0] >= means[1] >= means[2]
    ok = boundary_ok and monotone_ok
    report(5, ok, f"intervals@0.9={rep09.intervals}, t_mean(0.7/0.8/0.9)={means} ms")


def test_criterion_6_invariance_ber_ordering():
    """TDDL-A equalizer aging: BER rises with lag; the T_QS lag is worst."""
    t0 = time.perf_counter()
    model = load_tddl_preset("TDDL-A")
    grid = GridSpec(32, 16, 15e3, 1, 1)
    qi_lags = sorted({t.t_qi_min_ms for t in model.taps})  # 0.93, 1.4, 1.87, 2.8
    lags = [0.0, *qi_lags, model.t_qs_ms]
    snrs = [10.0, 14.0]
    results = dict(run_mismatch_experiment(model, lags, snrs, 300, grid, seed=606))

    def sig_less(a, b) -> bool:
        # one-sided z-test that BER(a) < BER(b) at 95%
        pa, pb = a.ber, b.ber
        se = math.sqrt(pa * (1 - pa) / a.bits + pb * (1 - pb) / b.bits)
        return (pb - pa) > 1.645 * se

    ok = True
    lines = []
    for i, snr in enumerate(snrs):
        chain = [results[lag][i] for lag in (0.0, 0.93, 2.8, model.t_qs_ms)]
        ok &= all(sig_less(a, b) for a, b in zip(chain, chain[1:]))
        for qi in qi_lags:
            ok &= sig_less(results[qi][i], results[model.t_qs_ms][i])
        lines.append(f"snr {snr:g}: " + " ".join(
            f"{lag:g}ms={results[lag][i].ber:.2e}" for lag in lags))
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600.0
    report(6, ok, "; ".join(lines) + f"; {elapsed:.0f}s")


def test_criterion_7_model_agreement():
    """Two independent streams of one preset agree within 95% binomial CIs."""
    from ddlab.otfs_link import binomial_confidence

    t0 = time.perf_counter()
    model = load_tddl_preset("TDDL-A")
    # small frames keep errors from clustering within one fade, so the
    # bit-level binomial interval is a faithful error model here
    grid = GridSpec(8, 4, 15e3, 1, 1)
    snrs = [6.0, 10.0, 14.0]
    a = run_ber_sweep(model, snrs, 4000, grid, seed=111)
    b = run_ber_sweep(model, snrs, 4000, grid, seed=222)
    ok = True
    lines = []
    for pa, pb in zip(a, b):
        lo_a, hi_a = binomial_confidence(pa.bit_errors, pa.bits)
        lo_b, hi_b = binomial_confidence(pb.bit_errors, pb.bits)
        ok &= max(lo_a, lo_b) <= min(hi_a, hi_b)
        lines.append(f"snr {pa.snr_db:g}: {pa.ber:.2e} vs {pb.ber:.2e}")
    elapsed = time.perf_counter() - t0
    report(7, ok, "; ".join(lines) + f"; {elapsed:.0f}s")


def test_criterion_8_property_suites():
    """Full module invariant battery at 1000 generated cases per property."""
    from test_properties import PROPERTIES

    t0 = time.perf_counter()
    for prop in PROPERTIES:
        prop()
    elapsed = time.perf_counter() - t0
    report(8, True, f"{len(PROPERTIES)} properties x 1000 cases, {elapsed:.0f}s")

"""Command-line surface: generate | estimate | analyze | fit | simulate | report.

Every command accepts --config (a TOML document whose keys mirror the long
flag names; explicit flags win), --seed, --out, and --force.  Randomized
commands without --seed draw one and record it, so every run is
reproducible from its metadata.json.  Data CSVs contain no timestamps;
those live in metadata.json only.

Exit codes: 0 success, 2 validation error, 3 I/O or format error,
4 numeric failure.  DDLAB_LOG selects the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib

from . import dist_fit, io_formats, stationarity
from .channel_model import (
    EvolutionConfig,
    GridSpec,
    TddlRealizer,
    load_tddl_preset,
    make_pilot_values,
    model_from_json,
    model_to_json,
    power_consistency_notes,
    synthesize_tf_grid,
)
from .dd_estimator import coarse_dd, detect_mpc, estimate_noise_floor, extract_pilot_fading, refine_paths
from .dist_fit import rician_k_factor, select_best
from .distributions import Family
from .errors import ConfigurationError, DdlabError, FitFailure, FormatError, NumericError
from .otfs_link import run_ber_sweep, run_mismatch_experiment

log = logging.getLogger("ddlab")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _setup_logging() -> None:
    level = os.environ.get("DDLAB_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML in {path}: {exc}") from exc


def _merge(args: argparse.Namespace, config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _resolve_seed(seed) -> int:
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
        log.info("auto-drawn seed: %d", seed)
    return int(seed)


def _prepare_out(out: str, force: bool) -> Path:
    path = Path(out)
    if path.exists() and not force:
        if path.is_file() or any(path.iterdir()):
            raise ConfigurationError(f"output path {path} exists; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_metadata(out: Path, command: str, resolved: dict) -> None:
    meta = {
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config": resolved,
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")


def _read_metadata(dirpath: Path) -> dict:
    meta_path = dirpath / "metadata.json"
    if not meta_path.exists():
        raise FormatError(f"{dirpath} has no metadata.json (not a ddlab output directory?)")
    return json.loads(meta_path.read_text())


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        m, n = text.lower().split("x")
        return int(m), int(n)
    except ValueError as exc:
        raise ConfigurationError(f"grid must look like 'MxN', got {text!r}") from exc


def _parse_float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text)
    if ":" in text:
        start, step, stop = (float(v) for v in text.split(":"))
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


def _validate_snr_grid(values: list[float]) -> list[float]:
    if not values:
        raise ConfigurationError("empty SNR grid")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigurationError(f"SNR grid must be strictly ascending: {values}")
    return values


def _load_model(args, config):
    name = _merge(args, config, "model", None)
    model_json = _merge(args, config, "model_json", None)
    if name and model_json:
        raise ConfigurationError("give either --model or --model-json, not both")
    if model_json:
        try:
            return model_from_json(Path(model_json).read_text())
        except OSError as exc:
            raise FormatError(f"cannot read model file {model_json}: {exc}") from exc
    if name:
        return load_tddl_preset(name)
    return None


def _grid_from(args, config, default_grid="32x16", default_df=15e3,
               default_spacing=(2, 2)) -> GridSpec:
    m, n = _parse_grid(_merge(args, config, "grid", default_grid))
    delta_f = float(_merge(args, config, "delta_f_hz", default_df))
    d_f = int(_merge(args, config, "df", default_spacing[0]))
    d_t = int(_merge(args, config, "dt", default_spacing[1]))
    return GridSpec(m, n, delta_f, d_f, d_t)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    config = _load_config(args.config)
    model = _load_model(args, config)
    if model is None:
        raise ConfigurationError("generate needs --model or --model-json")
    grid = _grid_from(args, config)
    duration_ms = float(_merge(args, config, "duration_ms", model.t_qs_ms))
    step_ms = _merge(args, config, "window_step_ms", None)
    step_ms = float(step_ms) if step_ms is not None else grid.d_t * grid.symbol_time_s * 1e3
    noise_power = float(_merge(args, config, "noise_power", 0.0))
    pilot_seed = int(_merge(args, config, "pilot_seed", 0))
    seed = _resolve_seed(_merge(args, config, "seed", None))
    evolution = EvolutionConfig(enabled=not bool(_merge(args, config, "no_evolution", False)))
    strict_power = not bool(_merge(args, config, "raw_power", False))

    n_windows = max(1, int(round(duration_ms / step_ms)))
    out = _prepare_out(args.out, args.force)
    (out / "grids").mkdir(exist_ok=True)

    for note in power_consistency_notes(model):
        log.info("%s: %s", model.name, note)

    rng = np.random.default_rng(seed)
    realizer = TddlRealizer(model, grid, rng, evolution=evolution, strict_power=strict_power)
    pilots = make_pilot_values(grid, pilot_seed)
    noise_rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 987)))

    trace = []
    for w in range(n_windows):
        ps = realizer.at(w * step_ms * 1e-3)
        trace.append(ps)
        tf = synthesize_tf_grid(ps, grid, pilots, noise_power,
                                noise_rng if noise_power > 0 else None)
        io_formats.write_tf_grid(out / "grids" / f"window_{w:04d}.tfg", tf)
    io_formats.write_trace(out / "trace.txt", trace)
    (out / "model.json").write_text(model_to_json(model))

    _write_metadata(out, "generate", {
        "model": model.name, "duration_ms": duration_ms, "window_step_ms": step_ms,
        "n_windows": n_windows, "grid": f"{grid.M}x{grid.N}", "delta_f_hz": grid.delta_f_hz,
        "d_f": grid.d_f, "d_t": grid.d_t, "noise_power": noise_power,
        "pilot_seed": pilot_seed, "seed": seed, "evolution": evolution.enabled,
        "strict_power": strict_power,
    })
    print(f"generate: wrote {n_windows} windows to {out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    config = _load_config(args.config)
    src = Path(_merge(args, config, "in_dir", args.in_dir) or "")
    meta = _read_metadata(src)["config"]
    grid_files = sorted((src / "grids").glob("window_*.tfg"))
    if not grid_files:
        raise ConfigurationError(f"no grid files found under {src}/grids")
    threshold_db = float(_merge(args, config, "threshold_db", 6.0))
    floor_mode = str(_merge(args, config, "noise_floor", "median"))
    known_power = _merge(args, config, "known_noise_power", None)
    if floor_mode == "known" and known_power is None:
        raise ConfigurationError("--noise-floor known requires --known-noise-power")
    write_coarse = not bool(_merge(args, config, "no_coarse", False))

    out = _prepare_out(args.out, args.force)
    (out / "est").mkdir(exist_ok=True)
    if write_coarse:
        (out / "coarse").mkdir(exist_ok=True)

    pilot_seed = int(meta.get("pilot_seed", 0))
    pilots = None
    counts = []
    for w, path in enumerate(grid_files):
        tf = io_formats.read_tf_grid(path)
        if pilots is None:
            pilots = make_pilot_values(tf.spec, pilot_seed)
        grid = coarse_dd(extract_pilot_fading(tf, pilots))
        floor = estimate_noise_floor(
            grid, float(known_power) if floor_mode == "known" else None)
        peaks = detect_mpc(grid, floor, threshold_db)
        paths = refine_paths(grid, peaks) if peaks else []
        io_formats.write_paths_csv(out / "est" / f"window_{w:04d}.csv", paths)
        if write_coarse:
            io_formats.write_dd_grid(out / "coarse" / f"window_{w:04d}.ddg", grid)
        counts.append(len(paths))

    _write_metadata(out, "estimate", {
        "in_dir": str(src), "threshold_db": threshold_db, "noise_floor": floor_mode,
        "known_noise_power": known_power, "n_windows": len(grid_files),
        "window_step_ms": meta.get("window_step_ms"),
        "grid": meta.get("grid"), "delta_f_hz": meta.get("delta_f_hz"),
        "d_f": meta.get("d_f"), "d_t": meta.get("d_t"), "paths_per_window": counts,
    })
    print(f"estimate: {len(grid_files)} windows, paths per window "
          f"min={min(counts)} max={max(counts)}; results in {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    config = _load_config(args.config)
    src = Path(_merge(args, config, "in_dir", args.in_dir) or "")
    meta = _read_metadata(src)["config"]
    alphas = sorted(_parse_float_list(_merge(args, config, "alphas", "0.7,0.8,0.9")))
    alpha_main = float(_merge(args, config, "alpha", 0.9))
    merge_mode = str(_merge(args, config, "merge_mode", "pairwise"))
    tol_l = float(_merge(args, config, "tol_l", 0.5))
    tol_k = float(_merge(args, config, "tol_k", 0.5))
    step_ms = meta.get("window_step_ms")
    if step_ms is None:
        raise ConfigurationError("input metadata lacks window_step_ms")
    step_s = float(step_ms) * 1e-3

    est_files = sorted((src / "est").glob("window_*.csv"))
    if not est_files:
        raise ConfigurationError(f"no estimation outputs under {src}/est")
    per_window = [io_formats.read_paths_csv(p) for p in est_files]
    out = _prepare_out(args.out, args.force)

    if len(est_files) < 2:
        print("analyze: single-window input; stationarity and invariance skipped")
        _write_metadata(out, "analyze", {"in_dir": str(src), "skipped": "single window"})
        return EXIT_OK

    # CDD over coarse DD spectra when available, else over reconstructions
    coarse_files = sorted((src / "coarse").glob("window_*.ddg"))
    spectra = []
    if coarse_files:
        for w, p in enumerate(coarse_files):
            spectra.append(stationarity.dd_power(io_formats.read_dd_grid(p), w * step_s))
    else:
        from .dd_estimator import reconstruct_dd

        m, n = _parse_grid(meta["grid"])
        spec = GridSpec(m, n, float(meta["delta_f_hz"]), int(meta["d_f"]), int(meta["d_t"]))
        for w, paths in enumerate(per_window):
            spectra.append(stationarity.dd_power(reconstruct_dd(paths, spec), w * step_s))

    matrix = stationarity.cdd_matrix(spectra)
    io_formats.write_similarity_csv(out / "cdd_matrix.csv", matrix)
    for alpha in sorted(set(alphas) | {alpha_main}):
        report = stationarity.quasi_stationary_intervals(matrix, alpha, merge_mode)
        io_formats.write_intervals_csv(out / f"qs_intervals_alpha{alpha:.2f}.csv",
                                       report, label="CDD")

    m, n = _parse_grid(meta["grid"])
    spec = GridSpec(m, n, float(meta["delta_f_hz"]), int(meta["d_f"]), int(meta["d_t"]))
    tracks = stationarity.track_paths(per_window, (tol_l, tol_k),
                                      periods=(spec.delay_period, spec.doppler_period))
    tracks = [t for t in tracks if len(t) >= 2]

    weighted_rows = []
    qi_rows = []
    fit_rows = []
    for t_idx, track in enumerate(tracks):
        l_w, k_w = stationarity.weighted_params(track)
        weighted_rows.append((t_idx, len(track), l_w, k_w))
        for alpha in alphas:
            rep = stationarity.quasi_invariant_intervals(track, alpha, step_s, merge_mode)
            qi_rows.append((t_idx, alpha, rep.t_max_ms, rep.t_min_ms, rep.t_mean_ms))
        amplitudes = np.abs(track.coefficients())
        if np.all(amplitudes > 0):
            try:
                sel = select_best(amplitudes)
            except FitFailure as exc:
                log.warning("track %d: amplitude fit skipped (%s)", t_idx, exc)
                continue
            for cand in sel.candidates:
                fit_rows.append({
                    "path": t_idx, "family": cand.family.value,
                    "params": " ".join(repr(p) for p in cand.params),
                    "ks_statistic": repr(cand.ks_statistic),
                    "log_likelihood": repr(cand.log_likelihood),
                    "selected": int(cand.family is sel.best.family),
                    "low_confidence": int(sel.low_confidence),
                })

    with open(out / "weighted_params.csv", "w") as fh:
        fh.write("track,windows,l_weighted,k_weighted\n")
        for t_idx, nwin, l_w, k_w in weighted_rows:
            fh.write(f"{t_idx},{nwin},{l_w!r},{k_w!r}\n")
    with open(out / "qi_summary.csv", "w") as fh:
        fh.write("track,alpha,t_qi_max_ms,t_qi_min_ms,t_qi_mean_ms\n")
        for t_idx, alpha, tmax, tmin, tmean in qi_rows:
            fh.write(f"{t_idx},{alpha!r},{tmax!r},{tmin!r},{tmean!r}\n")
    if fit_rows:
        io_formats.write_fit_table_csv(out / "fit_table.csv", fit_rows)

    _write_metadata(out, "analyze", {
        "in_dir": str(src), "alphas": alphas, "alpha": alpha_main, "merge_mode": merge_mode,
        "tol_l": tol_l, "tol_k": tol_k, "n_tracks": len(tracks),
        "window_step_ms": step_ms,
    })
    print(f"analyze: {len(tracks)} tracks, outputs in {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    config = _load_config(args.config)
    samples_file = _merge(args, config, "samples", None)
    if samples_file is None:
        raise ConfigurationError("fit needs --samples FILE (one amplitude per line)")
    try:
        values = np.loadtxt(samples_file, ndmin=1)
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read samples from {samples_file}: {exc}") from exc
    out = _prepare_out(args.out, args.force)
    sel = select_best(values)
    rows = []
    for cand in sel.candidates:
        rows.append({
            "path": 0, "family": cand.family.value,
            "params": " ".join(repr(p) for p in cand.params),
            "ks_statistic": repr(cand.ks_statistic),
            "log_likelihood": repr(cand.log_likelihood),
            "selected": int(cand.family is sel.best.family),
            "low_confidence": int(sel.low_confidence),
        })
    io_formats.write_fit_table_csv(out / "fit_table.csv", rows)
    _write_metadata(out, "fit", {"samples": str(samples_file), "n": int(values.size),
                                 "best": sel.best.family.value})
    flag = " (low confidence)" if sel.low_confidence else ""
    print(f"fit: best family {sel.best.family.value}{flag}, params {sel.best.params}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    awgn = bool(_merge(args, config, "awgn", False))
    model = _load_model(args, config)
    trace_file = _merge(args, config, "trace", None)
    sources = [x for x in (awgn or None, model, trace_file) if x]
    if len(sources) != 1:
        raise ConfigurationError("simulate needs exactly one of --awgn, --model/--model-json, --trace")

    snr_text = _merge(args, config, "snr_db", "0:2:14")
    snr_grid = _validate_snr_grid(_parse_float_list(snr_text))
    frames = int(_merge(args, config, "frames", 50))
    if frames < 1:
        raise ConfigurationError("--frames must be >= 1")
    grid = _grid_from(args, config, default_spacing=(1, 1))
    seed = _resolve_seed(_merge(args, config, "seed", None))
    lags_text = _merge(args, config, "lags", None)
    strict_power = not bool(_merge(args, config, "raw_power", False))

    if awgn:
        channel, channel_name = "awgn", "awgn"
    elif model is not None:
        channel, channel_name = model, model.name
    else:
        channel = io_formats.read_trace(trace_file)
        channel_name = Path(trace_file).name

    out = _prepare_out(args.out, args.force)
    rows = []
    if lags_text is not None:
        if awgn:
            raise ConfigurationError("--lags needs an evolving channel, not --awgn")
        lags = _parse_float_list(lags_text)
        results = run_mismatch_experiment(channel, lags, snr_grid, frames, grid, seed,
                                          strict_power=strict_power)
        for lag, points in results:
            rows += [(channel_name, lag, pt) for pt in points]
        io_formats.write_ber_csv(out / "mismatch_ber.csv", rows)
        written = "mismatch_ber.csv"
    else:
        points = run_ber_sweep(channel, snr_grid, frames, grid, seed, strict_power=strict_power)
        rows = [(channel_name, 0.0, pt) for pt in points]
        io_formats.write_ber_csv(out / "ber.csv", rows)
        written = "ber.csv"

    _write_metadata(out, "simulate", {
        "channel": channel_name, "snr_db": snr_grid, "frames": frames,
        "grid": f"{grid.M}x{grid.N}", "delta_f_hz": grid.delta_f_hz, "seed": seed,
        "lags_ms": None if lags_text is None else _parse_float_list(lags_text),
        "strict_power": strict_power,
    })
    print(f"simulate: wrote {written} ({len(rows)} rows) to {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    config = _load_config(args.config)
    src = Path(_merge(args, config, "in_dir", args.in_dir) or ".")
    model = _load_model(args, config)
    out_file = Path(args.out if args.out else src / "report.md")
    if out_file.exists() and not args.force:
        raise ConfigurationError(f"{out_file} exists; pass --force to overwrite")

    lines = ["# ddlab report", ""]
    if model is not None:
        lines += [f"## Model {model.name}", "",
                  f"Quasi-stationary interval: {model.t_qs_ms} ms", "",
                  "| tap | delay (ns) | power (dB) | Doppler (Hz) | amplitude | "
                  "K linear | K dB | K dB (reported) | min QI (ms) |",
                  "|---|---|---|---|---|---|---|---|---|"]
        for i, tap in enumerate(model.taps, start=1):
            if tap.amplitude.family is Family.RICIAN:
                k_lin, k_db = rician_k_factor(*tap.amplitude.params)
                k_lin, k_db = f"{k_lin:.2f}", f"{k_db:.2f}"
            else:
                k_lin = k_db = "-"
            reported = tap.k_factor_db_reported
            lines.append(
                f"| {i} | {tap.delay_ns} | {tap.power_db} | {tap.doppler_hz} | "
                f"{tap.amplitude.family.value}{tap.amplitude.params} | {k_lin} | {k_db} | "
                f"{reported if reported is not None else '-'} | {tap.t_qi_min_ms} |")
        notes = power_consistency_notes(model)
        if notes:
            lines += ["", "Power-scale notes (derived vs. catalog dB column):"]
            lines += [f"- {n}" for n in notes]
        lines.append("")

    for name in ("ber.csv", "mismatch_ber.csv"):
        path = src / name
        if path.exists():
            lines += [f"## {name}", "", "| channel | lag (ms) | SNR (dB) | Eb/N0 (dB) | bits | errors | BER |",
                      "|---|---|---|---|---|---|---|"]
            for row in io_formats.read_ber_csv(path):
                lines.append(
                    f"| {row['channel']} | {row['lag_ms']:g} | {row['snr_db']:g} | "
                    f"{row['ebn0_db']:.2f} | {row['bits']} | {row['errors']} | {row['ber']:.3e} |")
            lines.append("")

    for pattern, title in (("qs_intervals_alpha*.csv", "Quasi-stationary intervals"),
                           ("qi_summary.csv", "Quasi-invariant summary"),
                           ("fit_table.csv", "Amplitude fits"),
                           ("weighted_params.csv", "Weighted path parameters")):
        for path in sorted(src.glob(pattern)):
            lines += [f"## {path.name}", "", "```", path.read_text().strip(), "```", ""]

    out_file.write_text("\n".join(lines) + "\n")
    print(f"report: wrote {out_file}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, need_out: bool = True) -> None:
    p.add_argument("--config", help="TOML config file; flags override its keys")
    p.add_argument("--seed", type=int, help="random seed (auto-drawn and recorded if omitted)")
    if need_out:
        p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.add_argument("--threads", type=int, default=1,
                   help="reserved; commands are single-process")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddlab",
                                     description="Delay-Doppler channel modeling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize an evolving channel trace and TF grids")
    p.add_argument("--model", help="preset name: TDDL-A, TDDL-B, TDDL-C")
    p.add_argument("--model-json", dest="model_json", help="path to a model JSON document")
    p.add_argument("--duration-ms", dest="duration_ms", type=float)
    p.add_argument("--window-step-ms", dest="window_step_ms", type=float)
    p.add_argument("--grid", help="MxN (default 32x16)")
    p.add_argument("--delta-f-hz", dest="delta_f_hz", type=float)
    p.add_argument("--df", type=int, help="pilot spacing in frequency")
    p.add_argument("--dt", type=int, help="pilot spacing in time")
    p.add_argument("--noise-power", dest="noise_power", type=float)
    p.add_argument("--pilot-seed", dest="pilot_seed", type=int)
    p.add_argument("--no-evolution", dest="no_evolution", action="store_const", const=True)
    p.add_argument("--raw-power", dest="raw_power", action="store_const", const=True,
                   help="keep catalog distribution scales instead of matching power_db")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("estimate", help="run the DD estimation pipeline on generated grids")
    p.add_argument("--in", dest="in_dir", required=True, help="generate output directory")
    p.add_argument("--threshold-db", dest="threshold_db", type=float)
    p.add_argument("--noise-floor", dest="noise_floor", choices=["median", "known"])
    p.add_argument("--known-noise-power", dest="known_noise_power", type=float)
    p.add_argument("--no-coarse", dest="no_coarse", action="store_const", const=True)
    _add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("analyze", help="stationarity, invariance, and fit analysis")
    p.add_argument("--in", dest="in_dir", required=True, help="estimate output directory")
    p.add_argument("--alpha", type=float)
    p.add_argument("--alphas", help="comma list of thresholds")
    p.add_argument("--tol-l", dest="tol_l", type=float)
    p.add_argument("--tol-k", dest="tol_k", type=float)
    p.add_argument("--merge-mode", dest="merge_mode", choices=["pairwise", "anchor"],
                   help="run-merging rule for interval extraction")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit amplitude distributions to a sample file")
    p.add_argument("--samples", help="text file, one amplitude per line")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="OTFS BER sweeps and equalizer-mismatch runs")
    p.add_argument("--model", help="preset name")
    p.add_argument("--model-json", dest="model_json")
    p.add_argument("--trace", help="replay a stored path-set trace")
    p.add_argument("--awgn", action="store_const", const=True,
                   help="single ideal tap; analytic-QPSK validation")
    p.add_argument("--snr-db", dest="snr_db", help="comma list or start:step:stop")
    p.add_argument("--frames", type=int)
    p.add_argument("--grid", help="MxN (default 32x16)")
    p.add_argument("--delta-f-hz", dest="delta_f_hz", type=float)
    p.add_argument("--lags", help="comma list of equalizer lags in ms")
    p.add_argument("--raw-power", dest="raw_power", action="store_const", const=True)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="summarize outputs of other commands as markdown")
    p.add_argument("--in", dest="in_dir", help="directory with ddlab outputs")
    p.add_argument("--model", help="include a preset parameter table")
    p.add_argument("--model-json", dest="model_json")
    p.add_argument("--out", help="output markdown file (default <in>/report.md)")
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--force", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DdlabError as exc:  # pragma: no cover - other toolkit errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())

"""File formats and the command-line pipeline."""

import json
import struct

import numpy as np
import pytest

from ddlab import io_formats
from ddlab.channel_model import GridSpec, PathSet, TfGrid
from ddlab.cli import main as cli_main
from ddlab.dd_estimator import EstimatedPath, PeriodicDdGrid
from ddlab.errors import FormatError
from ddlab.otfs_link import BerPoint


def c64(arr):
    return np.asarray(arr).astype(np.complex64).astype(complex)


class TestGridFiles:
    def test_tf_grid_round_trip_and_header_layout(self, tmp_path, rng):
        spec = GridSpec(16, 8, 60e3, 2, 2)
        data = c64(rng.normal(size=(16, 8)) + 1j * rng.normal(size=(16, 8)))
        path = tmp_path / "grid.tfg"
        io_formats.write_tf_grid(path, TfGrid(data, spec))

        raw = path.read_bytes()
        magic, m, n, d_f, d_t, delta_f = struct.unpack_from("<4sIIIId", raw, 0)
        assert (magic, m, n, d_f, d_t, delta_f) == (b"DDG1", 16, 8, 2, 2, 60e3)
        assert len(raw) == 28 + 16 * 8 * 8  # header + complex64 payload

        again = io_formats.read_tf_grid(path)
        assert again.spec == spec
        assert np.array_equal(again.grid, data)

    def test_dd_grid_round_trip(self, tmp_path, rng):
        spec = GridSpec(8, 4, 15e3, 1, 1)
        data = c64(rng.normal(size=(4, 8)) + 1j * rng.normal(size=(4, 8)))
        path = tmp_path / "grid.ddg"
        io_formats.write_dd_grid(path, PeriodicDdGrid(data, spec))
        again = io_formats.read_dd_grid(path)
        assert np.array_equal(again.grid, data)

    def test_write_read_write_is_byte_identical(self, tmp_path, rng):
        spec = GridSpec(8, 4, 15e3, 1, 1)
        data = rng.normal(size=(4, 8)) + 1j * rng.normal(size=(4, 8))
        p1, p2 = tmp_path / "a.ddg", tmp_path / "b.ddg"
        io_formats.write_dd_grid(p1, PeriodicDdGrid(data, spec))
        io_formats.write_dd_grid(p2, io_formats.read_dd_grid(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_reports_offset_zero(self, tmp_path):
        path = tmp_path / "bad.ddg"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(FormatError, match="byte 0"):
            io_formats.read_dd_grid(path)

    def test_truncated_payload_reports_offset(self, tmp_path):
        spec = GridSpec(8, 4, 15e3, 1, 1)
        path = tmp_path / "short.ddg"
        io_formats.write_dd_grid(path, PeriodicDdGrid(np.zeros((4, 8), complex), spec))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError, match="byte 28"):
            io_formats.read_dd_grid(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "tiny.ddg"
        path.write_bytes(b"DD")
        with pytest.raises(FormatError, match="truncated header"):
            io_formats.read_dd_grid(path)

    def test_dd_grid_csv_layout(self, tmp_path):
        spec = GridSpec(2, 2, 15e3, 1, 1)
        grid = PeriodicDdGrid(np.array([[1 + 2j, 0], [0, 3 - 1j]]), spec)
        path = tmp_path / "grid.csv"
        io_formats.write_dd_grid_csv(path, grid)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "k,l,re,im"
        assert lines[1] == "0,0,1.0,2.0"
        assert len(lines) == 5


class TestTraceAndPaths:
    def test_trace_round_trip_exact(self, tmp_path, rng):
        trace = []
        for w in range(4):
            trace.append(PathSet(
                rng.uniform(0, 1e-6, 3), rng.uniform(-200, 200, 3),
                rng.normal(size=3) + 1j * rng.normal(size=3), w * 1e-3))
        path = tmp_path / "trace.txt"
        io_formats.write_trace(path, trace)
        again = io_formats.read_trace(path)
        assert len(again) == 4
        for a, b in zip(trace, again):
            assert a.t_offset_s == b.t_offset_s
            assert np.array_equal(a.taus_s, b.taus_s)
            assert np.array_equal(a.nus_hz, b.nus_hz)
            assert np.array_equal(a.coeffs, b.coeffs)

    def test_trace_bad_field_count(self, tmp_path):
        path = tmp_path / "trace.txt"
        path.write_text("0.0 1.0 2.0\n")
        with pytest.raises(FormatError, match=":1"):
            io_formats.read_trace(path)

    def test_paths_csv_round_trip(self, tmp_path):
        paths = [
            EstimatedPath(5.25, -1.5, 0.5 - 0.25j, (3, 5), -35.0),
            EstimatedPath(12.0, 2.0, 0.1 + 0.9j, (2, 12), -80.0),
        ]
        f = tmp_path / "paths.csv"
        io_formats.write_paths_csv(f, paths)
        again = io_formats.read_paths_csv(f)
        assert again == paths

    def test_ber_csv_round_trip(self, tmp_path):
        rows = [("TDDL-A", 2.8, BerPoint(10.0, 5, 1024)), ("TDDL-A", 0.0, BerPoint(10.0, 1, 1024))]
        f = tmp_path / "ber.csv"
        io_formats.write_ber_csv(f, rows)
        parsed = io_formats.read_ber_csv(f)
        assert parsed[0]["lag_ms"] == 2.8
        assert parsed[0]["errors"] == 5
        assert parsed[0]["ber"] == pytest.approx(5 / 1024)


class TestCliPipeline:
    # pilot period is d_t/delta_f = 33.3 us, so 1 ms covers 30 windows
    GEN_ARGS = ["generate", "--model", "TDDL-C", "--duration-ms", "1",
                "--grid", "64x32", "--delta-f-hz", "60000", "--df", "2", "--dt", "2",
                "--seed", "7"]

    def test_full_pipeline(self, tmp_path):
        gen = tmp_path / "gen"
        est = tmp_path / "est"
        ana = tmp_path / "ana"
        assert cli_main(self.GEN_ARGS + ["--out", str(gen)]) == 0
        assert (gen / "trace.txt").exists()
        assert len(list((gen / "grids").glob("*.tfg"))) == 30

        assert cli_main(["estimate", "--in", str(gen), "--out", str(est), "--seed", "1"]) == 0
        counts = json.loads((est / "metadata.json").read_text())["config"]["paths_per_window"]
        assert all(c == 3 for c in counts)  # three multipath components per window

        assert cli_main(["analyze", "--in", str(est), "--out", str(ana), "--seed", "1"]) == 0
        assert (ana / "cdd_matrix.csv").exists()
        assert (ana / "qi_summary.csv").exists()
        assert (ana / "fit_table.csv").exists()

        report = tmp_path / "report.md"
        assert cli_main(["report", "--in", str(ana), "--model", "TDDL-C",
                         "--out", str(report)]) == 0
        text = report.read_text()
        assert "31.48" in text  # reported K value shown alongside the derived one
        assert "15.05" in text

    def test_generate_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli_main(self.GEN_ARGS + ["--out", str(a)]) == 0
        assert cli_main(self.GEN_ARGS + ["--out", str(b)]) == 0
        assert (a / "trace.txt").read_bytes() == (b / "trace.txt").read_bytes()
        assert (a / "grids/window_0003.tfg").read_bytes() == \
               (b / "grids/window_0003.tfg").read_bytes()

    def test_existing_output_refused_without_force(self, tmp_path):
        out = tmp_path / "gen"
        assert cli_main(self.GEN_ARGS + ["--out", str(out)]) == 0
        assert cli_main(self.GEN_ARGS + ["--out", str(out)]) == 2
        assert cli_main(self.GEN_ARGS + ["--out", str(out), "--force"]) == 0

    def test_absurd_threshold_detects_nothing(self, tmp_path):
        # noise sets a physical floor; nothing clears floor + 60 dB
        gen, est = tmp_path / "gen", tmp_path / "est"
        assert cli_main(self.GEN_ARGS + ["--noise-power", "1e-5", "--out", str(gen)]) == 0
        assert cli_main(["estimate", "--in", str(gen), "--out", str(est),
                         "--threshold-db", "60", "--seed", "1"]) == 0
        counts = json.loads((est / "metadata.json").read_text())["config"]["paths_per_window"]
        assert all(c == 0 for c in counts)

    def test_missing_input_dir_is_io_error(self, tmp_path):
        assert cli_main(["estimate", "--in", str(tmp_path / "nope"),
                         "--out", str(tmp_path / "est")]) == 3

    def test_grid_dimension_echo(self, tmp_path):
        out = tmp_path / "gen"
        assert cli_main(["generate", "--model", "TDDL-A", "--grid", "32x16",
                         "--duration-ms", "0.2", "--seed", "2", "--out", str(out)]) == 0
        grid = io_formats.read_tf_grid(next((out / "grids").glob("*.tfg")))
        assert grid.spec.M * grid.spec.N == 512

    def test_two_regime_trace_yields_two_intervals(self, tmp_path):
        # hand-built generate directory with a hard regime switch
        from ddlab.channel_model import PathSet, make_pilot_values, synthesize_tf_grid

        spec = GridSpec(64, 32, 60e3, 2, 2)
        gen = tmp_path / "gen"
        (gen / "grids").mkdir(parents=True)
        pilots = make_pilot_values(spec, 0)
        regime_a = PathSet([1.1e-6, 3.5e-6], [200.0, -310.0], [1.0, 0.4])
        regime_b = PathSet([6.0e-6, 7.4e-6], [600.0, -120.0], [0.9, 0.5])
        for w in range(16):
            ps = regime_a if w < 8 else regime_b
            io_formats.write_tf_grid(gen / "grids" / f"window_{w:04d}.tfg",
                                     synthesize_tf_grid(ps, spec, pilots))
        (gen / "metadata.json").write_text(json.dumps({"config": {
            "window_step_ms": 1.0, "pilot_seed": 0, "grid": "64x32",
            "delta_f_hz": 60e3, "d_f": 2, "d_t": 2}}))

        est, ana = tmp_path / "est", tmp_path / "ana"
        assert cli_main(["estimate", "--in", str(gen), "--out", str(est), "--seed", "1"]) == 0
        assert cli_main(["analyze", "--in", str(est), "--out", str(ana), "--seed", "1"]) == 0

        t_means = {}
        for alpha in ("0.70", "0.80", "0.90"):
            lines = (ana / f"qs_intervals_alpha{alpha}.csv").read_text().strip().splitlines()
            rows = [l for l in lines[1:] if l and not l.startswith(("stat", "value"))]
            if alpha == "0.90":
                assert len(rows) == 2  # the regime switch splits the axis
            t_means[alpha] = float(lines[-1].split(",")[-1])
        assert t_means["0.70"] >= t_means["0.80"] >= t_means["0.90"]

    def test_single_window_analyze_skips_stationarity(self, tmp_path):
        gen, est, ana = tmp_path / "gen", tmp_path / "est", tmp_path / "ana"
        args = list(self.GEN_ARGS)
        args[args.index("--duration-ms") + 1] = "0.01"
        assert cli_main(args + ["--out", str(gen)]) == 0
        assert cli_main(["estimate", "--in", str(gen), "--out", str(est), "--seed", "1"]) == 0
        assert cli_main(["analyze", "--in", str(est), "--out", str(ana), "--seed", "1"]) == 0
        assert not (ana / "cdd_matrix.csv").exists()


class TestCliSimulate:
    def test_awgn_run(self, tmp_path):
        out = tmp_path / "sim"
        assert cli_main(["simulate", "--awgn", "--snr-db", "4,7", "--frames", "3",
                         "--grid", "16x8", "--seed", "3", "--out", str(out)]) == 0
        rows = io_formats.read_ber_csv(out / "ber.csv")
        assert len(rows) == 2
        assert rows[0]["ebn0_db"] == pytest.approx(4 - 10 * np.log10(2))
        report = tmp_path / "sim_report.md"
        assert cli_main(["report", "--in", str(out), "--out", str(report)]) == 0
        assert "ber.csv" in report.read_text()

    def test_simulate_rerun_is_byte_identical(self, tmp_path):
        args = ["simulate", "--model", "TDDL-C", "--snr-db", "8", "--frames", "2",
                "--grid", "8x4", "--seed", "4"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli_main(args + ["--out", str(a)]) == 0
        assert cli_main(args + ["--out", str(b)]) == 0
        assert (a / "ber.csv").read_bytes() == (b / "ber.csv").read_bytes()

    def test_model_with_lags_writes_one_curve_per_lag(self, tmp_path):
        out = tmp_path / "sim"
        assert cli_main(["simulate", "--model", "TDDL-A", "--lags", "0,2.8,100.8",
                         "--snr-db", "10", "--frames", "2", "--grid", "8x4",
                         "--seed", "3", "--out", str(out)]) == 0
        rows = io_formats.read_ber_csv(out / "mismatch_ber.csv")
        assert sorted({r["lag_ms"] for r in rows}) == [0.0, 2.8, 100.8]

    def test_descending_snr_grid_rejected(self, tmp_path):
        code = cli_main(["simulate", "--awgn", "--snr-db", "7,4", "--frames", "1",
                         "--seed", "1", "--out", str(tmp_path / "x")])
        assert code == 2

    def test_duplicate_snr_grid_rejected(self, tmp_path):
        code = cli_main(["simulate", "--awgn", "--snr-db", "4,4", "--frames", "1",
                         "--seed", "1", "--out", str(tmp_path / "x")])
        assert code == 2

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text('snr_db = "5"\nframes = 9\ngrid = "8x4"\n')
        out = tmp_path / "sim"
        assert cli_main(["simulate", "--awgn", "--config", str(cfg), "--frames", "2",
                         "--seed", "1", "--out", str(out)]) == 0
        meta = json.loads((out / "metadata.json").read_text())["config"]
        assert meta["frames"] == 2  # flag wins
        assert meta["snr_db"] == [5.0]  # config supplies the rest

    def test_fit_command(self, tmp_path, rng):
        samples = tmp_path / "samples.txt"
        np.savetxt(samples, rng.rayleigh(0.0045, 2000))
        out = tmp_path / "fit"
        assert cli_main(["fit", "--samples", str(samples), "--seed", "1",
                         "--out", str(out)]) == 0
        meta = json.loads((out / "metadata.json").read_text())["config"]
        assert meta["best"] == "rayleigh"
        table = (out / "fit_table.csv").read_text().splitlines()
        assert len(table) == 5  # header + four families

    def test_trace_replay_simulation(self, tmp_path):
        gen = tmp_path / "gen"
        assert cli_main(["generate", "--model", "TDDL-C", "--duration-ms", "2",
                         "--grid", "16x8", "--delta-f-hz", "60000", "--seed", "5",
                         "--out", str(gen)]) == 0
        out = tmp_path / "sim"
        assert cli_main(["simulate", "--trace", str(gen / "trace.txt"), "--snr-db", "8",
                         "--frames", "2", "--grid", "16x8", "--delta-f-hz", "60000",
                         "--seed", "2", "--out", str(out)]) == 0
        assert (out / "ber.csv").exists()

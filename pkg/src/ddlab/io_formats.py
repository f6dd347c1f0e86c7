"""File formats: binary grids, CSV exports, and path-set traces.

Grid files ("DDG1") are little-endian: a 28-byte header (magic ``DDG1``,
u32 M, u32 N, u32 d_f, u32 d_t, f64 delta_f_hz) followed by M*N complex64
values in row-major order with the time/Doppler index as the row.  The
same container stores time-frequency grids and periodic DD grids; the
reader function chooses the interpretation.

Traces are line-delimited text: each line holds t_offset_s followed by
(tau_s, nu_hz, re, im) per path.  Floats are written with repr so files
round-trip exactly and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .channel_model import GridSpec, PathSet, TfGrid
from .dd_estimator import EstimatedPath, PeriodicDdGrid
from .errors import FormatError
from .otfs_link import BerPoint
from .stationarity import IntervalReport, SimilarityMatrix

__all__ = [
    "GRID_MAGIC",
    "write_tf_grid",
    "read_tf_grid",
    "write_dd_grid",
    "read_dd_grid",
    "write_dd_grid_csv",
    "write_paths_csv",
    "read_paths_csv",
    "write_trace",
    "read_trace",
    "write_similarity_csv",
    "write_intervals_csv",
    "write_ber_csv",
    "read_ber_csv",
    "write_fit_table_csv",
]

GRID_MAGIC = b"DDG1"
_HEADER = struct.Struct("<4sIIIId")


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# binary grid container
# ---------------------------------------------------------------------------

def _write_grid_payload(path, spec: GridSpec, rows_first: np.ndarray) -> None:
    header = _HEADER.pack(GRID_MAGIC, spec.M, spec.N, spec.d_f, spec.d_t, spec.delta_f_hz)
    payload = np.ascontiguousarray(rows_first, dtype=np.complex64)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def _read_grid_payload(path) -> tuple[GridSpec, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header at byte {len(raw)} (need {_HEADER.size})")
    magic, m, n, d_f, d_t, delta_f = _HEADER.unpack_from(raw, 0)
    if magic != GRID_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at byte 0 (expected {GRID_MAGIC!r})")
    try:
        spec = GridSpec(int(m), int(n), float(delta_f), int(d_f), int(d_t))
    except Exception as exc:
        raise FormatError(f"{path}: invalid header fields at byte 4: {exc}") from exc
    expected = m * n * 8
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise FormatError(
            f"{path}: payload is {len(body)} bytes at byte {_HEADER.size} (expected {expected})"
        )
    data = np.frombuffer(body, dtype="<c8").reshape(n, m)
    return spec, data.astype(complex)


def write_tf_grid(path, grid: TfGrid) -> None:
    _write_grid_payload(path, grid.spec, grid.grid.T)  # rows are symbols


def read_tf_grid(path) -> TfGrid:
    spec, rows_first = _read_grid_payload(path)
    return TfGrid(rows_first.T, spec)


def write_dd_grid(path, grid: PeriodicDdGrid) -> None:
    _write_grid_payload(path, grid.spec, grid.grid)  # rows are Doppler bins


def read_dd_grid(path) -> PeriodicDdGrid:
    spec, rows_first = _read_grid_payload(path)
    return PeriodicDdGrid(rows_first, spec)


def write_dd_grid_csv(path, grid: PeriodicDdGrid) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "l", "re", "im"])
        for k in range(grid.spec.N):
            for l in range(grid.spec.M):
                v = grid.grid[k, l]
                writer.writerow([k, l, _fmt(v.real), _fmt(v.imag)])


# ---------------------------------------------------------------------------
# estimated paths
# ---------------------------------------------------------------------------

_PATH_COLUMNS = ["path", "l_hat", "k_hat", "h_re", "h_im", "peak_k", "peak_l",
                 "residual_power_db"]


def write_paths_csv(path, paths: list[EstimatedPath]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_PATH_COLUMNS)
        for i, p in enumerate(paths):
            writer.writerow([
                i, _fmt(p.l_hat), _fmt(p.k_hat), _fmt(p.h_hat.real), _fmt(p.h_hat.imag),
                p.peak[0], p.peak[1], _fmt(p.residual_power_db),
            ])


def read_paths_csv(path) -> list[EstimatedPath]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _PATH_COLUMNS:
            raise FormatError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            try:
                out.append(EstimatedPath(
                    l_hat=float(row["l_hat"]),
                    k_hat=float(row["k_hat"]),
                    h_hat=complex(float(row["h_re"]), float(row["h_im"])),
                    peak=(int(row["peak_k"]), int(row["peak_l"])),
                    residual_power_db=float(row["residual_power_db"]),
                ))
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: bad row {row}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# path-set traces
# ---------------------------------------------------------------------------

def write_trace(path, trace: list[PathSet]) -> None:
    with open(path, "w") as fh:
        for ps in trace:
            fields = [_fmt(ps.t_offset_s)]
            for tau, nu, h in zip(ps.taus_s, ps.nus_hz, ps.coeffs):
                fields += [_fmt(tau), _fmt(nu), _fmt(h.real), _fmt(h.imag)]
            fh.write(" ".join(fields) + "\n")


def read_trace(path) -> list[PathSet]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if (len(parts) - 1) % 4:
                raise FormatError(f"{path}:{lineno}: expected t plus 4 values per path")
            try:
                values = [float(v) for v in parts]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            t = values[0]
            rest = np.array(values[1:]).reshape(-1, 4)
            out.append(PathSet(rest[:, 0], rest[:, 1], rest[:, 2] + 1j * rest[:, 3], t))
    return out


# ---------------------------------------------------------------------------
# analysis exports
# ---------------------------------------------------------------------------

def write_similarity_csv(path, matrix: SimilarityMatrix) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", matrix.kind])
        writer.writerow(["time_s"] + [_fmt(t) for t in matrix.time_axis])
        for row in matrix.entries:
            writer.writerow([_fmt(v) for v in row])


def write_intervals_csv(path, report: IntervalReport, label: str = "") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "alpha", "start_s", "end_s", "length_ms"])
        for (a, b) in report.intervals:
            writer.writerow([label, _fmt(report.alpha), _fmt(a), _fmt(b), _fmt(1e3 * (b - a))])
        writer.writerow([])
        writer.writerow(["stat", "t_max_ms", "t_min_ms", "t_mean_ms"])
        writer.writerow(["value", _fmt(report.t_max_ms), _fmt(report.t_min_ms),
                         _fmt(report.t_mean_ms)])


def write_ber_csv(path, rows: list[tuple[str, float, BerPoint]]) -> None:
    """Rows are (channel_name, lag_ms, point)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "lag_ms", "snr_db", "ebn0_db", "bits", "errors", "ber"])
        for name, lag_ms, pt in rows:
            writer.writerow([name, _fmt(lag_ms), _fmt(pt.snr_db), _fmt(pt.ebn0_db),
                             pt.bits, pt.bit_errors, _fmt(pt.ber)])


def read_ber_csv(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append({
                "channel": row["channel"],
                "lag_ms": float(row["lag_ms"]),
                "snr_db": float(row["snr_db"]),
                "ebn0_db": float(row["ebn0_db"]),
                "bits": int(row["bits"]),
                "errors": int(row["errors"]),
                "ber": float(row["ber"]),
            })
    return out


def write_fit_table_csv(path, rows: list[dict]) -> None:
    """Per-path, per-family fit table: one row per candidate family."""
    columns = ["path", "family", "params", "ks_statistic", "log_likelihood",
               "selected", "low_confidence"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] for c in columns])

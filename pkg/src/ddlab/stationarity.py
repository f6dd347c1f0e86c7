"""Channel stationarity and per-path invariance analysis.

Two similarity notions are quantified on sliding windows:

* collinearity of DD power spectra (CDD): a normalized inner product of two
  power spectra in [0, 1]; maximal runs of mutually similar instants form
  quasi-stationary intervals.
* per-path temporal correlation (DD-TCC): |h_b h_c*| / max(|h_b|^2, |h_c|^2)
  of one path's coefficient at two instants; runs above threshold form the
  stricter quasi-invariant intervals.

Run merging uses the uniform reading of the threshold rule: a run of
consecutive instants is valid when EVERY pairwise similarity inside it
meets the threshold; reported intervals are the greedy left-to-right
maximal runs, which partition the time axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dd_estimator import EstimatedPath, PeriodicDdGrid
from .errors import ConfigurationError

__all__ = [
    "DdPowerSpectrum",
    "SimilarityMatrix",
    "IntervalReport",
    "PathTrack",
    "dd_power",
    "cdd",
    "cdd_matrix",
    "dd_tcc",
    "tcc_matrix",
    "quasi_stationary_intervals",
    "quasi_invariant_intervals",
    "track_paths",
    "weighted_params",
]


@dataclass
class DdPowerSpectrum:
    """Nonnegative DD power spectrum at one time instant."""

    power: np.ndarray
    time_s: float = 0.0

    def __post_init__(self):
        self.power = np.asarray(self.power, dtype=float)
        if np.any(self.power < 0):
            raise ConfigurationError("power spectrum entries must be >= 0")

    @property
    def valid(self) -> bool:
        return bool(np.any(self.power > 0))


@dataclass
class SimilarityMatrix:
    """Symmetric similarity matrix over time instants, entries in [0, 1]."""

    entries: np.ndarray
    kind: str  # "CDD" or "DD-TCC"
    time_axis: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        self.time_axis = np.asarray(self.time_axis, dtype=float)
        t = len(self.time_axis)
        if self.entries.shape != (t, t):
            raise ConfigurationError("similarity matrix must be T x T for T time instants")

    @property
    def step_s(self) -> float:
        if len(self.time_axis) < 2:
            raise ConfigurationError("similarity matrix has fewer than 2 instants")
        return float(self.time_axis[1] - self.time_axis[0])


@dataclass
class IntervalReport:
    """Disjoint threshold intervals with length statistics in milliseconds."""

    intervals: list[tuple[float, float]]
    alpha: float
    t_max_ms: float
    t_min_ms: float
    t_mean_ms: float

    @property
    def lengths_ms(self) -> list[float]:
        return [1e3 * (b - a) for a, b in self.intervals]


@dataclass
class PathTrack:
    """Per-window estimates associated to one physical path."""

    entries: list[tuple[int, float, float, complex]] = field(default_factory=list)
    tolerance: tuple[float, float] = (0.5, 0.5)

    def window_indices(self) -> list[int]:
        return [e[0] for e in self.entries]

    def coefficients(self) -> np.ndarray:
        return np.array([e[3] for e in self.entries], dtype=complex)

    def __len__(self) -> int:
        return len(self.entries)


# ---------------------------------------------------------------------------
# similarity metrics
# ---------------------------------------------------------------------------

def dd_power(grid: PeriodicDdGrid, time_s: float = 0.0) -> DdPowerSpectrum:
    """Entrywise squared magnitude of a DD grid."""
    return DdPowerSpectrum(np.abs(grid.grid) ** 2, time_s)


def cdd(a: DdPowerSpectrum, b: DdPowerSpectrum) -> float:
    """Collinearity of two DD power spectra, in [0, 1]."""
    if a.power.shape != b.power.shape:
        raise ConfigurationError("spectra must share dimensions")
    sa = float(np.sum(a.power**2))
    sb = float(np.sum(b.power**2))
    if sa == 0 or sb == 0:
        raise ConfigurationError("collinearity is undefined for an all-zero spectrum")
    # single sqrt keeps cdd(a, a) == 1.0 exactly; clamp guards 1-ulp overshoot
    value = float(np.sum(a.power * b.power)) / math.sqrt(sa * sb)
    return min(value, 1.0)


def cdd_matrix(spectra: list[DdPowerSpectrum]) -> SimilarityMatrix:
    """Pairwise collinearity over a uniformly sampled sequence of spectra."""
    if len(spectra) < 2:
        raise ConfigurationError("need at least 2 spectra")
    times = np.array([s.time_s for s in spectra])
    steps = np.diff(times)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(abs(steps[0]), 1e-30):
        raise ConfigurationError("spectra must be time-ordered with a uniform step")
    t = len(spectra)
    out = np.eye(t)
    for i in range(t):
        for j in range(i + 1, t):
            try:
                out[i, j] = out[j, i] = cdd(spectra[i], spectra[j])
            except ConfigurationError as exc:
                raise ConfigurationError(f"CDD failed for instants ({i}, {j}): {exc}") from exc
    return SimilarityMatrix(out, "CDD", times)


def dd_tcc(h_b: complex, h_c: complex) -> float:
    """Similarity of one path's coefficients at two instants, in [0, 1].

    Equals min(|h_b|, |h_c|) / max(|h_b|, |h_c|); invariant to a common or
    relative phase and to common scaling.
    """
    pb, pc = abs(h_b) ** 2, abs(h_c) ** 2
    top = max(pb, pc)
    if top == 0:
        raise ConfigurationError("DD-TCC is undefined when both coefficients are zero")
    return float(abs(h_b) * abs(h_c) / top)


def tcc_matrix(coeffs: np.ndarray, time_axis: np.ndarray) -> SimilarityMatrix:
    """Pairwise DD-TCC matrix of one path's coefficient series."""
    coeffs = np.asarray(coeffs, dtype=complex)
    t = len(coeffs)
    out = np.eye(t)
    for i in range(t):
        for j in range(i + 1, t):
            out[i, j] = out[j, i] = dd_tcc(coeffs[i], coeffs[j])
    return SimilarityMatrix(out, "DD-TCC", np.asarray(time_axis, dtype=float))


# ---------------------------------------------------------------------------
# interval extraction
# ---------------------------------------------------------------------------

def _greedy_runs(entries: np.ndarray, alpha: float, mode: str = "pairwise") -> list[tuple[int, int]]:
    """Greedy left-to-right maximal runs of mutually similar instants.

    "pairwise" (the default, strictest reading of the uniform-threshold
    rule) requires every pair inside the run to meet alpha; "anchor" only
    compares each instant against the run's first one.
    """
    if mode not in ("pairwise", "anchor"):
        raise ConfigurationError(f"unknown run-merging mode {mode!r}")
    t = entries.shape[0]
    runs = []
    i = 0
    while i < t:
        j = i
        if mode == "pairwise":
            while j + 1 < t and np.min(entries[i : j + 2, j + 1]) >= alpha:
                j += 1
        else:
            while j + 1 < t and entries[i, j + 1] >= alpha:
                j += 1
        runs.append((i, j))
        i = j + 1
    return runs


def _interval_report(matrix: SimilarityMatrix, alpha: float, mode: str) -> IntervalReport:
    if not (0.0 < alpha <= 1.0):
        raise ConfigurationError(f"alpha must lie in (0, 1], got {alpha}")
    step = matrix.step_s
    runs = _greedy_runs(matrix.entries, alpha, mode)
    t0 = matrix.time_axis
    intervals = [(float(t0[i]), float(t0[j] + step)) for i, j in runs]
    lengths_ms = [1e3 * (b - a) for a, b in intervals]
    return IntervalReport(
        intervals=intervals,
        alpha=alpha,
        t_max_ms=max(lengths_ms),
        t_min_ms=min(lengths_ms),
        t_mean_ms=float(np.mean(lengths_ms)),
    )


def quasi_stationary_intervals(matrix: SimilarityMatrix, alpha: float = 0.9,
                               mode: str = "pairwise") -> IntervalReport:
    """Quasi-stationary intervals from a CDD matrix at threshold alpha."""
    if matrix.kind != "CDD":
        raise ConfigurationError("quasi-stationary intervals need a CDD matrix")
    return _interval_report(matrix, alpha, mode)


def quasi_invariant_intervals(track: PathTrack, alpha: float = 0.9,
                              window_step_s: float = 1.0,
                              mode: str = "pairwise") -> IntervalReport:
    """Quasi-invariant intervals of one path's coefficient series.

    Entries are placed at window_index * window_step_s; a track shorter
    than 2 entries yields an empty report.
    """
    if len(track) < 2:
        return IntervalReport([], alpha, math.nan, math.nan, math.nan)
    times = np.array([w * window_step_s for w in track.window_indices()])
    matrix = tcc_matrix(track.coefficients(), times)
    # gaps make the axis nonuniform; run merging only needs pairwise values,
    # so intervals are reported in real time with one step appended at the end
    if not (0.0 < alpha <= 1.0):
        raise ConfigurationError(f"alpha must lie in (0, 1], got {alpha}")
    runs = _greedy_runs(matrix.entries, alpha, mode)
    intervals = [(float(times[i]), float(times[j] + window_step_s)) for i, j in runs]
    lengths_ms = [1e3 * (b - a) for a, b in intervals]
    return IntervalReport(intervals, alpha, max(lengths_ms), min(lengths_ms),
                          float(np.mean(lengths_ms)))


# ---------------------------------------------------------------------------
# association and aggregation
# ---------------------------------------------------------------------------

def _wrapped_delta(a: float, b: float, period: float | None) -> float:
    d = a - b
    if period is None:
        return d
    return (d + period / 2.0) % period - period / 2.0


def track_paths(per_window: list[list[EstimatedPath]], tolerance: tuple[float, float] = (0.5, 0.5),
                periods: tuple[float, float] | None = None) -> list[PathTrack]:
    """Greedy nearest-neighbor association of per-window estimates into tracks.

    Estimates are claimed strongest-first; an estimate extends the track
    whose most recent position lies within the (delay, Doppler) tolerance,
    otherwise it starts a new track.  `periods` gives the wraparound
    periods of the two coordinates, when applicable.
    """
    tol_l, tol_k = tolerance
    per_l = periods[0] if periods else None
    per_k = periods[1] if periods else None
    tracks: list[PathTrack] = []
    last_pos: list[tuple[float, float]] = []

    for w, estimates in enumerate(per_window):
        order = sorted(estimates, key=lambda e: -abs(e.h_hat))
        claimed: set[int] = set()
        for est in order:
            best_idx, best_dist = None, None
            for idx, (l_prev, k_prev) in enumerate(last_pos):
                if idx in claimed:
                    continue
                dl = _wrapped_delta(est.l_hat, l_prev, per_l)
                dk = _wrapped_delta(est.k_hat, k_prev, per_k)
                if abs(dl) <= tol_l and abs(dk) <= tol_k:
                    dist = dl * dl + dk * dk
                    if best_dist is None or dist < best_dist:
                        best_idx, best_dist = idx, dist
            if best_idx is None:
                tracks.append(PathTrack([(w, est.l_hat, est.k_hat, est.h_hat)], tolerance))
                last_pos.append((est.l_hat, est.k_hat))
            else:
                tracks[best_idx].entries.append((w, est.l_hat, est.k_hat, est.h_hat))
                last_pos[best_idx] = (est.l_hat, est.k_hat)
                claimed.add(best_idx)
    return tracks


def weighted_params(track: PathTrack) -> tuple[float, float]:
    """Amplitude-weighted mean delay and Doppler position of a track."""
    if len(track) == 0:
        raise ConfigurationError("weighted_params needs a nonempty track")
    weights = np.array([abs(h) for _, _, _, h in track.entries])
    if np.all(weights == 0):
        raise ConfigurationError("weighted_params needs at least one nonzero coefficient")
    ells = np.array([l for _, l, _, _ in track.entries])
    kays = np.array([k for _, _, k, _ in track.entries])
    wsum = weights.sum()
    return float(np.dot(ells, weights) / wsum), float(np.dot(kays, weights) / wsum)

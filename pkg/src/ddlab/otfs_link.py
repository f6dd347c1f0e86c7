"""OTFS link-level simulation over delay-Doppler channels.

Builds the DD-domain equivalent channel matrix of an ideal-waveform OTFS
system, transmits Gray-mapped QPSK frames, equalizes with linear MMSE, and
runs BER sweeps including channel-aging (equalizer mismatch) experiments.

Conventions: DD symbols are vectorized Doppler-major (index = k*M + l),
QPSK has unit symbol energy, snr_db = 10*log10(E_X / sigma^2), and channels
drawn from a model are normalized to unit expected total power so the AWGN
baseline is directly comparable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .channel_model import (
    EvolutionConfig,
    GridSpec,
    PathSet,
    TddlModel,
    TddlRealizer,
    check_alias_free,
    normalized_delay,
    normalized_doppler,
)
from .dd_estimator import geom_phase_sum
from .errors import ConfigurationError, NumericError

__all__ = [
    "OtfsFrame",
    "DdChannelMatrix",
    "BerPoint",
    "build_hdd",
    "qpsk_modulate",
    "qpsk_demodulate",
    "transmit",
    "mmse_equalize",
    "MmseEqualizer",
    "run_ber_sweep",
    "run_mismatch_experiment",
    "binomial_confidence",
    "QPSK_BITS_PER_SYMBOL",
]

log = logging.getLogger(__name__)

QPSK_BITS_PER_SYMBOL = 2


@dataclass
class OtfsFrame:
    """Vectorized DD-domain symbol frame (Doppler-major), unit average energy."""

    symbols: np.ndarray
    M: int
    N: int
    constellation: str = "qpsk"

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=complex)
        if self.symbols.shape != (self.N * self.M,):
            raise ConfigurationError(
                f"frame length {self.symbols.shape} != N*M = {self.N * self.M}"
            )


@dataclass
class DdChannelMatrix:
    """NM x NM DD-domain equivalent channel matrix."""

    matrix: np.ndarray
    M: int
    N: int
    source: PathSet | None = None

    def __post_init__(self):
        nm = self.N * self.M
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (nm, nm):
            raise ConfigurationError(f"channel matrix must be {nm}x{nm}")


@dataclass
class BerPoint:
    snr_db: float
    bit_errors: int
    bits: int

    def __post_init__(self):
        if self.bits <= 0:
            raise ConfigurationError("bits must be positive")
        if not (0 <= self.bit_errors <= self.bits):
            raise ConfigurationError("bit_errors must lie in [0, bits]")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits

    @property
    def ebn0_db(self) -> float:
        return self.snr_db - 10.0 * math.log10(QPSK_BITS_PER_SYMBOL)


def binomial_confidence(errors: int, bits: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a BER estimate."""
    if bits <= 0:
        raise ConfigurationError("bits must be positive")
    p = errors / bits
    denom = 1.0 + z**2 / bits
    center = (p + z**2 / (2 * bits)) / denom
    half = z * math.sqrt(p * (1 - p) / bits + z**2 / (4 * bits**2)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


# ---------------------------------------------------------------------------
# channel matrix
# ---------------------------------------------------------------------------

def _path_kernel_columns(paths: PathSet, grid: GridSpec):
    """Per-path circulant first columns (Doppler, delay) and scalar phases."""
    full = GridSpec(grid.M, grid.N, grid.delta_f_hz, 1, 1)
    check_alias_free(paths, full)
    ell = normalized_delay(paths.taus_s, full)
    kay = normalized_doppler(paths.nus_hz, full)
    k_diff = np.arange(grid.N, dtype=float)
    l_diff = np.arange(grid.M, dtype=float)
    out = []
    for li, ki, ci, tau, nu in zip(ell, kay, paths.coeffs, paths.taus_s, paths.nus_hz):
        a_col = geom_phase_sum((k_diff - ki) / grid.N, grid.N) / grid.N
        b_col = geom_phase_sum((l_diff - li) / grid.M, grid.M) / grid.M
        out.append((ci * np.exp(-2j * math.pi * nu * tau), a_col, b_col))
    return out


def build_hdd(paths: PathSet, grid: GridSpec) -> DdChannelMatrix:
    """DD-domain equivalent channel matrix for an ideal-waveform OTFS frame.

    Entry [(k, l), (k', l')] is ``(1/NM) * sum_i h_i e^{-2j pi nu_i tau_i}
    D_N(k - k' - k_i) D_M(l - l' - l_i)`` with full-length geometric phase
    sums along each axis; pilot spacings of the grid are irrelevant here.
    """
    m_dim, n_dim = grid.M, grid.N
    h = np.zeros((n_dim * m_dim, n_dim * m_dim), dtype=complex)
    for phase, a_col, b_col in _path_kernel_columns(paths, grid):
        h += phase * np.kron(linalg.circulant(a_col), linalg.circulant(b_col))
    return DdChannelMatrix(h, m_dim, n_dim, source=paths)


class DdChannelOperator:
    """Matrix-free DD channel: the same action as build_hdd without the
    NM x NM storage.

    Each path contributes a Kronecker product of two circulants, so a
    matvec is a pair of FFT-diagonalized circular convolutions per path;
    frame sizes like 300 x 280 stay tractable this way.
    """

    def __init__(self, paths: PathSet, grid: GridSpec):
        self.M, self.N = grid.M, grid.N
        self.shape = (self.N * self.M, self.N * self.M)
        self.terms = [
            (phase, np.fft.fft(a_col), np.fft.fft(b_col))
            for phase, a_col, b_col in _path_kernel_columns(paths, grid)
        ]

    def _apply(self, x: np.ndarray, conj: bool) -> np.ndarray:
        grid_x = np.asarray(x, dtype=complex).reshape(self.N, self.M)
        fx = np.fft.fft(np.fft.fft(grid_x, axis=0), axis=1)
        out = np.zeros_like(fx)
        for phase, fa, fb in self.terms:
            if conj:
                # (A (x) B)^H diagonalizes to conjugated eigenvalues
                out += np.conj(phase) * (np.conj(fa)[:, None] * np.conj(fb)[None, :]) * fx
            else:
                out += phase * (fa[:, None] * fb[None, :]) * fx
        return np.fft.ifft(np.fft.ifft(out, axis=1), axis=0).reshape(-1)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._apply(x, conj=False)

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        """H^H x."""
        return self._apply(x, conj=True)


# ---------------------------------------------------------------------------
# modulation
# ---------------------------------------------------------------------------

def qpsk_modulate(bits, M: int, N: int) -> OtfsFrame:
    """Gray-mapped QPSK onto an OTFS frame; needs exactly 2*N*M bits."""
    bits = np.asarray(bits).ravel().astype(np.uint8)
    if bits.size != QPSK_BITS_PER_SYMBOL * M * N:
        raise ConfigurationError(
            f"bit count {bits.size} != 2*N*M = {QPSK_BITS_PER_SYMBOL * M * N}"
        )
    if np.any(bits > 1):
        raise ConfigurationError("bits must be 0/1")
    pairs = bits.reshape(-1, 2)
    symbols = ((1.0 - 2.0 * pairs[:, 0]) + 1j * (1.0 - 2.0 * pairs[:, 1])) / math.sqrt(2)
    return OtfsFrame(symbols, M, N)


def qpsk_demodulate(symbols) -> np.ndarray:
    """Minimum-distance (sign-based) demodulation back to bits."""
    s = np.asarray(symbols, dtype=complex).ravel()
    bits = np.empty((s.size, 2), dtype=np.uint8)
    bits[:, 0] = (s.real < 0).astype(np.uint8)
    bits[:, 1] = (s.imag < 0).astype(np.uint8)
    return bits.ravel()


# ---------------------------------------------------------------------------
# transmission and equalization
# ---------------------------------------------------------------------------

def _noise_sigma2(snr_db: float | None, energy: float) -> float:
    if snr_db is None or np.isinf(snr_db):
        return 0.0
    return energy * 10.0 ** (-snr_db / 10.0)


def transmit(frame: OtfsFrame, channel: DdChannelMatrix, snr_db: float | None,
             rng: np.random.Generator | None = None, energy: float = 1.0) -> np.ndarray:
    """Y = H X + n with complex white noise at the requested symbol SNR."""
    if channel.matrix.shape[0] != frame.symbols.size:
        raise ConfigurationError("frame and channel dimensions differ")
    y = channel.matrix @ frame.symbols
    sigma2 = _noise_sigma2(snr_db, energy)
    if sigma2 > 0:
        if rng is None:
            raise ConfigurationError("finite snr_db requires an rng")
        n = frame.symbols.size
        y = y + math.sqrt(sigma2 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return y


class MmseEqualizer:
    """Linear MMSE equalizer with a reusable Cholesky factorization.

    Applies H^H (H H^H + (sigma^2/E_X) I)^{-1} to received vectors via a
    stable solve (no explicit inverse).
    """

    def __init__(self, h: np.ndarray, sigma2: float, energy: float = 1.0):
        h = np.asarray(h, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ConfigurationError("MMSE equalizer needs a square channel matrix")
        if sigma2 < 0 or energy <= 0:
            raise ConfigurationError("sigma2 must be >= 0 and energy > 0")
        self.h = h
        gram = h @ h.conj().T
        gram[np.diag_indices_from(gram)] += sigma2 / energy
        try:
            self._factor = linalg.cho_factor(gram)
        except linalg.LinAlgError as exc:
            raise NumericError(f"MMSE solve breakdown (singular/ill-conditioned): {exc}") from exc

    def apply(self, y: np.ndarray) -> np.ndarray:
        z = linalg.cho_solve(self._factor, np.asarray(y, dtype=complex))
        if not np.all(np.isfinite(z)):
            raise NumericError("MMSE solve produced non-finite values")
        return self.h.conj().T @ z


def mmse_equalize(y: np.ndarray, channel: DdChannelMatrix | np.ndarray,
                  sigma2: float, energy: float = 1.0) -> np.ndarray:
    """One-shot MMSE equalization of a received vector."""
    h = channel.matrix if isinstance(channel, DdChannelMatrix) else channel
    return MmseEqualizer(h, sigma2, energy).apply(y)


def mmse_equalize_cg(y: np.ndarray, op: DdChannelOperator, sigma2: float,
                     energy: float = 1.0, rtol: float = 1e-8,
                     max_iter: int | None = None) -> np.ndarray:
    """MMSE via conjugate gradient on the normal equations.

    Solves (H H^H + (sigma^2/E) I) z = y matrix-free and returns H^H z;
    this is the route for frame sizes whose dense NM x NM matrix would not
    fit in memory (e.g. 300 x 280).
    """
    if sigma2 < 0 or energy <= 0:
        raise ConfigurationError("sigma2 must be >= 0 and energy > 0")
    lam = sigma2 / energy
    y = np.asarray(y, dtype=complex)

    def gram(v):
        return op.matvec(op.rmatvec(v)) + lam * v

    z = np.zeros_like(y)
    r = y - gram(z)
    p = r.copy()
    rs = np.vdot(r, r).real
    norm_y = math.sqrt(np.vdot(y, y).real)
    if norm_y == 0:
        return op.rmatvec(z)
    limit = max_iter if max_iter is not None else 10 * y.size
    for _ in range(limit + 1):
        if math.sqrt(rs) <= rtol * norm_y:
            break
        gp = gram(p)
        alpha = rs / np.vdot(p, gp).real
        z += alpha * p
        r -= alpha * gp
        rs_new = np.vdot(r, r).real
        p = r + (rs_new / rs) * p
        rs = rs_new
    else:
        raise NumericError(
            f"conjugate gradient did not reach rtol={rtol} within {limit} iterations"
        )
    return op.rmatvec(z)


# ---------------------------------------------------------------------------
# Monte Carlo BER experiments
# ---------------------------------------------------------------------------

def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), *map(int, key))))


def _trace_power_scale(trace: Sequence[PathSet]) -> float:
    mean_power = float(np.mean([np.sum(np.abs(ps.coeffs) ** 2) for ps in trace]))
    if mean_power <= 0:
        raise ConfigurationError("trace has zero total power")
    return 1.0 / math.sqrt(mean_power)


def _draw_channel(channel, grid: GridSpec, rng: np.random.Generator,
                  strict_power: bool) -> PathSet | None:
    """One independent channel realization; None means AWGN."""
    if isinstance(channel, str):
        if channel.lower() != "awgn":
            raise ConfigurationError(f"unknown channel source {channel!r}")
        return None
    if isinstance(channel, TddlModel):
        realizer = TddlRealizer(channel, grid, rng, evolution=EvolutionConfig(enabled=False),
                                strict_power=strict_power, total_power=1.0)
        return realizer.at(0.0)
    trace = list(channel)
    if not trace:
        raise ConfigurationError("empty path-set trace")
    scale = _trace_power_scale(trace)
    pick = trace[int(rng.integers(0, len(trace)))]
    return pick.scaled(scale)


DENSE_SOLVE_LIMIT = 4096  # above this NM the auto solver goes matrix-free


def _frame_errors(ps: PathSet | None, grid: GridSpec, snr_db: float,
                  bits_rng: np.random.Generator, noise_rng: np.random.Generator,
                  solver: str = "direct") -> tuple[int, int]:
    m_dim, n_dim = grid.M, grid.N
    nbits = QPSK_BITS_PER_SYMBOL * m_dim * n_dim
    bits = bits_rng.integers(0, 2, size=nbits).astype(np.uint8)
    frame = qpsk_modulate(bits, m_dim, n_dim)
    sigma2 = _noise_sigma2(snr_db, 1.0)
    if ps is None:
        # AWGN: H = I, so MMSE reduces to a positive scaling
        y = frame.symbols.copy()
        if sigma2 > 0:
            y += math.sqrt(sigma2 / 2) * (
                noise_rng.standard_normal(y.size) + 1j * noise_rng.standard_normal(y.size)
            )
        xhat = y / (1.0 + sigma2)
    elif solver == "cg":
        op = DdChannelOperator(ps, grid)
        y = op.matvec(frame.symbols)
        if sigma2 > 0:
            y = y + math.sqrt(sigma2 / 2) * (
                noise_rng.standard_normal(y.size) + 1j * noise_rng.standard_normal(y.size)
            )
        xhat = mmse_equalize_cg(y, op, sigma2)
    else:
        h = build_hdd(ps, grid)
        y = transmit(frame, h, snr_db, noise_rng)
        xhat = mmse_equalize(y, h, sigma2)
    decided = qpsk_demodulate(xhat)
    return int(np.count_nonzero(decided != bits)), nbits


def _resolve_solver(solver: str, grid: GridSpec) -> str:
    if solver not in ("auto", "direct", "cg"):
        raise ConfigurationError(f"unknown solver {solver!r}")
    if solver == "auto":
        return "cg" if grid.M * grid.N > DENSE_SOLVE_LIMIT else "direct"
    return solver


def run_ber_sweep(channel, snr_grid_db: Sequence[float], frames_per_point: int,
                  grid: GridSpec, seed: int, strict_power: bool = True,
                  solver: str = "auto") -> list[BerPoint]:
    """Uncoded QPSK BER versus SNR with a fresh channel realization per frame.

    `channel` is a TddlModel, a sequence of PathSets (trace replay), or the
    string "awgn".  Identical seeds and configuration reproduce the exact
    BerPoint list.  `solver` picks the equalizer backend: a dense Cholesky
    solve, or matrix-free conjugate gradient for frames whose NM x NM
    matrix would be impractical ("auto" switches at NM > 4096).
    """
    if frames_per_point < 1:
        raise ConfigurationError("frames_per_point must be >= 1")
    solver = _resolve_solver(solver, grid)
    points = []
    for p_idx, snr_db in enumerate(snr_grid_db):
        errors = 0
        bits = 0
        for f_idx in range(frames_per_point):
            ps = _draw_channel(channel, grid, _stream(seed, p_idx, f_idx, 0), strict_power)
            e, b = _frame_errors(ps, grid, float(snr_db),
                                 _stream(seed, p_idx, f_idx, 1), _stream(seed, p_idx, f_idx, 2),
                                 solver)
            errors += e
            bits += b
        points.append(BerPoint(float(snr_db), errors, bits))
    return points


def _trace_pair(trace: list[PathSet], lag_s: float, rng: np.random.Generator,
                scale: float) -> tuple[PathSet, PathSet]:
    times = np.array([ps.t_offset_s for ps in trace])
    steps = np.diff(times)
    if len(trace) < 2 or np.ptp(steps) > 1e-9 * max(steps[0], 1e-30):
        raise ConfigurationError("trace replay needs >= 2 uniformly spaced path sets")
    step = float(steps[0])
    offset = lag_s / step
    if abs(offset - round(offset)) > 1e-6:
        raise ConfigurationError(
            f"lag {lag_s * 1e3:.4f} ms is not a multiple of the trace step {step * 1e3:.4f} ms"
        )
    offset = int(round(offset))
    if offset >= len(trace):
        raise ConfigurationError("lag exceeds the trace duration")
    i = int(rng.integers(0, len(trace) - offset))
    return trace[i].scaled(scale), trace[i + offset].scaled(scale)


def run_mismatch_experiment(channel, lag_list_ms: Sequence[float], snr_grid_db: Sequence[float],
                            frames_per_point: int, grid: GridSpec, seed: int,
                            evolution: EvolutionConfig | None = None,
                            strict_power: bool = True) -> list[tuple[float, list[BerPoint]]]:
    """BER when the equalizer uses an older channel state than the transmission.

    For each frame one evolving trajectory supplies the channel at a
    reference instant (used by the equalizer) and at reference + lag (used
    for the transmission); all lags share the frame's bits, noise, and
    trajectory seed, so lag 0 reproduces the matched-equalizer sweep
    exactly and lag comparisons are paired.
    """
    if frames_per_point < 1:
        raise ConfigurationError("frames_per_point must be >= 1")
    lags = [float(v) for v in lag_list_ms]
    if any(v < 0 for v in lags):
        raise ConfigurationError("lags must be >= 0 ms")
    order = np.argsort(lags)  # trajectory advances forward through sorted lags

    is_model = isinstance(channel, TddlModel)
    trace = None if is_model else list(channel)
    trace_scale = None if is_model else _trace_power_scale(trace)

    acc = {lag: [[0, 0] for _ in snr_grid_db] for lag in lags}
    for p_idx, snr_db in enumerate(snr_grid_db):
        for f_idx in range(frames_per_point):
            chan_rng = _stream(seed, p_idx, f_idx, 0)
            bits_rng = _stream(seed, p_idx, f_idx, 1)
            noise_rng = _stream(seed, p_idx, f_idx, 2)

            nsym = grid.M * grid.N
            nbits = QPSK_BITS_PER_SYMBOL * nsym
            bits = bits_rng.integers(0, 2, size=nbits).astype(np.uint8)
            frame = qpsk_modulate(bits, grid.M, grid.N)
            sigma2 = _noise_sigma2(float(snr_db), 1.0)
            noise = math.sqrt(max(sigma2, 0.0) / 2) * (
                noise_rng.standard_normal(nsym) + 1j * noise_rng.standard_normal(nsym)
            )

            if is_model:
                realizer = TddlRealizer(channel, grid, chan_rng, evolution=evolution,
                                        strict_power=strict_power, total_power=1.0)
                ps_ref = realizer.at(0.0)
                lagged = {}
                for idx in order:
                    lagged[lags[idx]] = realizer.at(lags[idx] * 1e-3)
            else:
                ps_ref = None
                lagged = {}
                for idx in order:
                    a, b = _trace_pair(trace, lags[idx] * 1e-3, chan_rng, trace_scale)
                    if lags[idx] == 0.0:
                        a = b
                    lagged[lags[idx]] = (a, b)

            if is_model:
                h_ref = build_hdd(ps_ref, grid)
                eq = MmseEqualizer(h_ref.matrix, sigma2)
                for lag in lags:
                    h_tx = h_ref if lag == 0.0 else build_hdd(lagged[lag], grid)
                    y = h_tx.matrix @ frame.symbols + noise
                    decided = qpsk_demodulate(eq.apply(y))
                    cell = acc[lag][p_idx]
                    cell[0] += int(np.count_nonzero(decided != bits))
                    cell[1] += nbits
            else:
                for lag in lags:
                    a, b = lagged[lag]
                    h_old = build_hdd(a, grid)
                    h_new = h_old if lag == 0.0 else build_hdd(b, grid)
                    y = h_new.matrix @ frame.symbols + noise
                    decided = qpsk_demodulate(MmseEqualizer(h_old.matrix, sigma2).apply(y))
                    cell = acc[lag][p_idx]
                    cell[0] += int(np.count_nonzero(decided != bits))
                    cell[1] += nbits

    out = []
    for lag in lags:
        pts = [BerPoint(float(s), acc[lag][i][0], acc[lag][i][1])
               for i, s in enumerate(snr_grid_db)]
        out.append((lag, pts))
    return out

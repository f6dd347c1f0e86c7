"""Tapped delay-Doppler line (TDDL) channel models and realization.

A TDDL model is a finite set of taps, each with a fixed delay, Doppler
shift, relative power, amplitude distribution, and a minimum
quasi-invariant interval.  This module loads the shipped TDDL-A/B/C
presets, draws time-evolving physical channel realizations (sparse sets of
delay/Doppler/coefficient triples), and renders them onto pilot-bearing
time-frequency grids.

Temporal evolution inside a quasi-stationary interval uses a complex AR(1)
latent process per tap with a rank-preserving amplitude remap, calibrated
so the expected coefficient similarity (min/max amplitude ratio) first
crosses a threshold alpha at the tap's minimum quasi-invariant interval.
"""

from __future__ import annotations

import functools
import json
import logging
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import distributions as dists
from .distributions import DistributionSpec, Family
from .errors import ConfigurationError

__all__ = [
    "TddlTap",
    "TddlModel",
    "GridSpec",
    "PathSet",
    "TfGrid",
    "EvolutionConfig",
    "TddlRealizer",
    "PRESET_NAMES",
    "load_tddl_preset",
    "model_from_dict",
    "model_to_dict",
    "model_from_json",
    "model_to_json",
    "sample_amplitude",
    "strict_power_specs",
    "model_total_power",
    "power_consistency_notes",
    "normalized_delay",
    "normalized_doppler",
    "check_alias_free",
    "make_pilot_values",
    "synthesize_tf_grid",
    "realize_path_set",
]

log = logging.getLogger(__name__)

PRESET_NAMES = ("TDDL-A", "TDDL-B", "TDDL-C")


@dataclass(frozen=True)
class TddlTap:
    """One multipath tap of a TDDL model."""

    delay_ns: float
    power_db: float
    doppler_hz: float
    amplitude: DistributionSpec
    t_qi_min_ms: float
    k_factor_db_reported: float | None = None  # as-published metadata, not derived

    def __post_init__(self):
        if self.delay_ns < 0:
            raise ConfigurationError(f"tap delay must be >= 0 ns, got {self.delay_ns}")
        if self.power_db > 0:
            raise ConfigurationError(f"tap power is relative to the strongest tap (<= 0 dB), got {self.power_db}")
        if self.t_qi_min_ms <= 0:
            raise ConfigurationError(f"t_qi_min_ms must be > 0, got {self.t_qi_min_ms}")


@dataclass(frozen=True)
class TddlModel:
    """Named TDDL channel model: quasi-stationary interval plus ordered taps."""

    name: str
    t_qs_ms: float
    taps: tuple[TddlTap, ...]
    nu_max_hz: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "taps", tuple(self.taps))
        if self.t_qs_ms <= 0:
            raise ConfigurationError(f"t_qs_ms must be > 0, got {self.t_qs_ms}")
        if len(self.taps) < 1:
            raise ConfigurationError("a TDDL model needs at least one tap")
        delays = [t.delay_ns for t in self.taps]
        if sorted(delays) != delays or len(set(delays)) != len(delays):
            raise ConfigurationError("taps must be sorted by delay with pairwise distinct delays")
        first = self.taps[0]
        if first.delay_ns != 0.0 or first.power_db != 0.0:
            raise ConfigurationError("first tap must have delay 0 ns and power 0 dB")
        nu_max = self.doppler_bound_hz
        for i, tap in enumerate(self.taps):
            if abs(tap.doppler_hz) > nu_max + 1e-12:
                raise ConfigurationError(
                    f"tap {i + 1} doppler {tap.doppler_hz} Hz exceeds declared nu_max {nu_max} Hz"
                )

    @property
    def num_taps(self) -> int:
        return len(self.taps)

    @property
    def doppler_bound_hz(self) -> float:
        if self.nu_max_hz is not None:
            return float(self.nu_max_hz)
        return max(abs(t.doppler_hz) for t in self.taps)


@dataclass(frozen=True)
class GridSpec:
    """Time-frequency resource grid geometry.

    M subcarriers spaced delta_f_hz apart, N symbols of duration
    T = 1/delta_f_hz, pilots on a rectangular lattice with spacings d_f
    (frequency) and d_t (time).
    """

    M: int
    N: int
    delta_f_hz: float
    d_f: int = 1
    d_t: int = 1

    def __post_init__(self):
        if self.M <= 0 or self.N <= 0:
            raise ConfigurationError(f"grid dims must be positive, got {self.M}x{self.N}")
        if self.delta_f_hz <= 0:
            raise ConfigurationError(f"delta_f_hz must be > 0, got {self.delta_f_hz}")
        if self.d_f < 1 or self.d_t < 1:
            raise ConfigurationError("pilot spacings d_f, d_t must be >= 1")
        if self.M % self.d_f or self.N % self.d_t:
            raise ConfigurationError(
                f"M={self.M}, N={self.N} must be divisible by d_f={self.d_f}, d_t={self.d_t}"
            )

    @property
    def symbol_time_s(self) -> float:
        return 1.0 / self.delta_f_hz

    @property
    def block_duration_s(self) -> float:
        return self.N * self.symbol_time_s

    @property
    def bandwidth_hz(self) -> float:
        return self.M * self.delta_f_hz

    @property
    def delay_period(self) -> int:
        """Delay-axis period of the coarse grid, in bins."""
        return self.M // self.d_f

    @property
    def doppler_period(self) -> int:
        """Doppler-axis period of the coarse grid, in bins."""
        return self.N // self.d_t

    def pilot_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Subcarrier and symbol indices of the pilot lattice."""
        return np.arange(0, self.M, self.d_f), np.arange(0, self.N, self.d_t)


@dataclass
class PathSet:
    """Instantaneous physical DD channel: sparse delay/Doppler/coefficient triples."""

    taus_s: np.ndarray
    nus_hz: np.ndarray
    coeffs: np.ndarray
    t_offset_s: float = 0.0

    def __post_init__(self):
        self.taus_s = np.atleast_1d(np.asarray(self.taus_s, dtype=float))
        self.nus_hz = np.atleast_1d(np.asarray(self.nus_hz, dtype=float))
        self.coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        if not (len(self.taus_s) == len(self.nus_hz) == len(self.coeffs)):
            raise ConfigurationError("taus_s, nus_hz, coeffs must have equal length")
        if np.any(self.taus_s < 0):
            raise ConfigurationError("path delays must be >= 0")

    def __len__(self) -> int:
        return len(self.taus_s)

    def scaled(self, c: float) -> "PathSet":
        return PathSet(self.taus_s.copy(), self.nus_hz.copy(), self.coeffs * c, self.t_offset_s)


@dataclass
class TfGrid:
    """M x N received time-frequency grid with its geometry.

    grid[m, n] is the sample on subcarrier m, symbol n; entries off the
    pilot lattice are zero.
    """

    grid: np.ndarray
    spec: GridSpec

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=complex)
        if self.grid.shape != (self.spec.M, self.spec.N):
            raise ConfigurationError(
                f"grid shape {self.grid.shape} does not match spec {self.spec.M}x{self.spec.N}"
            )

    def pilot_mask(self) -> np.ndarray:
        mask = np.zeros((self.spec.M, self.spec.N), dtype=bool)
        m_idx, n_idx = self.spec.pilot_indices()
        mask[np.ix_(m_idx, n_idx)] = True
        return mask


# ---------------------------------------------------------------------------
# presets and (de)serialization
# ---------------------------------------------------------------------------

def model_from_dict(doc: dict) -> TddlModel:
    taps = []
    for entry in doc["taps"]:
        amp = entry["amplitude"]
        taps.append(
            TddlTap(
                delay_ns=float(entry["delay_ns"]),
                power_db=float(entry["power_db"]),
                doppler_hz=float(entry["doppler_hz"]),
                amplitude=DistributionSpec(Family(amp["family"]), tuple(amp["params"])),
                t_qi_min_ms=float(entry["t_qi_min_ms"]),
                k_factor_db_reported=entry.get("k_factor_db_reported"),
            )
        )
    nu_max = doc.get("nu_max_hz")
    return TddlModel(
        name=str(doc["name"]),
        t_qs_ms=float(doc["t_qs_ms"]),
        taps=tuple(taps),
        nu_max_hz=None if nu_max is None else float(nu_max),
    )


def model_to_dict(model: TddlModel) -> dict:
    taps = []
    for tap in model.taps:
        entry = {
            "delay_ns": tap.delay_ns,
            "power_db": tap.power_db,
            "doppler_hz": tap.doppler_hz,
            "amplitude": {"family": tap.amplitude.family.value, "params": list(tap.amplitude.params)},
            "t_qi_min_ms": tap.t_qi_min_ms,
        }
        if tap.k_factor_db_reported is not None:
            entry["k_factor_db_reported"] = tap.k_factor_db_reported
        taps.append(entry)
    doc = {"name": model.name, "t_qs_ms": model.t_qs_ms, "taps": taps}
    if model.nu_max_hz is not None:
        doc["nu_max_hz"] = model.nu_max_hz
    return doc


def model_from_json(text: str) -> TddlModel:
    return model_from_dict(json.loads(text))


def model_to_json(model: TddlModel) -> str:
    return json.dumps(model_to_dict(model), indent=2, sort_keys=False) + "\n"


@functools.lru_cache(maxsize=None)
def load_tddl_preset(name: str) -> TddlModel:
    """Load one of the shipped presets: TDDL-A, TDDL-B, or TDDL-C."""
    key = name.strip().upper().replace("_", "-")
    if key not in PRESET_NAMES:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    fname = f"tddl_{key[-1].lower()}.json"
    text = resources.files("ddlab.presets").joinpath(fname).read_text(encoding="utf-8")
    return model_from_json(text)


def sample_amplitude(spec: DistributionSpec, rng: np.random.Generator, size=None):
    """Draw one (or `size`) nonnegative amplitude(s) from the distribution."""
    return dists.sample(spec, rng, size)


# ---------------------------------------------------------------------------
# tap power handling
# ---------------------------------------------------------------------------

def strict_power_specs(model: TddlModel) -> tuple[DistributionSpec, ...]:
    """Amplitude specs rescaled so expected tap power ratios match power_db.

    The first tap anchors the absolute scale; every other tap's
    distribution is scaled so E[|h_i|^2] / E[|h_1|^2] equals
    10^(power_db_i/10) exactly.
    """
    anchor = dists.second_moment(model.taps[0].amplitude)
    specs = []
    for tap in model.taps:
        target = anchor * 10.0 ** (tap.power_db / 10.0)
        implied = dists.second_moment(tap.amplitude)
        c = math.sqrt(target / implied)
        specs.append(tap.amplitude if abs(c - 1.0) < 1e-12 else dists.scaled(tap.amplitude, c))
    return tuple(specs)


def model_total_power(model: TddlModel, strict_power: bool = True) -> float:
    """Sum of expected tap powers E[|h_i|^2] under the chosen power mode."""
    specs = strict_power_specs(model) if strict_power else tuple(t.amplitude for t in model.taps)
    return float(sum(dists.second_moment(s) for s in specs))


def power_consistency_notes(model: TddlModel, tol_db: float = 1.0) -> list[str]:
    """Report taps whose distribution-implied power deviates from power_db.

    The shipped presets encode distribution scales and dB powers that are
    mutually inconsistent by >10 dB, so this is informational, not fatal.
    """
    notes = []
    anchor = dists.second_moment(model.taps[0].amplitude)
    for i, tap in enumerate(model.taps):
        implied_db = 10.0 * math.log10(dists.second_moment(tap.amplitude) / anchor)
        if abs(implied_db - tap.power_db) > tol_db:
            notes.append(
                f"tap {i + 1}: power_db={tap.power_db:+.2f} but distribution implies "
                f"{implied_db:+.2f} dB relative to tap 1"
            )
    return notes


# ---------------------------------------------------------------------------
# normalized coordinates and alias checks
# ---------------------------------------------------------------------------

def normalized_delay(tau_s, grid: GridSpec):
    """Delay in grid bins: l = M * delta_f * tau."""
    return np.asarray(tau_s, dtype=float) * grid.M * grid.delta_f_hz


def normalized_doppler(nu_hz, grid: GridSpec):
    """Doppler in grid bins: k = N * T * nu."""
    return np.asarray(nu_hz, dtype=float) * grid.N * grid.symbol_time_s


def check_alias_free(paths: PathSet, grid: GridSpec) -> None:
    """Require l in [0, M/d_f) and |k| < N/(2 d_t); raise otherwise.

    Violations are configuration errors naming the offending path; they are
    never wrapped silently.
    """
    ell = normalized_delay(paths.taus_s, grid)
    kay = normalized_doppler(paths.nus_hz, grid)
    l_max = grid.delay_period
    k_max = grid.doppler_period / 2.0
    for i, (li, ki) in enumerate(zip(ell, kay)):
        if not (0 <= li < l_max):
            raise ConfigurationError(
                f"path {i + 1}: normalized delay {li:.4f} outside [0, {l_max}) "
                f"(tau={paths.taus_s[i]:.3e} s on {grid.M}x{grid.N} grid, d_f={grid.d_f})"
            )
        if not (abs(ki) < k_max):
            raise ConfigurationError(
                f"path {i + 1}: normalized Doppler {ki:.4f} outside (-{k_max}, {k_max}) "
                f"(nu={paths.nus_hz[i]:.3f} Hz on {grid.M}x{grid.N} grid, d_t={grid.d_t})"
            )


# ---------------------------------------------------------------------------
# temporal evolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvolutionConfig:
    """Controls the AR(1) coefficient evolution between realizations."""

    enabled: bool = True
    tcc_alpha: float = 0.9  # similarity level the calibration targets
    calibration_draws: int = 150_000
    calibration_seed: int = 271828

    def __post_init__(self):
        if not (0.0 < self.tcc_alpha < 1.0):
            raise ConfigurationError("tcc_alpha must lie in (0, 1)")


def _unit_shape_spec(spec: DistributionSpec) -> DistributionSpec:
    """Same shape, unit scale; the similarity statistic is scale-invariant."""
    fam, p = spec.family, spec.params
    if fam is Family.RICIAN:
        return DistributionSpec(fam, (p[0] / p[1], 1.0))
    if fam is Family.RAYLEIGH:
        return DistributionSpec(fam, (1.0,))
    if fam is Family.NAKAGAMI:
        return DistributionSpec(fam, (p[0], 1.0))
    return DistributionSpec(fam, (1.0, p[1]))


def _remap_amplitude(spec: DistributionSpec, z: np.ndarray) -> np.ndarray:
    """Rank-preserving map from latent CN(0,1) magnitudes to the target family."""
    u = -np.expm1(-np.abs(z) ** 2)
    u = np.minimum(u, 1.0 - 1e-16)
    return dists.ppf(spec, u)


@functools.lru_cache(maxsize=256)
def _latent_tcc_correlation_cached(family: str, shape_key: tuple, alpha: float,
                                   n_draws: int, seed: int) -> float:
    spec = DistributionSpec(Family(family), shape_key)
    rng = np.random.default_rng(seed)
    g1 = (rng.standard_normal(n_draws) + 1j * rng.standard_normal(n_draws)) / math.sqrt(2)
    g2 = (rng.standard_normal(n_draws) + 1j * rng.standard_normal(n_draws)) / math.sqrt(2)

    # the calibration statistic tolerates a tabulated quantile map; the
    # realizer itself keeps the exact one
    e_nodes = np.linspace(0.0, 40.0, 8192)
    amp_nodes = dists.ppf(spec, np.minimum(-np.expm1(-e_nodes), 1.0 - 1e-16))
    e1 = np.abs(g1) ** 2

    def mean_similarity(rho: float) -> float:
        z2 = rho * g1 + math.sqrt(1.0 - rho**2) * g2
        a1 = np.interp(e1, e_nodes, amp_nodes)
        a2 = np.interp(np.abs(z2) ** 2, e_nodes, amp_nodes)
        hi = np.maximum(a1, a2)
        lo = np.minimum(a1, a2)
        ok = hi > 0
        return float(np.mean(lo[ok] / hi[ok]))

    if mean_similarity(0.0) >= alpha:
        log.warning(
            "amplitude family %s%s cannot decorrelate below similarity %.2f; "
            "using zero latent correlation at the target lag", family, shape_key, alpha,
        )
        return 0.0
    lo_rho, hi_rho = 0.0, 1.0
    for _ in range(30):
        mid = 0.5 * (lo_rho + hi_rho)
        if mean_similarity(mid) < alpha:
            lo_rho = mid
        else:
            hi_rho = mid
    return 0.5 * (lo_rho + hi_rho)


def latent_tcc_correlation(spec: DistributionSpec, alpha: float = 0.9,
                           n_draws: int = 150_000, seed: int = 271828) -> float:
    """Latent complex-Gaussian pair correlation at which the expected
    coefficient similarity min(|h|,|h'|)/max(|h|,|h'|) equals alpha."""
    unit = _unit_shape_spec(spec)
    shape_key = tuple(round(p, 12) for p in unit.params)
    return _latent_tcc_correlation_cached(unit.family.value, shape_key, float(alpha),
                                          int(n_draws), int(seed))


class TddlRealizer:
    """Draws a time-evolving sequence of PathSets from a TDDL model.

    Each tap carries a latent CN(0,1) state z_i.  Advancing time by dt
    applies z <- r z + sqrt(1-r^2) w with r = rho_i^(dt / t_qi_min_i),
    where rho_i is calibrated so the expected coefficient similarity first
    crosses `evolution.tcc_alpha` at lag t_qi_min_i.  The coefficient is
    the rank-remapped amplitude times exp(j(arg z + 2 pi nu t)); the
    marginal amplitude law is exact at every instant.

    With strict_power (default) tap distribution scales are adjusted so
    expected power ratios follow each tap's power_db; the shipped presets
    need this because their distribution scales and dB columns disagree.
    """

    def __init__(self, model: TddlModel, grid: GridSpec, rng: np.random.Generator,
                 evolution: EvolutionConfig | None = None, strict_power: bool = True,
                 total_power: float | None = None):
        self.model = model
        self.grid = grid
        self.rng = rng
        self.evolution = evolution if evolution is not None else EvolutionConfig()

        specs = strict_power_specs(model) if strict_power else tuple(t.amplitude for t in model.taps)
        if total_power is not None:
            if total_power <= 0:
                raise ConfigurationError("total_power must be positive")
            current = sum(dists.second_moment(s) for s in specs)
            c = math.sqrt(total_power / current)
            specs = tuple(dists.scaled(s, c) for s in specs)
        self.specs = specs

        self.taus_s = np.array([t.delay_ns * 1e-9 for t in model.taps])
        self.nus_hz = np.array([t.doppler_hz for t in model.taps])
        self.t_qi_s = np.array([t.t_qi_min_ms * 1e-3 for t in model.taps])
        check_alias_free(PathSet(self.taus_s, self.nus_hz, np.ones(model.num_taps)), grid)

        if self.evolution.enabled:
            self.latent_rho = np.array([
                latent_tcc_correlation(s, self.evolution.tcc_alpha,
                                       self.evolution.calibration_draws,
                                       self.evolution.calibration_seed)
                for s in specs
            ])
        else:
            self.latent_rho = np.ones(model.num_taps)

        p = model.num_taps
        self._z = (rng.standard_normal(p) + 1j * rng.standard_normal(p)) / math.sqrt(2)
        self._t = None  # time of the current state; set on first at()

    def at(self, t_offset_s: float) -> PathSet:
        """PathSet at absolute time t_offset_s.

        With evolution enabled, times must be non-decreasing across calls
        (the state advances along one trajectory).
        """
        if self.evolution.enabled and self._t is not None:
            dt = t_offset_s - self._t
            if dt < 0:
                raise ConfigurationError(
                    f"evolution runs forward only: requested t={t_offset_s} after t={self._t}"
                )
            if dt > 0:
                r = self.latent_rho ** (dt / self.t_qi_s)
                p = len(self._z)
                w = (self.rng.standard_normal(p) + 1j * self.rng.standard_normal(p)) / math.sqrt(2)
                self._z = r * self._z + np.sqrt(1.0 - r**2) * w
        self._t = t_offset_s

        amp = np.array([_remap_amplitude(s, z) for s, z in zip(self.specs, self._z)])
        phase = np.angle(self._z) + 2.0 * math.pi * self.nus_hz * t_offset_s
        coeffs = amp * np.exp(1j * phase)
        return PathSet(self.taus_s.copy(), self.nus_hz.copy(), coeffs, t_offset_s)


def realize_path_set(model: TddlModel, grid: GridSpec, t_offset_s: float,
                     rng: np.random.Generator, evolution: EvolutionConfig | None = None,
                     strict_power: bool = True) -> PathSet:
    """One-shot realization at a single time; see TddlRealizer for sequences."""
    realizer = TddlRealizer(model, grid, rng, evolution=evolution, strict_power=strict_power)
    return realizer.at(t_offset_s)


# ---------------------------------------------------------------------------
# time-frequency rendering
# ---------------------------------------------------------------------------

def make_pilot_values(grid: GridSpec, seed: int = 0) -> np.ndarray:
    """Unit-modulus QPSK-like pilot sequence on the (M/d_f) x (N/d_t) lattice."""
    rng = np.random.default_rng(seed)
    quarter = rng.integers(0, 4, size=(grid.M // grid.d_f, grid.N // grid.d_t))
    return np.exp(1j * (math.pi / 4 + math.pi / 2 * quarter))


def tf_response(paths: PathSet, grid: GridSpec, m_idx: np.ndarray, n_idx: np.ndarray) -> np.ndarray:
    """Exact noiseless channel response H(m, n) on the given index lattice."""
    ell = normalized_delay(paths.taus_s, grid)
    kay = normalized_doppler(paths.nus_hz, grid)
    m_col = np.asarray(m_idx, dtype=float)[:, None]
    n_row = np.asarray(n_idx, dtype=float)[None, :]
    h = np.zeros((len(m_idx), len(n_idx)), dtype=complex)
    for li, ki, ci in zip(ell, kay, paths.coeffs):
        h += ci * np.exp(-2j * math.pi * m_col * li / grid.M) * np.exp(2j * math.pi * n_row * ki / grid.N)
    return h


def synthesize_tf_grid(paths: PathSet, grid: GridSpec, pilot_values: np.ndarray | None = None,
                       noise_power: float = 0.0, rng: np.random.Generator | None = None) -> TfGrid:
    """Render a PathSet onto a pilot-bearing time-frequency grid.

    Pilot positions carry H(m,n) * X_p(m,n) plus complex white noise of the
    given power; all other resource elements are zero.  Inter-carrier
    interference is not modeled (subcarrier spacing is assumed to dominate
    the Doppler spread).
    """
    check_alias_free(paths, grid)
    if noise_power < 0:
        raise ConfigurationError("noise_power must be >= 0")
    m_idx, n_idx = grid.pilot_indices()
    if pilot_values is None:
        pilot_values = make_pilot_values(grid)
    pilot_values = np.asarray(pilot_values, dtype=complex)
    if pilot_values.shape != (len(m_idx), len(n_idx)):
        raise ConfigurationError(
            f"pilot_values shape {pilot_values.shape} != lattice {(len(m_idx), len(n_idx))}"
        )

    h = tf_response(paths, grid, m_idx, n_idx)
    y_pilots = h * pilot_values
    if noise_power > 0:
        if rng is None:
            raise ConfigurationError("noise_power > 0 requires an rng")
        shape = y_pilots.shape
        w = math.sqrt(noise_power / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        y_pilots = y_pilots + w

    out = np.zeros((grid.M, grid.N), dtype=complex)
    out[np.ix_(m_idx, n_idx)] = y_pilots
    return TfGrid(out, grid)

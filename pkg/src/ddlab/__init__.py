"""Delay-Doppler domain channel modeling and OTFS validation toolkit."""

from .channel_model import (
    EvolutionConfig,
    GridSpec,
    PathSet,
    TddlModel,
    TddlRealizer,
    TddlTap,
    TfGrid,
    load_tddl_preset,
    realize_path_set,
    sample_amplitude,
    synthesize_tf_grid,
)
from .dd_estimator import (
    EstimatedPath,
    NoiseFloorEstimate,
    PeriodicDdGrid,
    SparseTfFading,
    coarse_dd,
    detect_mpc,
    estimate_noise_floor,
    extract_pilot_fading,
    reconstruct_dd,
    refine_paths,
)
from .dist_fit import (
    FitResult,
    SelectionReport,
    fit_mle,
    ks_statistic,
    rician_k_factor,
    select_best,
)
from .distributions import DistributionSpec, Family
from .errors import (
    ConfigurationError,
    DdlabError,
    FitFailure,
    FormatError,
    NumericError,
    ParameterDomainError,
)
from .otfs_link import (
    BerPoint,
    DdChannelMatrix,
    OtfsFrame,
    build_hdd,
    mmse_equalize,
    qpsk_demodulate,
    qpsk_modulate,
    run_ber_sweep,
    run_mismatch_experiment,
    transmit,
)
from .stationarity import (
    DdPowerSpectrum,
    IntervalReport,
    PathTrack,
    SimilarityMatrix,
    cdd,
    cdd_matrix,
    dd_power,
    dd_tcc,
    quasi_invariant_intervals,
    quasi_stationary_intervals,
    track_paths,
    weighted_params,
)

__version__ = "0.1.0"

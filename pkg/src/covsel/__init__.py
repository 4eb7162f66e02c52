"""Calibration-sample selection for post-training quantization.

Selects calibration samples by maximizing weighted coverage of activation
outlier channels: profile (or synthesize) per-sample channel magnitudes,
threshold them into an outlier set with per-channel weights, and run
greedy submodular selection against the resulting coverage matrix.
"""

__version__ = "0.1.0"

from .outliers import (
    CoverageMatrix,
    LayerThresholds,
    OutlierModel,
    build_coverage_matrix,
    build_outlier_model,
    compute_thresholds,
    covered_channels,
    objective_value,
)
from .profiles import (
    ActivationProfile,
    CCAPFormatError,
    CCAPTruncationError,
    ProfileValidationError,
    load_profile,
    read_profile,
    save_profile,
    validate_profile,
    write_profile,
)
from .selection import (
    CoverageReport,
    SelectionResult,
    attach_objective,
    brute_force_optimal,
    coverage_report,
    greedy_select,
    mean_pairwise_jaccard,
    select_max_actvar,
    select_max_ppl,
    select_random,
    select_stratified,
    write_index_list,
)
from .surrogate import (
    AdaptiveResult,
    DeficitVector,
    SurrogateReport,
    adaptive_refine,
    check_surrogate_bound,
    per_layer_surrogate_error,
    simulate_deficits,
    surrogate_loss,
)
from .synthgen import PoolConfig, generate_pool, measured_outlier_fraction

__all__ = [
    "ActivationProfile",
    "AdaptiveResult",
    "CCAPFormatError",
    "CCAPTruncationError",
    "CoverageMatrix",
    "CoverageReport",
    "DeficitVector",
    "LayerThresholds",
    "OutlierModel",
    "PoolConfig",
    "ProfileValidationError",
    "SelectionResult",
    "SurrogateReport",
    "adaptive_refine",
    "attach_objective",
    "brute_force_optimal",
    "build_coverage_matrix",
    "build_outlier_model",
    "check_surrogate_bound",
    "compute_thresholds",
    "coverage_report",
    "covered_channels",
    "generate_pool",
    "greedy_select",
    "load_profile",
    "mean_pairwise_jaccard",
    "measured_outlier_fraction",
    "objective_value",
    "per_layer_surrogate_error",
    "read_profile",
    "save_profile",
    "select_max_actvar",
    "select_max_ppl",
    "select_random",
    "select_stratified",
    "simulate_deficits",
    "surrogate_loss",
    "validate_profile",
    "write_index_list",
    "write_profile",
]

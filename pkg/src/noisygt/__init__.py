"""Noisy group testing toolkit.

Rate thresholds for arbitrary binary noise channels, the constant-column
and spatially coupled test designs, and the DD / SPARC / SPEX / BP /
exhaustive-posterior decoders, with a Monte Carlo harness tying them
together.
"""

from .channel import (
    NoiseChannel,
    d_shannon,
    entropy,
    kl_div,
    marginal_output_rates,
    mutual_info_rate,
    parse_channel,
    phi,
    shannon_constant,
    transmit,
)
from .rates import (
    DdSolution,
    RateReport,
    YInterval,
    admissible_interval,
    bsc_cex1_bounds,
    c_dd,
    c_ex0,
    c_ex1,
    c_ex2,
    c_exact,
    chen_scarlett_cls,
    closed_form_z_channel,
    kl_min_profile,
    rate_report,
    z_of_y,
)
from .thresholds import ThresholdError, ThresholdSpec, build_threshold
from .design import (
    Instance,
    ScParams,
    TestDesign,
    actual_outcomes,
    build_cc,
    build_sc,
    derive_sc_params,
    design_from_tests,
    displayed_outcomes,
    make_instance,
    sample_ground_truth,
)
from .decode import (
    BpResult,
    PosteriorTable,
    SparcResult,
    SpexResult,
    bp_decode,
    dd_decode,
    exhaustive_posterior,
    expected_scores,
    hamming_error,
    plausible_set,
    sparc_decode,
    sparc_weights,
    spex_decode,
    untainted_counts,
)
from .harness import ExperimentConfig, TrialResult, derive_rng

__version__ = "0.1.0"

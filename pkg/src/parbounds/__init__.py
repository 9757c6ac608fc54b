"""Upper bounds on ML decoding error probability over parallel MBIOS channels.

The package covers: channel models and their scalar functionals, exact
log-domain weight enumerators for repeat-accumulate and turbo ensembles, the
DS2 and 1961 Gallager bounds with optimized tilting measures, attainable
channel regions, and exhaustive / Monte-Carlo ground-truth oracles.
"""

from .channels import (
    DEFAULT_QUAD,
    ChannelError,
    DensityTable,
    MbiosChannel,
    ParallelChannelSet,
    QuadratureSpec,
    bhattacharyya,
    capacity_bits,
    cutoff_rate_bits,
    density_table,
    ebno_to_esno,
)
from .ds2 import (
    BoundError,
    ConvergenceError,
    Ds2Params,
    Ds2Eval,
    OptimizerConfig,
    TiltingSolution,
    ds2_exponent,
    eval_ab,
    optimize_params,
    subcode_bound,
    tilting_fixed_point,
    total_bound_per_subcode,
    total_bound_single_measure,
    union_bhattacharyya,
)
from .ensembles import (
    DEFAULT_TURBO_G,
    EnsembleSpec,
    ensemble_spectrum,
    extrapolated_exponent,
    nsra_iowe,
    nsra_spectrum,
    spara_iowe,
    spara_spectrum,
    spra_iowe,
    spra_spectrum,
    turbo_iowe,
)
from .gallager61 import (
    G61OptimizerConfig,
    G61Params,
    TiltingFunction,
    eval_gz,
    g61_exponent,
    g61_subcode_bound,
    g61_total_bound,
    g61_total_per_subcode,
    optimized_f,
)
from .oracle import (
    ExplicitCode,
    MlTrialResult,
    exhaustive_interleaver_average,
    exhaustive_iowe,
    ml_montecarlo,
    wilson_interval,
)
from .regions import (
    AttainabilityReport,
    RegionConfig,
    boundary_search,
    boundary_trace,
    capacity_converse,
    check_point,
    cutoff_reference,
    default_delta_grid,
    reference_boundary,
    two_biawgn_set,
)
from .spectra import (
    DistanceSpectrum,
    FsmEncoder,
    Iowe,
    ResourceError,
    SpectraError,
    SpectralExponent,
    acc_iowe,
    exponent_of,
    fsm_iowe,
    log_binomial,
    log_sum_exp,
    partial_precode,
    puncture_random,
    rep_iowe,
    systematic_join,
    to_distance,
    turbo_two_branch,
    uniform_concat,
)

__version__ = "0.1.0"

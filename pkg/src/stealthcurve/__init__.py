"""Stealthiness-distortion tradeoffs for scalar linear Gaussian systems under input injection."""

__version__ = "0.1.0"

from .divergence import RatioUndefinedError, gaussian_kl, itakura_saito, kl_rate, scalar_gaussian_kl
from .lti import (
    ClosedLoop,
    FirstOrderPlant,
    OpenLoop,
    RationalTransferFunction,
    StabilityError,
    check_closed_loop_stability,
    plant_frequency_response,
    realize_controller,
)
from .simulate import (
    SimulationResult,
    estimate_distortion,
    estimate_output_distortion,
    simulate,
    synthesize_colored_gaussian,
)
from .spectra import (
    FrequencyGrid,
    SpectrumSamples,
    ar1_spectrum,
    autocovariance_from_spectrum,
    integrate_spectrum,
    output_spectrum,
    toeplitz_covariance,
    welch_estimate,
    white_spectrum,
)
from .tradeoff import (
    CurveTable,
    SolverError,
    TradeoffPoint,
    WaterfillAllocation,
    finite_horizon_min_kl,
    solve_zeta_for_distortion,
    solve_zeta_for_kl,
    tradeoff_curve,
    waterfill_parallel,
    worst_case_attack,
)

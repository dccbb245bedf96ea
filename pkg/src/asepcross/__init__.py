"""Exact transition and total-crossing probabilities for multi-species
exclusion processes, with stochastic-simulation and matrix-exponential
oracles for validation."""

__version__ = "0.1.0"

from .core import (
    AccuracyError,
    BlockSignatureVector,
    ComplexPoint,
    ConfigurationError,
    IntegerComposition,
    ModelParams,
    ParticleConfig,
    ResourceLimitError,
    StrictSignature,
    ValidationError,
    crossing_configs,
    enumerate_permutations,
    validate_standard_regime,
)
from .formulas import (
    CrossingQuery,
    GreenQuery,
    WallQuery,
    block_crossing,
    cumulative_crossing_bernoulli,
    cumulative_crossing_one_wall,
    cumulative_crossing_step,
    eigenfunction_P,
    gamma_wall,
    r_asep_transition,
    rainbow_total_crossing,
    schutz_determinant,
    single_species_crossing,
    tasep_block_crossing,
    two_tasep_crossing,
    two_tasep_green,
)
from .oracle import (
    MonteCarloJob,
    SimulationSpec,
    WindowGenerator,
    build_window_generator,
    default_window,
    estimate_transition,
    expm_transition,
    gillespie_run,
    run_monte_carlo,
    sample_bernoulli_step,
    transition_row,
)
from .vertex import (
    F_lambda_sym,
    G_mu_nu,
    cauchy_check,
    discrete_transition,
    f_mu,
    g_star_mu,
    orthogonality_check,
    sfF_lambda,
    stochastic_weights_check,
    weight_L,
    weight_M,
    xi_mu,
)

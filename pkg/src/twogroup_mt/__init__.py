"""Two-group Maki-Thompson rumour model with directed inter-group contacts."""
from .clt import (
    FluctuationResult,
    closed_form_deviation,
    covariance_closed_form,
    covariance_quadrature,
    diffusion,
    drift,
    drift_jacobian,
    fluctuations,
    fundamental_matrix,
    gof_test,
    sigma,
)
from .limits import (
    AsymptoticSolution,
    DeterministicPath,
    f_eval,
    f_prime,
    lambert_solution,
    lambert_w0,
    path_eval,
    solve_asymptotics,
    y1_prime_at,
)
from .model import (
    InitialFractions,
    ModelParams,
    PopulationState,
    Transition,
    beta,
    discretize,
    jump_probabilities,
    rates,
    validate,
)
from .ssa import EnsembleSummary, RecordMode, SimConfig, TrajectoryRecord, run_ensemble, scaled_fluctuations, simulate

__version__ = "0.1.0"

"""Moderate-deviation importance sampling for 1-D stochastic reaction-diffusion equations."""
from .campaign import CampaignResult, run_campaign, sweep, write_csv
from .control import ControlPolicy, control_eval, rho_eps, subsolution_value
from .model import ModelSpec, equilibrium, nonlinearity_in_modes, reaction
from .solver import SolverConfig, TrajectoryOutcome, run_trajectory, step
from .specfun import elliptic_K, inverse_M, jacobi_elliptic, quarter_period_M
from .spectral import (
    BoundaryCondition,
    ConfigurationError,
    SpectralBasis,
    check_spectral_gap,
    laplacian_spectrum,
    linearized_spectrum,
)
from .variational import (
    MinimizerPath,
    action_functional,
    decay_rates,
    exit_direction,
    lambda_weights,
    minimizer_eval,
    quasipotential,
    t_star,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition", "CampaignResult", "ConfigurationError", "ControlPolicy", "MinimizerPath",
    "ModelSpec", "SolverConfig", "SpectralBasis", "TrajectoryOutcome", "action_functional",
    "check_spectral_gap", "control_eval", "decay_rates", "elliptic_K", "equilibrium", "exit_direction",
    "inverse_M", "jacobi_elliptic", "lambda_weights", "laplacian_spectrum", "linearized_spectrum",
    "minimizer_eval", "nonlinearity_in_modes", "quarter_period_M", "quasipotential", "reaction",
    "rho_eps", "run_campaign", "run_trajectory", "step", "subsolution_value", "sweep", "t_star",
    "write_csv",
]

"""Mild solvers and Monte Carlo labs for reaction-diffusion equations with Poisson noise."""

__version__ = "0.1.0"

from .exceptions import (
    ContractionError,
    ContractViolationError,
    InvalidParameterError,
    NonconvergenceError,
    PreconditionError,
)
from .noise import MarkSpace, NoiseModel, PathRealization, compensated_integral, sample_path, sample_poisson, stochastic_convolution
from .nonlinearity import MonotoneFunction, strong_dissipativity_bound
from .paths import BatchPath, SolutionPath, TimeGrid
from .solver import Model, choose_alpha, ensemble_norms, simulate, solve_multiplicative
from .spectral import Field, SemigroupOperator, SpatialGrid, lp_norm

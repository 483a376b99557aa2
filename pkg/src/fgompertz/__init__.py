"""Simulation and parameter estimation for the fractional Gompertz diffusion."""

from .diffusion import sigma2_1, sigma2_2, sigma2_3, sigma4, sigma4_from_variations
from .errors import FgdError
from .fbm import (
    FbmPath,
    GridSpec,
    circulant_eigenvalues,
    fgn_autocovariance,
    sample_fbm_cholesky,
    sample_fbm_circulant,
)
from .gompertz import GompertzParams, ProcessPath, euler_path, solve_explicit, subsample
from .harness import ExperimentSpec, SummaryTable, normality_diagnostic, run_experiment
from .hurst import RatioSchedule, h1, h2, h3, h4, hurst_from_path, weights
from .theory import limit_var_h1, limit_var_h3, sigma_sq

__version__ = "0.1.0"

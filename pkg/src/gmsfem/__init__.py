"""Multiscale finite elements with oversampled local spectral spaces."""
from .errors import (
    ConfigurationError, ContractError, DegenerateInputError, GmsfemError, NumericError,
    ParameterError, RangeError,
)
from .grid import CoarseLayers, FineLayers, build_grids, build_partition, neighborhood, oversample
from .coeff import CoefficientField, chop, evaluate, generate_field, mass_weight, parameter_average
from .snapshot import harmonic_snapshots, merge_parameter_snapshots, spectral_snapshots
from .reduce import Count, Threshold, lambda_star, multi_offline_space, offline_space, online_space
from .couple import build_operator, solve_coarse, solve_fine, solve_snapshot_reference
from .metrics import error_lambda_correlation, relative_error, weighted_norms

__version__ = "0.1.0"

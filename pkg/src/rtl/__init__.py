"""
Representation transfer learning for partially linear models

Learns a shared representation of the confounders on source domains, fits the
target's primary coefficients with the representation fixed, and reports
sandwich-based confidence intervals.
"""

from .dataset import Dataset, stack_datasets
from .errors import ConfigError, DataError, NumericError, RTLError
from .estimator import (SourceFit, TargetFit, TrainConfig, align_representation, fit_sources,
                        fit_target, predict)
from .inference import (TargetInference, coefficient_intervals, estimate_covariance, estimate_mu,
                        linear_combination_inference)
from .numeric import SolveOptions
from .repnet import NetworkConfig, NetworkParams

__version__ = "0.1.0"

__all__ = [
    'Dataset',
    'stack_datasets',
    'ConfigError',
    'DataError',
    'NumericError',
    'RTLError',
    'SourceFit',
    'TargetFit',
    'TrainConfig',
    'align_representation',
    'fit_sources',
    'fit_target',
    'predict',
    'TargetInference',
    'coefficient_intervals',
    'estimate_covariance',
    'estimate_mu',
    'linear_combination_inference',
    'SolveOptions',
    'NetworkConfig',
    'NetworkParams',
]

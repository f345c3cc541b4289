"""
Transfer methods compared in the benchmark
"""

from .base import BaselineFit, MethodConfig, TransferMethod, TransferTask
from .factory import MethodFactory, create_methods, get_method
from .meta import combine_inverse_variance, fit_meta
from .oracle import fit_oracle
from .pool import fit_pool
from .splines import SplineBasis, spline_basis_eval, spline_features
from .stl import fit_stl

__all__ = [
    'BaselineFit',
    'MethodConfig',
    'TransferMethod',
    'TransferTask',
    'MethodFactory',
    'create_methods',
    'get_method',
    'combine_inverse_variance',
    'fit_meta',
    'fit_oracle',
    'fit_pool',
    'SplineBasis',
    'spline_basis_eval',
    'spline_features',
    'fit_stl',
]

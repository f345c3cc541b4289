"""
Dense linear algebra shared by the estimators

Matrices are float64 numpy arrays. Solves go through the normal equations with
a Cholesky factorization; when the unridged factorization fails a small ridge
proportional to the mean diagonal is added before giving up.
"""

import logging
from dataclasses import dataclass, asdict
from typing import Any, Dict, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import ConfigError, DataError, DimensionMismatch, NotSymmetric, SingularSystem

logger = logging.getLogger(__name__)

FALLBACK_RIDGE_SCALE = 1e-8
SYMMETRY_RTOL = 1e-9


@dataclass(frozen=True)
class SolveOptions:
    """Ridge and singularity threshold for the symmetric solvers"""
    ridge: float = 0.0
    tolerance: float = 1e-12

    def __post_init__(self):
        if not self.ridge >= 0:
            raise ConfigError(f"ridge must be >= 0, got {self.ridge}")
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be > 0, got {self.tolerance}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SolveOptions":
        return cls(**{k: float(v) for k, v in (data or {}).items()})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array"""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


def _try_factor(gram: np.ndarray, ridge: float, tolerance: float):
    """Cholesky of gram + ridge*I, or None when a pivot falls below tolerance"""
    m = gram.shape[0]
    system = gram + ridge * np.eye(m) if ridge > 0 else gram
    try:
        factor = cho_factor(system, lower=True, check_finite=False)
    except LinAlgError:
        return None
    pivots = np.abs(np.diag(factor[0]))
    if pivots.min() ** 2 <= tolerance * pivots.max() ** 2:
        return None
    return factor


def _factor_with_fallback(gram: np.ndarray, opts: SolveOptions, context: str):
    factor = _try_factor(gram, opts.ridge, opts.tolerance)
    if factor is not None:
        return factor
    if opts.ridge == 0:
        m = gram.shape[0]
        fallback = FALLBACK_RIDGE_SCALE * np.trace(gram) / m
        if fallback > 0:
            logger.debug(f"{context}: unridged factorization failed, retrying with ridge {fallback:.3e}")
            factor = _try_factor(gram, fallback, opts.tolerance)
            if factor is not None:
                return factor
    raise SingularSystem(f"{context}: normal matrix is numerically singular")


def least_squares(design, response, opts: SolveOptions = SolveOptions()) -> np.ndarray:
    """
    Ridge-stabilized least squares

    Args:
        design: n x m design matrix
        response: length-n response
        opts: ridge and singularity tolerance

    Returns:
        argmin_c ||response - design c||^2 + ridge ||c||^2

    Raises:
        DimensionMismatch: shapes disagree
        SingularSystem: normal matrix singular even after the fallback ridge
    """
    D = as_matrix(design, "design")
    y = np.asarray(response, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != D.shape[0]:
        raise DimensionMismatch(f"response shape {y.shape} does not match design rows {D.shape[0]}")
    if D.shape[0] < 1 or D.shape[1] < 1:
        raise DimensionMismatch(f"design must be non-empty, got shape {D.shape}")

    gram = D.T @ D
    factor = _factor_with_fallback(gram, opts, "least_squares")
    return cho_solve(factor, D.T @ y, check_finite=False)


def solve_spd(A, B, opts: SolveOptions = SolveOptions()) -> np.ndarray:
    """
    Solve (A + ridge I) X = B for symmetric positive (semi)definite A

    B may be a vector or a matrix; the result has the same shape as B.
    """
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"A must be square, got shape {A.shape}")
    B = np.asarray(B, dtype=np.float64)
    if B.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"B rows {B.shape[0]} do not match A size {A.shape[0]}")

    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    if np.abs(A - A.T).max() > SYMMETRY_RTOL * scale:
        raise NotSymmetric("solve_spd requires a symmetric matrix")

    factor = _factor_with_fallback(A, opts, "solve_spd")
    return cho_solve(factor, B, check_finite=False)


def numerical_rank(M, rtol: float = 1e-8) -> Tuple[int, np.ndarray]:
    """Rank from singular values below rtol * largest, plus the singular values"""
    s = np.linalg.svd(np.asarray(M, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0, s
    return int(np.sum(s >= rtol * s[0])), s


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)

"""
Inference for the target's primary coefficients

The orthogonalized covariates V_i = X_i - mu_hat R_i feed a
heteroskedasticity-robust sandwich J^-1 A J^-1; intervals use the normal
approximation for sqrt(n0)(beta_hat - beta).
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .errors import DimensionMismatch, InvalidAlpha, InvalidLevel, NegativeStandardError
from .estimator import TargetFit
from .numeric import SolveOptions, as_matrix, numerical_rank, solve_spd, symmetrize

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-8


@dataclass(frozen=True)
class TargetInference:
    mu_hat: np.ndarray
    J0_hat: np.ndarray
    A_hat: np.ndarray
    Sigma_hat: np.ndarray
    se: np.ndarray
    n0: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mu_hat": self.mu_hat.tolist(),
            "J0_hat": self.J0_hat.tolist(),
            "A_hat": self.A_hat.tolist(),
            "Sigma_hat": self.Sigma_hat.tolist(),
            "se": self.se.tolist(),
            "n0": self.n0,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TargetInference":
        def mat(key):
            arr = np.asarray(data[key], dtype=np.float64)
            return arr if arr.ndim == 2 else arr.reshape(len(data["se"]), -1)
        return cls(mat("mu_hat"), mat("J0_hat"), mat("A_hat"), mat("Sigma_hat"),
                   np.asarray(data["se"], dtype=np.float64), int(data["n0"]))


@dataclass(frozen=True)
class ConfidenceInterval:
    estimate: float
    se: float
    level: float
    lower: float
    upper: float
    name: str = ""

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class IdentifiabilityReport:
    """Numerical ranks behind the identifiability conditions on gamma and R"""
    p: int
    gamma_rank: int
    rep_rank: int
    gamma_singular_values: np.ndarray
    rep_singular_values: np.ndarray

    @property
    def gammas_independent(self) -> bool:
        """Condition (a): the stacked source gammas span R^p"""
        return self.gamma_rank == self.p

    @property
    def rep_invertible(self) -> bool:
        """Condition (b): p representation evaluations are linearly independent"""
        return self.rep_rank == self.p

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": self.p,
            "gamma_rank": self.gamma_rank,
            "rep_rank": self.rep_rank,
            "condition_a": "satisfied" if self.gammas_independent else "violated",
            "condition_b": "satisfied" if self.rep_invertible else "violated",
            "gamma_singular_values": self.gamma_singular_values.tolist(),
            "rep_singular_values": self.rep_singular_values.tolist(),
        }


def estimate_mu(X0, rep_values, opts: SolveOptions = SolveOptions()) -> np.ndarray:
    """mu_hat = (sum_i X_i R_i^T)(sum_i R_i R_i^T)^-1, a d x p matrix"""
    X0 = as_matrix(X0, "X0")
    R = as_matrix(rep_values, "rep_values")
    if X0.shape[0] != R.shape[0]:
        raise DimensionMismatch(f"X0 has {X0.shape[0]} rows, rep values {R.shape[0]}")
    return solve_spd(R.T @ R, R.T @ X0, opts).T


def orthogonalized_covariates(X0, rep_values, mu_hat) -> np.ndarray:
    """V_i = X_i - mu_hat R_i, one row per observation"""
    return np.asarray(X0, dtype=np.float64) - np.asarray(rep_values, dtype=np.float64) @ mu_hat.T


def estimate_covariance(fit: TargetFit, mu_hat: np.ndarray, X0,
                        opts: SolveOptions = SolveOptions()) -> TargetInference:
    """
    Sandwich covariance of beta0-hat

    Args:
        fit: target fit (residuals and R-hat values on the target rows)
        mu_hat: d x p matrix from estimate_mu
        X0: target primary covariates used in the fit
        opts: solver options for inverting J0-hat

    Returns:
        TargetInference with J0 = mean V V^T, A = mean e^2 V V^T, Sigma = J0^-1 A J0^-1
        and se_j = sqrt(Sigma_jj / n0)
    """
    V = orthogonalized_covariates(X0, fit.rep_values, mu_hat)
    return sandwich_from_scores(V, fit.residuals, mu_hat, opts)


def sandwich_from_scores(V: np.ndarray, residuals: np.ndarray, mu_hat: np.ndarray,
                         opts: SolveOptions = SolveOptions()) -> TargetInference:
    V = as_matrix(V, "V")
    residuals = np.asarray(residuals, dtype=np.float64)
    n0, d = V.shape
    if residuals.shape != (n0,):
        raise DimensionMismatch(f"residuals shape {residuals.shape} does not match n0={n0}")

    J0 = symmetrize(V.T @ V / n0)
    A = symmetrize((V * residuals[:, None] ** 2).T @ V / n0)
    J0_inv = symmetrize(solve_spd(J0, np.eye(d), opts))
    Sigma = symmetrize(J0_inv @ A @ J0_inv)
    se = np.sqrt(np.clip(np.diag(Sigma), 0.0, None) / n0)
    return TargetInference(mu_hat, J0, A, Sigma, se, n0)


def normal_quantile(level: float) -> float:
    """Two-sided critical value z_{(1+level)/2}"""
    if not 0 < level < 1:
        raise InvalidLevel(f"confidence level must be in (0, 1), got {level}")
    return float(stats.norm.ppf(0.5 * (1.0 + level)))


def confidence_interval(estimate: float, se: float, level: float = 0.95, name: str = "") -> ConfidenceInterval:
    """estimate -/+ z_{(1+level)/2} * se"""
    if se < 0:
        raise NegativeStandardError(f"standard error must be >= 0, got {se}")
    z = normal_quantile(level)
    half = z * se
    return ConfidenceInterval(float(estimate), float(se), float(level),
                              float(estimate - half), float(estimate + half), name)


def linear_combination_inference(beta0, Sigma_hat, n0: int, alpha, level: float = 0.95,
                                 name: str = "alpha'beta") -> ConfidenceInterval:
    """Interval for theta = alpha' beta0 with se = sqrt(alpha' Sigma alpha / n0)"""
    beta0 = np.asarray(beta0, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    Sigma_hat = np.asarray(Sigma_hat, dtype=np.float64)
    if alpha.shape != beta0.shape or Sigma_hat.shape != (beta0.size, beta0.size):
        raise DimensionMismatch(
            f"alpha {alpha.shape}, beta0 {beta0.shape} and Sigma {Sigma_hat.shape} are incompatible"
        )
    if not np.linalg.norm(alpha) > 0:
        raise InvalidAlpha("alpha must be nonzero")
    variance = max(float(alpha @ Sigma_hat @ alpha), 0.0)
    return confidence_interval(float(alpha @ beta0), np.sqrt(variance / n0), level, name)


def coefficient_intervals(beta0, inference: TargetInference, level: float = 0.95,
                          names: Optional[Sequence[str]] = None) -> List[ConfidenceInterval]:
    """One interval per primary coefficient"""
    beta0 = np.asarray(beta0, dtype=np.float64)
    names = list(names) if names else [f"x{j + 1}" for j in range(beta0.size)]
    return [confidence_interval(beta0[j], inference.se[j], level, names[j]) for j in range(beta0.size)]


def intervals_to_frame(intervals: Sequence[ConfidenceInterval]) -> pd.DataFrame:
    return pd.DataFrame(
        [{"name": ci.name, "estimate": ci.estimate, "se": ci.se,
          "lower": ci.lower, "upper": ci.upper, "level": ci.level} for ci in intervals],
        columns=["name", "estimate", "se", "lower", "upper", "level"],
    )


def identifiability_diagnostics(gammas: Sequence[np.ndarray], rep_values) -> IdentifiabilityReport:
    """Ranks of the stacked source gammas and of the representation values"""
    G = np.vstack([np.asarray(g, dtype=np.float64).reshape(1, -1) for g in gammas])
    R = np.asarray(rep_values, dtype=np.float64)
    p = G.shape[1]
    if R.ndim != 2 or R.shape[1] != p:
        raise DimensionMismatch(f"rep values shape {R.shape} does not match p={p}")
    gamma_rank, gamma_sv = numerical_rank(G, RANK_RTOL)
    rep_rank, rep_sv = numerical_rank(R, RANK_RTOL)
    report = IdentifiabilityReport(p, gamma_rank, rep_rank, gamma_sv, rep_sv)
    if not report.gammas_independent:
        logger.warning(f"Source gammas have rank {gamma_rank} < p={p}; gamma'R is not identified from sources")
    if not report.rep_invertible:
        logger.warning(f"Representation values have rank {rep_rank} < p={p}")
    return report

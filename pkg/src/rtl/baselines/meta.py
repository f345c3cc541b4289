"""
Meta-analysis: inverse-variance combination of per-domain estimates
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..dataset import Dataset
from ..errors import DimensionMismatch, InsufficientData, NonpositiveVariance
from ..numeric import SolveOptions, least_squares, solve_spd, symmetrize
from .base import (DEFAULT_KNOT_GRID, BaselineFit, TransferMethod, TransferTask, all_domains,
                   linear_surface)
from .splines import SplineBasis, spline_features, support_from_data

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DomainEstimate:
    domain_id: str
    beta: np.ndarray
    variance: np.ndarray
    n: int


def combine_inverse_variance(betas, variances) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coordinatewise inverse-variance weighted mean

    Args:
        betas: K x d estimates
        variances: K x d variances, all strictly positive

    Returns:
        (combined estimate of length d, K x d weights summing to one per column)

    Raises:
        NonpositiveVariance: a variance is zero, negative or not finite
    """
    betas = np.atleast_2d(np.asarray(betas, dtype=np.float64))
    variances = np.atleast_2d(np.asarray(variances, dtype=np.float64))
    if betas.shape != variances.shape:
        raise DimensionMismatch(f"estimates {betas.shape} and variances {variances.shape} differ")
    bad = ~(np.isfinite(variances) & (variances > 0))
    if bad.any():
        k, j = np.argwhere(bad)[0]
        raise NonpositiveVariance(f"domain {k}, coordinate {j}: variance {variances[k, j]} is not positive")
    precision = 1.0 / variances
    weights = precision / precision.sum(axis=0)
    return (weights * betas).sum(axis=0), weights


def domain_spline_fit(data: Dataset, basis: SplineBasis,
                      opts: SolveOptions = SolveOptions()) -> Tuple[DomainEstimate, np.ndarray]:
    """Spline-basis linear fit of one domain with HC0 variances for beta"""
    D = np.hstack([data.X, spline_features(basis, data.Z)])
    coef = least_squares(D, data.y, opts)
    resid = data.y - D @ coef
    gram_inv = symmetrize(solve_spd(D.T @ D, np.eye(D.shape[1]), opts))
    meat = (D * resid[:, None] ** 2).T @ D
    cov = gram_inv @ meat @ gram_inv
    return DomainEstimate(data.domain_id, coef[:data.d], np.diag(cov)[:data.d].copy(), data.n), coef


def fit_meta(domains: Sequence[Dataset], basis: SplineBasis,
             opts: SolveOptions = SolveOptions()) -> BaselineFit:
    """
    Combine per-domain beta estimates by inverse variance

    domains[0] is the target. Domains with too few rows for the spline model
    are left out of the combination. The prediction surface adds a target-only
    spline fit of Y0 - X0 beta to X beta.

    Raises:
        InsufficientData: the target cannot support the spline model
        NonpositiveVariance: a domain's sandwich variance is not positive
    """
    n_features = None
    estimates: List[DomainEstimate] = []
    skipped = []
    for k, ds in enumerate(domains):
        if n_features is None:
            n_features = ds.d + spline_features(basis, ds.Z[:1]).shape[1]
        if ds.n <= n_features:
            if k == 0:
                raise InsufficientData(f"{ds.domain_id}: {ds.n} rows for {n_features} spline-model columns")
            skipped.append(ds.domain_id)
            continue
        estimates.append(domain_spline_fit(ds, basis, opts)[0])
    if skipped:
        logger.warning(f"Meta skipped {len(skipped)} domain(s) with too few rows: {skipped}")

    beta, weights = combine_inverse_variance([e.beta for e in estimates], [e.variance for e in estimates])

    target = domains[0]
    features = spline_features(basis, target.Z)
    gamma = least_squares(features, target.y - target.X @ beta, opts)
    return BaselineFit(
        method="Meta",
        beta0=beta,
        surface=linear_surface(beta, lambda Z: spline_features(basis, Z), gamma),
        aux={
            "domains": [e.domain_id for e in estimates],
            "skipped": skipped,
            "weights": weights.tolist(),
        },
    )


def select_meta(domains: Sequence[Dataset], knot_grid: Sequence[int] = DEFAULT_KNOT_GRID,
                validation: Optional[Dataset] = None,
                opts: SolveOptions = SolveOptions()) -> BaselineFit:
    """fit_meta at the knot count with the lowest validation MSE (first feasible count without validation)"""
    Z_all = np.vstack([ds.Z for ds in domains] + ([validation.Z] if validation is not None else []))
    lower, upper = support_from_data(Z_all)
    scores: Dict[str, float] = {}
    best = None
    last_error = None
    for n_knots in knot_grid:
        basis = SplineBasis.equally_spaced(domains[0].q, n_knots, lower, upper)
        try:
            result = fit_meta(domains, basis, opts)
        except InsufficientData as e:
            last_error = e
            continue
        if validation is None:
            best = (0.0, n_knots, result)
            break
        mse = float(np.mean((result.predict(validation.X, validation.Z) - validation.y) ** 2))
        scores[str(n_knots)] = mse
        if best is None or mse < best[0]:
            best = (mse, n_knots, result)
    if best is None:
        raise last_error or InsufficientData("Meta: empty knot grid")
    _, n_knots, result = best
    result.aux.update({"knots": int(n_knots), "validation_mse": scores})
    return result


class MetaAnalysis(TransferMethod):
    label = "Meta"

    def fit(self, task: TransferTask) -> BaselineFit:
        return select_meta(all_domains(task), self.config.knot_grid, task.target_validation, self.config.solve)

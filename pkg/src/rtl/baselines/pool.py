"""
Pooled regression: one partially linear model for all domains

Every domain, target included, is assumed to share beta and the confounding
function; the latter is an additive cubic spline whose knot count is chosen
on validation rows.
"""

import logging
from typing import Dict, Optional, Sequence

import numpy as np

from ..dataio import holdout_split
from ..dataset import Dataset, stack_datasets
from ..errors import InsufficientData
from ..numeric import SolveOptions, least_squares
from ..seeding import derive_seed
from .base import (DEFAULT_KNOT_GRID, BaselineFit, TransferMethod, TransferTask, all_domains,
                   linear_surface)
from .splines import SplineBasis, spline_features, support_from_data

logger = logging.getLogger(__name__)


def _intercept(Z: np.ndarray) -> np.ndarray:
    return np.ones((np.asarray(Z).shape[0], 1))


def fit_pool(domains: Sequence[Dataset], knot_grid: Sequence[int] = DEFAULT_KNOT_GRID,
             validation: Optional[Dataset] = None, opts: SolveOptions = SolveOptions(),
             use_spline: bool = True, seed: int = 0) -> BaselineFit:
    """
    Pooled least squares of Y on [X, spline features of Z]

    Args:
        domains: all domains, target included, sharing d and q
        knot_grid: candidate interior knot counts per coordinate
        validation: rows scoring each knot count (normally target validation);
            when omitted 30% of the pooled rows are held out
        opts: solver options
        use_spline: False fits [X, 1] only
        seed: holdout seed when validation is omitted

    Returns:
        BaselineFit whose aux records the chosen knot count and validation MSEs

    Raises:
        SingularSystem: the pooled design is singular
    """
    stacked = stack_datasets(list(domains), "pooled")

    if not use_spline:
        coef = least_squares(np.hstack([stacked.X, _intercept(stacked.Z)]), stacked.y, opts)
        beta = coef[:stacked.d]
        return BaselineFit("Pool", beta, linear_surface(beta, _intercept, coef[stacked.d:]),
                           aux={"knots": None})

    train = stacked
    if validation is None:
        train, validation = holdout_split(stacked, 0.30, derive_seed(seed, "pool-holdout"))

    lower, upper = support_from_data(np.vstack([train.Z, validation.Z]))
    scores: Dict[int, float] = {}
    best = None
    for n_knots in knot_grid:
        basis = SplineBasis.equally_spaced(train.q, n_knots, lower, upper)
        features = spline_features(basis, train.Z)
        if train.d + features.shape[1] >= train.n:
            logger.debug(f"Pool skips {n_knots} knot(s): {train.d + features.shape[1]} columns for {train.n} rows")
            continue
        coef = least_squares(np.hstack([train.X, features]), train.y, opts)
        beta, gamma = coef[:train.d], coef[train.d:]
        resid = validation.y - validation.X @ beta - spline_features(basis, validation.Z) @ gamma
        mse = float(np.mean(resid ** 2))
        scores[int(n_knots)] = mse
        if best is None or mse < best[0]:
            best = (mse, int(n_knots), basis, beta, gamma)

    if best is None:
        raise InsufficientData(f"Pool: {train.n} pooled rows cannot support any knot count in {list(knot_grid)}")
    mse, n_knots, basis, beta, gamma = best
    logger.debug(f"Pool selected {n_knots} knot(s), validation MSE {mse:.6f}")
    return BaselineFit(
        method="Pool",
        beta0=beta,
        surface=linear_surface(beta, lambda Z: spline_features(basis, Z), gamma),
        aux={"knots": n_knots, "validation_mse": {str(k): v for k, v in scores.items()}},
    )


class PooledRegression(TransferMethod):
    label = "Pool"

    def fit(self, task: TransferTask) -> BaselineFit:
        return fit_pool(all_domains(task), self.config.knot_grid, task.target_validation,
                        self.config.solve, self.config.use_spline, self.config.train_for(task.seed).seed)

"""
Representation transfer: learn R on the sources, fit the target with R fixed
"""

import logging

from ..errors import NumericError
from ..estimator import fit_sources, fit_target, predict
from ..inference import estimate_covariance, estimate_mu
from .base import BaselineFit, TransferMethod, TransferTask

logger = logging.getLogger(__name__)


class RepresentationTransfer(TransferMethod):
    """Two-step RTL estimator with sandwich standard errors"""

    label = "RTL"

    def fit(self, task: TransferTask) -> BaselineFit:
        cfg = self.config
        source_fit = fit_sources(task.sources, cfg.network_for(task.target.q, task.seed),
                                 cfg.train_for(task.seed), task.source_validation)
        target_fit = fit_target(task.target, source_fit.rep, cfg.solve)

        inference = None
        try:
            mu_hat = estimate_mu(task.target.X, target_fit.rep_values, cfg.solve)
            inference = estimate_covariance(target_fit, mu_hat, task.target.X, cfg.solve)
        except NumericError as e:
            logger.warning(f"{task.target.domain_id}: standard errors unavailable: {e}")

        rep, beta0, gamma0 = source_fit.rep, target_fit.beta0, target_fit.gamma0
        return BaselineFit(
            method=self.label,
            beta0=beta0,
            surface=lambda X, Z: predict(rep, beta0, gamma0, X, Z),
            aux={
                "gamma0": gamma0.tolist(),
                "best_epoch": source_fit.best_epoch,
                "stopped_epoch": source_fit.stopped_epoch,
                "best_val_loss": source_fit.best_val_loss,
            },
            inference=inference,
        )

"""
Single-task learning: the representation network trained on the target alone
"""

from typing import Optional

from ..dataset import Dataset
from ..estimator import TrainConfig, fit_sources, predict
from ..repnet import NetworkConfig
from .base import BaselineFit, TransferMethod, TransferTask


def fit_stl(target: Dataset, net_cfg: NetworkConfig, train_cfg: TrainConfig,
            validation: Optional[Dataset] = None) -> BaselineFit:
    """
    Run the source trainer with the target as its only domain

    Args:
        target: target rows used for training
        net_cfg: network architecture
        train_cfg: training protocol
        validation: early-stopping rows; a holdout of the target when omitted

    Raises:
        InsufficientData: too few target rows after the validation split
    """
    source_fit = fit_sources([target], net_cfg, train_cfg,
                             None if validation is None else [validation])
    rep, beta0, gamma0 = source_fit.rep, source_fit.betas[0], source_fit.gammas[0]
    return BaselineFit(
        method="STL",
        beta0=beta0,
        surface=lambda X, Z: predict(rep, beta0, gamma0, X, Z),
        aux={"gamma0": gamma0.tolist(), "best_epoch": source_fit.best_epoch,
             "stopped_epoch": source_fit.stopped_epoch},
    )


class SingleTaskLearning(TransferMethod):
    label = "STL"

    def fit(self, task: TransferTask) -> BaselineFit:
        return fit_stl(task.target, self.config.network_for(task.target.q, task.seed),
                       self.config.train_for(task.seed), task.target_validation)

"""
Oracle: target least squares on the true representation (simulation only)
"""

from ..dataset import Dataset
from ..errors import ConfigError
from ..estimator import fit_target_values
from ..numeric import SolveOptions
from ..simgen import SimulationDesign, true_representation
from .base import BaselineFit, TransferMethod, TransferTask


def fit_oracle(target: Dataset, design: SimulationDesign, opts: SolveOptions = SolveOptions()) -> BaselineFit:
    """Least squares of Y0 on [X0, R*(Z0)]"""
    target_fit = fit_target_values(target, true_representation(design, target.Z), opts)
    beta0, gamma0 = target_fit.beta0, target_fit.gamma0
    return BaselineFit(
        method="Oracle",
        beta0=beta0,
        surface=lambda X, Z: X @ beta0 + true_representation(design, Z) @ gamma0,
        aux={"gamma0": gamma0.tolist()},
    )


class OracleMethod(TransferMethod):
    label = "Oracle"

    def fit(self, task: TransferTask) -> BaselineFit:
        if task.design is None:
            raise ConfigError("Oracle needs the simulation design; it cannot run on observed data")
        return fit_oracle(task.target, task.design, self.config.solve)

"""
Two-step representation transfer estimator

Step 1 trains the shared representation jointly on the source domains, with
domain-specific linear coefficients refreshed in closed form after every
network update. Step 2 holds the representation fixed and fits the target's
coefficients by least squares.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .dataio import holdout_split
from .dataset import Dataset
from .errors import (ConfigError, DimensionMismatch, InsufficientData, RankDeficient,
                     SingularSystem)
from .numeric import SolveOptions, least_squares, numerical_rank, solve_spd
from .repnet import (NetworkConfig, NetworkParams, forward, init_params,
                     loss_and_gradients, sgd_step)
from .seeding import derive_seed

logger = logging.getLogger(__name__)

# Matches configs/train.json
DEFAULT_LR = 0.05


@dataclass(frozen=True)
class TrainConfig:
    """Source-training protocol: SGD on theta, closed-form linear refresh, early stopping"""
    epochs: int = 400
    lr: float = DEFAULT_LR
    val_fraction: float = 0.30
    patience: int = 50
    ridge: SolveOptions = field(default_factory=SolveOptions)
    seed: int = 0
    # clip parameters to the network's param_bound after each step
    clamp_params: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"TrainConfig.epochs must be >= 1, got {self.epochs}")
        if not self.lr > 0:
            raise ConfigError(f"TrainConfig.lr must be > 0, got {self.lr}")
        if not 0 < self.val_fraction < 1:
            raise ConfigError(f"TrainConfig.val_fraction must be in (0, 1), got {self.val_fraction}")
        if self.patience < 1:
            raise ConfigError(f"TrainConfig.patience must be >= 1, got {self.patience}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        data = dict(data or {})
        unknown = set(data) - {"epochs", "lr", "val_fraction", "patience", "ridge", "seed", "clamp_params"}
        if unknown:
            raise ConfigError(f"TrainConfig has unknown keys: {sorted(unknown)}")
        ridge = data.get("ridge", {})
        if not isinstance(ridge, dict):
            ridge = {"ridge": ridge}
        return cls(
            epochs=int(data.get("epochs", 400)),
            lr=float(data.get("lr", DEFAULT_LR)),
            val_fraction=float(data.get("val_fraction", 0.30)),
            patience=int(data.get("patience", 50)),
            ridge=SolveOptions.from_dict(ridge),
            seed=int(data.get("seed", 0)),
            clamp_params=bool(data.get("clamp_params", False)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epochs": self.epochs,
            "lr": self.lr,
            "val_fraction": self.val_fraction,
            "patience": self.patience,
            "ridge": self.ridge.to_dict(),
            "seed": self.seed,
            "clamp_params": self.clamp_params,
        }


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass(frozen=True)
class SourceFit:
    """Best-by-validation representation and per-source coefficients"""
    rep: NetworkParams
    betas: Tuple[np.ndarray, ...]
    gammas: Tuple[np.ndarray, ...]
    train_history: Tuple[EpochRecord, ...]
    stopped_epoch: int
    best_epoch: int

    @property
    def best_val_loss(self) -> float:
        return self.train_history[self.best_epoch - 1].val_loss

    def to_dict(self, rep_ref: str) -> Dict[str, Any]:
        """Serialize with the network stored separately under rep_ref"""
        return {
            "rep": rep_ref,
            "betas": [b.tolist() for b in self.betas],
            "gammas": [g.tolist() for g in self.gammas],
            "history": [
                {"epoch": r.epoch, "train_loss": r.train_loss, "val_loss": r.val_loss}
                for r in self.train_history
            ],
            "stopped_epoch": self.stopped_epoch,
            "best_epoch": self.best_epoch,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], rep: NetworkParams) -> "SourceFit":
        return cls(
            rep=rep,
            betas=tuple(np.asarray(b, dtype=np.float64) for b in data["betas"]),
            gammas=tuple(np.asarray(g, dtype=np.float64) for g in data["gammas"]),
            train_history=tuple(
                EpochRecord(int(r["epoch"]), float(r["train_loss"]), float(r["val_loss"]))
                for r in data["history"]
            ),
            stopped_epoch=int(data["stopped_epoch"]),
            best_epoch=int(data["best_epoch"]),
        )


@dataclass(frozen=True)
class TargetFit:
    """Target coefficients with R-hat held fixed"""
    beta0: np.ndarray
    gamma0: np.ndarray
    residuals: np.ndarray
    rep_values: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta0": self.beta0.tolist(),
            "gamma0": self.gamma0.tolist(),
            "residuals": self.residuals.tolist(),
            "rep_values": self.rep_values.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TargetFit":
        residuals = np.asarray(data["residuals"], dtype=np.float64)
        return cls(
            beta0=np.asarray(data["beta0"], dtype=np.float64),
            gamma0=np.asarray(data["gamma0"], dtype=np.float64),
            residuals=residuals,
            rep_values=np.asarray(data["rep_values"], dtype=np.float64).reshape(residuals.shape[0], -1),
        )


class Alignment(NamedTuple):
    Lambda: np.ndarray
    aligned: np.ndarray
    rel_error: float


def solve_domain_linear(data: Dataset, rep_values: np.ndarray,
                        opts: SolveOptions = SolveOptions()) -> Tuple[np.ndarray, np.ndarray]:
    """Least squares of Y on [X, R(Z)]; returns (beta, gamma)"""
    rep_values = np.asarray(rep_values, dtype=np.float64)
    if rep_values.ndim != 2 or rep_values.shape[0] != data.n:
        raise DimensionMismatch(
            f"{data.domain_id}: rep values shape {rep_values.shape} does not match n={data.n}"
        )
    design = np.hstack([data.X, rep_values])
    try:
        coef = least_squares(design, data.y, opts)
    except SingularSystem as e:
        raise SingularSystem(f"{data.domain_id}: {e}") from e
    return coef[:data.d], coef[data.d:]


def _domain_mse(data: Dataset, rep_values: np.ndarray, beta: np.ndarray, gamma: np.ndarray) -> float:
    resid = data.y - data.X @ beta - rep_values @ gamma
    return float(np.mean(resid ** 2))


def _check_sources(sources: Sequence[Dataset], net_cfg: NetworkConfig):
    if len(sources) < 1:
        raise InsufficientData("fit_sources needs at least one source domain")
    d, q = sources[0].d, sources[0].q
    for ds in sources:
        if ds.d != d or ds.q != q:
            raise DimensionMismatch(f"{ds.domain_id}: (d, q)=({ds.d}, {ds.q}) differs from ({d}, {q})")
    if q != net_cfg.input_dim:
        raise DimensionMismatch(f"sources have q={q} but the network expects {net_cfg.input_dim}")


def fit_sources(sources: Sequence[Dataset], net_cfg: NetworkConfig, train_cfg: TrainConfig,
                validation: Optional[Sequence[Dataset]] = None) -> SourceFit:
    """
    Jointly learn the shared representation and per-source coefficients

    Each epoch takes one full-batch SGD step on theta with the coefficients held
    fixed, then refreshes every (beta_k, gamma_k) by least squares on the
    training rows. The parameters with the lowest validation loss are kept.

    Args:
        sources: K source domains sharing d and q
        net_cfg: representation network architecture (input_dim must equal q)
        train_cfg: epochs, learning rate, early stopping and ridge settings
        validation: held-out rows per source; when omitted each source is split
            with train_cfg.val_fraction of its rows held out

    Returns:
        SourceFit holding the best-by-validation snapshot

    Raises:
        InsufficientData: a source has fewer than d + p + 2 training rows
        SingularSystem: a domain's linear refresh failed
    """
    _check_sources(sources, net_cfg)
    if validation is None:
        pairs = [holdout_split(ds, train_cfg.val_fraction, derive_seed(train_cfg.seed, "holdout", k))
                 for k, ds in enumerate(sources)]
        train = [t for t, _ in pairs]
        validation = [v for _, v in pairs]
    else:
        train = list(sources)
        validation = list(validation)
        if len(validation) != len(train):
            raise DimensionMismatch(f"{len(validation)} validation sets for {len(train)} sources")

    d, p = train[0].d, net_cfg.output_dim
    for ds, val in zip(train, validation):
        if ds.n < d + p + 2:
            raise InsufficientData(
                f"{ds.domain_id}: {ds.n} training rows, need at least d + p + 2 = {d + p + 2}"
            )
        if val.n < 1:
            raise InsufficientData(f"{ds.domain_id}: validation set is empty")

    clamp = None
    if train_cfg.clamp_params:
        if net_cfg.param_bound is None:
            raise ConfigError("clamp_params requires NetworkConfig.param_bound")
        clamp = net_cfg.param_bound

    K = len(train)
    opts = train_cfg.ridge
    params = init_params(net_cfg)

    def refresh(current: NetworkParams):
        betas, gammas, train_loss = [], [], 0.0
        for ds in train:
            rep_values = forward(current, ds.Z)
            beta, gamma = solve_domain_linear(ds, rep_values, opts)
            betas.append(beta)
            gammas.append(gamma)
            train_loss += _domain_mse(ds, rep_values, beta, gamma) / K
        return betas, gammas, train_loss

    def validation_loss(current: NetworkParams, betas, gammas) -> float:
        return sum(_domain_mse(val, forward(current, val.Z), b, g)
                   for val, b, g in zip(validation, betas, gammas)) / K

    betas, gammas, _ = refresh(params)
    history: List[EpochRecord] = []
    best = None
    stale = 0
    epoch = 0

    logger.info(f"Training representation on {K} source(s): "
                f"{[ds.n for ds in train]} rows, depth={net_cfg.depth}, width={net_cfg.width}, p={p}")

    for epoch in range(1, train_cfg.epochs + 1):
        batches = [(ds.Z, ds.y - ds.X @ b, g) for ds, b, g in zip(train, betas, gammas)]
        grads = loss_and_gradients(params, batches)
        params = sgd_step(params, grads, train_cfg.lr, clamp)
        betas, gammas, train_loss = refresh(params)
        val_loss = validation_loss(params, betas, gammas)
        history.append(EpochRecord(epoch, train_loss, val_loss))

        if best is None or val_loss < best[0]:
            best = (val_loss, epoch, params, tuple(betas), tuple(gammas))
            stale = 0
        else:
            stale += 1

        if epoch % 50 == 0:
            logger.debug(f"epoch {epoch}: train={train_loss:.6f} val={val_loss:.6f}")

        if stale >= train_cfg.patience:
            logger.info(f"Early stopping at epoch {epoch} (best epoch {best[1]}, val={best[0]:.6f})")
            break

    _, best_epoch, best_params, best_betas, best_gammas = best
    return SourceFit(best_params, best_betas, best_gammas, tuple(history), epoch, best_epoch)


def fit_target_values(target: Dataset, rep_values: np.ndarray,
                      opts: SolveOptions = SolveOptions()) -> TargetFit:
    """Target least squares given representation values on the target rows"""
    rep_values = np.asarray(rep_values, dtype=np.float64)
    p = rep_values.shape[1] if rep_values.ndim == 2 else 0
    if target.n < target.d + p:
        raise InsufficientData(
            f"{target.domain_id}: n0={target.n} is below d + p = {target.d + p}"
        )
    beta0, gamma0 = solve_domain_linear(target, rep_values, opts)
    residuals = target.y - target.X @ beta0 - rep_values @ gamma0
    return TargetFit(beta0, gamma0, residuals, rep_values)


def fit_target(target: Dataset, rep: NetworkParams, opts: SolveOptions = SolveOptions()) -> TargetFit:
    """Evaluate the fixed representation on target Z and solve for (beta0, gamma0)"""
    if target.q != rep.config.input_dim:
        raise DimensionMismatch(
            f"{target.domain_id}: q={target.q} does not match representation input {rep.config.input_dim}"
        )
    return fit_target_values(target, forward(rep, target.Z), opts)


def predict(rep: NetworkParams, beta: np.ndarray, gamma: np.ndarray, X, Z) -> np.ndarray:
    """mu-hat(X, Z) = X beta + R-hat(Z) gamma"""
    return np.asarray(X, dtype=np.float64) @ beta + forward(rep, Z) @ gamma


def align_representation(learned, truth, opts: SolveOptions = SolveOptions()) -> Alignment:
    """
    Best linear map from a learned representation onto the true one

    Lambda minimizes sum_i ||Lambda r_hat_i - r_i||^2 over the supplied grid.

    Raises:
        RankDeficient: learned values do not have full column rank
    """
    learned = np.asarray(learned, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if learned.shape != truth.shape:
        raise DimensionMismatch(f"learned {learned.shape} and truth {truth.shape} differ")
    m, p = learned.shape
    if m < p:
        raise RankDeficient(f"alignment grid has {m} points for p={p}")
    rank, _ = numerical_rank(learned)
    if rank < p:
        raise RankDeficient(f"learned representation has rank {rank} < p={p} on the grid")

    Lambda = solve_spd(learned.T @ learned, learned.T @ truth, opts).T
    aligned = learned @ Lambda.T
    denom = np.linalg.norm(truth)
    rel_error = float(np.linalg.norm(aligned - truth) / denom) if denom > 0 else float(np.linalg.norm(aligned))
    return Alignment(Lambda, aligned, rel_error)


def component_errors(aligned: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Relative L2 error of each aligned column against its true column"""
    num = np.linalg.norm(aligned - truth, axis=0)
    den = np.linalg.norm(truth, axis=0)
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), num)

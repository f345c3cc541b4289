"""
Base Transfer Method Abstract Class
Common interface for the estimators compared in a benchmark
"""

import logging
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from ..dataset import Dataset
from ..errors import ConfigError, DimensionMismatch
from ..estimator import TrainConfig
from ..inference import TargetInference
from ..numeric import SolveOptions
from ..repnet import NetworkConfig
from ..simgen import SimulationDesign

logger = logging.getLogger(__name__)

DEFAULT_KNOT_GRID = tuple(range(9))

Surface = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class MethodConfig:
    """Configuration shared by every transfer method"""
    name: str
    # NetworkConfig fields other than input/output dims
    network: Dict[str, Any] = field(default_factory=dict)
    r_working: int = 5
    train: TrainConfig = field(default_factory=TrainConfig)
    solve: SolveOptions = field(default_factory=SolveOptions)

    # Spline comparators
    knot_grid: Tuple[int, ...] = DEFAULT_KNOT_GRID
    use_spline: bool = True

    def __post_init__(self):
        if self.r_working < 1:
            raise ConfigError(f"{self.name}: r_working must be >= 1, got {self.r_working}")
        self.knot_grid = tuple(int(k) for k in self.knot_grid)
        if not self.knot_grid or min(self.knot_grid) < 0:
            raise ConfigError(f"{self.name}: knot_grid must be a nonempty list of counts >= 0")

    def network_for(self, q: int, seed: Optional[int] = None) -> NetworkConfig:
        """Network mapping q confounders to r_working features; seed overrides the template seed"""
        template = dict(self.network)
        if seed is not None:
            template["seed"] = seed
        return NetworkConfig.from_dict(template, input_dim=q, output_dim=self.r_working)

    def train_for(self, seed: Optional[int] = None) -> TrainConfig:
        return self.train if seed is None else replace(self.train, seed=seed)

    @classmethod
    def from_dict(cls, name: str, data: Dict[str, Any]) -> "MethodConfig":
        data = dict(data or {})
        unknown = set(data) - {"network", "r_working", "train", "solve", "knot_grid", "use_spline"}
        if unknown:
            raise ConfigError(f"{name}: unknown method settings {sorted(unknown)}")
        return cls(
            name=name,
            network=dict(data.get("network", {})),
            r_working=int(data.get("r_working", 5)),
            train=TrainConfig.from_dict(data.get("train", {})),
            solve=SolveOptions.from_dict(data.get("solve", {})),
            knot_grid=tuple(data.get("knot_grid", DEFAULT_KNOT_GRID)),
            use_spline=bool(data.get("use_spline", True)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "network": dict(self.network),
            "r_working": self.r_working,
            "train": self.train.to_dict(),
            "solve": self.solve.to_dict(),
            "knot_grid": list(self.knot_grid),
            "use_spline": self.use_spline,
        }


@dataclass(frozen=True)
class TransferTask:
    """Everything a method may look at for one fit"""
    sources: Tuple[Dataset, ...]
    target: Dataset
    source_validation: Optional[Tuple[Dataset, ...]] = None
    target_validation: Optional[Dataset] = None
    # only available for simulated data
    design: Optional[SimulationDesign] = None
    # per-fit seed for network initialization and holdout splits
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if self.source_validation is not None:
            object.__setattr__(self, "source_validation", tuple(self.source_validation))
            if len(self.source_validation) != len(self.sources):
                raise DimensionMismatch(
                    f"{len(self.source_validation)} validation sets for {len(self.sources)} sources"
                )
        for ds in self.sources:
            if ds.d != self.target.d or ds.q != self.target.q:
                raise DimensionMismatch(
                    f"{ds.domain_id}: (d, q)=({ds.d}, {ds.q}) differs from target ({self.target.d}, {self.target.q})"
                )


@dataclass(frozen=True)
class BaselineFit:
    """Target estimate and prediction surface produced by one method"""
    method: str
    beta0: np.ndarray
    surface: Surface
    aux: Dict[str, Any] = field(default_factory=dict)
    inference: Optional[TargetInference] = None
    runtime: float = 0.0

    def predict(self, X, Z) -> np.ndarray:
        return np.asarray(self.surface(np.asarray(X, dtype=np.float64), np.asarray(Z, dtype=np.float64)))

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "method": self.method,
            "beta0": self.beta0.tolist(),
            "runtime": self.runtime,
            "aux": self.aux,
        }
        if self.inference is not None:
            data["se"] = self.inference.se.tolist()
        return data


class TransferMethod(ABC):
    """Abstract base class for transfer methods"""

    label = ""

    def __init__(self, config: MethodConfig):
        self.config = config
        self.fit_count = 0
        self.failure_count = 0
        self.total_runtime = 0.0
        # one instance serves every replication worker
        self.stats_lock = threading.Lock()

    @abstractmethod
    def fit(self, task: TransferTask) -> BaselineFit:
        """
        Estimate the target coefficients

        Args:
            task: source and target data for one replication

        Returns:
            BaselineFit for the target domain
        """
        pass

    def run(self, task: TransferTask) -> BaselineFit:
        """Fit and record runtime and outcome"""
        start = time.perf_counter()
        try:
            result = self.fit(task)
        except Exception:
            with self.stats_lock:
                self.failure_count += 1
            raise
        elapsed = time.perf_counter() - start
        with self.stats_lock:
            self.fit_count += 1
            self.total_runtime += elapsed
        logger.debug(f"{self.label} fit in {elapsed:.3f}s")
        return replace(result, runtime=elapsed)

    def get_stats(self) -> Dict[str, Any]:
        with self.stats_lock:
            return {
                "method": self.label,
                "fits": self.fit_count,
                "failures": self.failure_count,
                "total_runtime": round(self.total_runtime, 3),
            }


def linear_surface(beta: np.ndarray, features: Callable[[np.ndarray], np.ndarray],
                   gamma: np.ndarray) -> Surface:
    """X beta + features(Z) gamma"""
    def surface(X, Z):
        return X @ beta + features(Z) @ gamma
    return surface


def all_domains(task: TransferTask) -> Sequence[Dataset]:
    """Target first, then the sources"""
    return (task.target,) + task.sources

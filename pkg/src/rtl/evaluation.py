"""
Replication harness and study runners

Scenarios describe a simulation design plus sample sizes and method settings.
Replications run in a worker pool; reports are assembled in replication order
so the same scenario seed always yields the same tables.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.linalg import LinAlgError
from scipy import stats

from .baselines import MethodConfig, TransferMethod, TransferTask, create_methods
from .baselines.factory import PLACEHOLDERS, canonical_name
from .baselines.representation import RepresentationTransfer
from .config import default_workers
from .dataio import SplitSpec, atomic_write_csv, atomic_write_text, split_dataset
from .dataset import Dataset
from .errors import ConfigError, DimensionMismatch, InsufficientData, RTLError
from .estimator import TrainConfig
from .inference import linear_combination_inference
from .seeding import derive_rng, derive_seed
from .simgen import (CoefficientSet, DesignFamily, Regime, SimulationDesign, generate_domain,
                     make_coefficients, make_design, sample_covariates, true_regression)

logger = logging.getLogger(__name__)

DEFAULT_METHODS = ("RTL", "STL", "Pool", "Meta", "Oracle")
FIT_ERRORS = (RTLError, LinAlgError)


@dataclass(frozen=True)
class Scenario:
    """One simulation setting: design, sample sizes, methods and seeds"""
    family: DesignFamily = DesignFamily.ADDITIVE
    regime: Regime = Regime.HOMOGENEOUS
    d: int = 5
    q: int = 10
    r_true: int = 5
    noise_sd: float = 0.3
    K: int = 6
    n_k: int = 400
    n0: int = 50
    # fresh target validation draw used by STL early stopping and knot selection
    n0_val: int = 25
    n_test: int = 2000
    r_working: int = 5
    net: Dict[str, Any] = field(default_factory=lambda: {"depth": 2, "width": 32})
    train: TrainConfig = field(default_factory=TrainConfig)
    knot_grid: Tuple[int, ...] = tuple(range(9))
    replications: int = 20
    methods: Tuple[str, ...] = DEFAULT_METHODS
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "family", DesignFamily.parse(self.family))
        object.__setattr__(self, "regime", Regime.parse(self.regime))
        object.__setattr__(self, "methods", tuple(canonical_name(m) for m in self.methods))
        object.__setattr__(self, "knot_grid", tuple(int(k) for k in self.knot_grid))
        if self.replications < 1:
            raise ConfigError(f"{self.name}: replications must be >= 1, got {self.replications}")
        if not self.methods:
            raise ConfigError(f"{self.name}: methods must not be empty")
        for key in ("K", "n_k", "n0", "n0_val", "n_test", "r_working"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{self.name}: {key} must be >= 1, got {getattr(self, key)}")

    @property
    def source_val_size(self) -> int:
        """Fresh validation rows per source, val_fraction of the training size"""
        return max(1, int(round(self.n_k * self.train.val_fraction)))

    def make_design(self) -> SimulationDesign:
        return make_design(self.family, self.d, self.q, self.r_true, self.seed, self.noise_sd)

    def method_configs(self) -> Dict[str, MethodConfig]:
        return {
            name: MethodConfig(name=name, network=dict(self.net), r_working=self.r_working,
                               train=self.train, solve=self.train.ridge, knot_grid=self.knot_grid)
            for name in self.methods if name not in PLACEHOLDERS
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Scenario":
        data = dict(data or {})
        known = {"family", "regime", "d", "q", "r_true", "noise_sd", "K", "n_k", "n0", "n0_val",
                 "n_test", "r_working", "net", "train", "knot_grid", "replications", "methods",
                 "seed", "name"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Scenario has unknown keys: {sorted(unknown)}")
        if "train" in data:
            data["train"] = TrainConfig.from_dict(data["train"])
        if "methods" in data:
            methods = data["methods"]
            data["methods"] = tuple(methods.split(",") if isinstance(methods, str) else methods)
        if "knot_grid" in data:
            data["knot_grid"] = tuple(data["knot_grid"])
        for key in ("d", "q", "r_true", "K", "n_k", "n0", "n0_val", "n_test", "r_working",
                    "replications", "seed"):
            if key in data:
                data[key] = int(data[key])
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Scenario: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "family": self.family.value,
            "regime": self.regime.value,
            "d": self.d,
            "q": self.q,
            "r_true": self.r_true,
            "noise_sd": self.noise_sd,
            "K": self.K,
            "n_k": self.n_k,
            "n0": self.n0,
            "n0_val": self.n0_val,
            "n_test": self.n_test,
            "r_working": self.r_working,
            "net": dict(self.net),
            "train": self.train.to_dict(),
            "knot_grid": list(self.knot_grid),
            "replications": self.replications,
            "methods": list(self.methods),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Replication:
    """Data for one replication plus the noiseless test truth"""
    index: int
    task: TransferTask
    coefficients: CoefficientSet
    X_test: np.ndarray
    Z_test: np.ndarray
    mu_test: np.ndarray


@dataclass(frozen=True)
class BenchmarkRow:
    replication: int
    method: str
    status: str
    mse0: float = float("nan")
    err_beta: float = float("nan")
    runtime: float = 0.0
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


ROW_COLUMNS = ["replication", "method", "status", "mse0", "err_beta", "runtime", "error"]


def _mean_sd(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    sd = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return float(np.mean(arr)), sd


@dataclass
class BenchmarkReport:
    scenario: Scenario
    rows: List[BenchmarkRow]
    method_stats: List[Dict[str, Any]] = field(default_factory=list)

    def ok_rows(self) -> List[BenchmarkRow]:
        return [r for r in self.rows if r.ok]

    def failed_rows(self) -> List[BenchmarkRow]:
        return [r for r in self.rows if not r.ok]

    def rows_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{c: getattr(r, c) for c in ROW_COLUMNS} for r in self.rows], columns=ROW_COLUMNS)

    def aggregates(self) -> Dict[str, Dict[str, Any]]:
        """Mean and SD per method over successful rows"""
        result = {}
        for method in self.scenario.methods:
            if method in PLACEHOLDERS:
                continue
            rows = [r for r in self.rows if r.method == method]
            ok = [r for r in rows if r.ok]
            mean_mse, sd_mse = _mean_sd([r.mse0 for r in ok])
            mean_err, sd_err = _mean_sd([r.err_beta for r in ok])
            result[method] = {
                "mean_mse0": mean_mse,
                "sd_mse0": sd_mse,
                "mean_err_beta": mean_err,
                "sd_err_beta": sd_err,
                "median_err_beta": float(np.median([r.err_beta for r in ok])) if ok else float("nan"),
                "n_ok": len(ok),
                "n_failed": len(rows) - len(ok),
            }
        return result

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario.to_dict(),
            "aggregates": self.aggregates(),
            "placeholders": {m: PLACEHOLDERS[m] for m in self.scenario.methods if m in PLACEHOLDERS},
            "rows": len(self.rows),
            "failed": len(self.failed_rows()),
        }

    def write(self, out_dir: Path) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        paths = {"rows": out_dir / "rows.csv", "aggregates": out_dir / "aggregates.json"}
        atomic_write_csv(paths["rows"], self.rows_frame())
        document = self.to_dict()
        document["method_stats"] = self.method_stats
        atomic_write_text(paths["aggregates"], json.dumps(document, indent=2))
        return paths


@dataclass
class NormalitySummary:
    """Spread of theta-hat = alpha'beta0-hat around the truth across replications"""
    theta: float
    level: float
    estimates: np.ndarray
    ses: np.ndarray
    covered: np.ndarray
    n_failed: int = 0
    bins: int = 20

    @property
    def n_ok(self) -> int:
        return int(self.estimates.size)

    @property
    def avg_bias(self) -> float:
        return float(np.mean(self.estimates - self.theta))

    @property
    def sd_of_estimates(self) -> float:
        return float(np.std(self.estimates, ddof=1)) if self.n_ok > 1 else 0.0

    @property
    def mean_se(self) -> float:
        return float(np.mean(self.ses))

    @property
    def sd_of_se(self) -> float:
        return float(np.std(self.ses, ddof=1)) if self.n_ok > 1 else 0.0

    @property
    def coverage(self) -> float:
        return float(np.mean(self.covered))

    def histogram(self) -> pd.DataFrame:
        """Bins of theta-hat - theta with expected counts under N(avg_bias, SD^2)"""
        errors = self.estimates - self.theta
        counts, edges = np.histogram(errors, bins=self.bins)
        sd = self.sd_of_estimates
        if sd > 0:
            cdf = stats.norm.cdf(edges, loc=self.avg_bias, scale=sd)
            expected = self.n_ok * np.diff(cdf)
        else:
            expected = counts.astype(np.float64)
        return pd.DataFrame({
            "lower": edges[:-1],
            "upper": edges[1:],
            "count": counts,
            "expected": expected,
        })

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta": self.theta,
            "level": self.level,
            "avg_bias": self.avg_bias,
            "sd_of_estimates": self.sd_of_estimates,
            "mean_se": self.mean_se,
            "sd_of_se": self.sd_of_se,
            "coverage": self.coverage,
            "n_ok": self.n_ok,
            "n_failed": self.n_failed,
        }

    def write(self, out_dir: Path, scenario: Optional[Scenario] = None) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        paths = {
            "summary": out_dir / "coverage.json",
            "histogram": out_dir / "histogram.csv",
            "estimates": out_dir / "estimates.csv",
        }
        document = self.to_dict()
        if scenario is not None:
            document["scenario"] = scenario.to_dict()
        atomic_write_text(paths["summary"], json.dumps(document, indent=2))
        atomic_write_csv(paths["histogram"], self.histogram())
        atomic_write_csv(paths["estimates"], pd.DataFrame({
            "estimate": self.estimates, "se": self.ses, "covered": self.covered.astype(int),
        }))
        return paths


def prediction_mse(surface: Callable[[np.ndarray, np.ndarray], np.ndarray], truth, X, Z) -> float:
    """Mean squared gap between a fitted surface and the noiseless mean on test points"""
    truth = np.asarray(truth, dtype=np.float64)
    if truth.size < 1:
        raise InsufficientData("prediction_mse needs at least one test point")
    predicted = np.asarray(surface(np.asarray(X, dtype=np.float64), np.asarray(Z, dtype=np.float64)))
    if predicted.shape != truth.shape:
        raise DimensionMismatch(f"predictions {predicted.shape} and truth {truth.shape} differ")
    return float(np.mean((predicted - truth) ** 2))


def estimation_error(beta_hat, beta_true) -> float:
    """Euclidean distance between estimated and true coefficients"""
    beta_hat = np.asarray(beta_hat, dtype=np.float64).reshape(-1)
    beta_true = np.asarray(beta_true, dtype=np.float64).reshape(-1)
    if beta_hat.shape != beta_true.shape:
        raise DimensionMismatch(f"beta_hat has {beta_hat.size} entries, beta_true {beta_true.size}")
    return float(np.linalg.norm(beta_hat - beta_true))


def simulate_replication(scenario: Scenario, design: SimulationDesign, index: int,
                         fixed_target: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Replication:
    """
    Draw every dataset of one replication from its own sub-stream

    Args:
        scenario: sample sizes and master seed
        design: simulation design shared by all replications
        index: replication number
        fixed_target: (beta0, gamma0) replacing the drawn target coefficients

    Returns:
        Replication with training, validation and test data
    """
    rep_seed = derive_seed(scenario.seed, "replication", index)
    coefs = make_coefficients(scenario.K, design.d, design.p, scenario.regime, rep_seed)
    if fixed_target is not None:
        coefs = coefs.with_target(*fixed_target)

    sources, source_val = [], []
    for k in range(scenario.K):
        beta, gamma = coefs.betas[k + 1], coefs.gammas[k + 1]
        sources.append(generate_domain(design, beta, gamma, scenario.n_k,
                                       derive_seed(rep_seed, "source", k), f"source{k + 1}"))
        source_val.append(generate_domain(design, beta, gamma, scenario.source_val_size,
                                          derive_seed(rep_seed, "source-val", k), f"source{k + 1}-val"))

    beta0, gamma0 = coefs.betas[0], coefs.gammas[0]
    target = generate_domain(design, beta0, gamma0, scenario.n0, derive_seed(rep_seed, "target"), "target")
    target_val = generate_domain(design, beta0, gamma0, scenario.n0_val,
                                 derive_seed(rep_seed, "target-val"), "target-val")
    X_test, Z_test = sample_covariates(design, scenario.n_test, derive_rng(rep_seed, "test"))
    mu_test = true_regression(design, beta0, gamma0, X_test, Z_test)

    task = TransferTask(tuple(sources), target, tuple(source_val), target_val, design,
                        seed=derive_seed(rep_seed, "methods"))
    return Replication(index, task, coefs, X_test, Z_test, mu_test)


def evaluate_method(method: TransferMethod, replication: Replication) -> BenchmarkRow:
    """Fit one method on one replication; fit errors become a failed row"""
    try:
        fit = method.run(replication.task)
        return BenchmarkRow(
            replication=replication.index,
            method=method.label,
            status="ok",
            mse0=prediction_mse(fit.predict, replication.mu_test, replication.X_test, replication.Z_test),
            err_beta=estimation_error(fit.beta0, replication.coefficients.betas[0]),
            runtime=fit.runtime,
        )
    except FIT_ERRORS as e:
        logger.error(f"Replication {replication.index}, {method.label}: {type(e).__name__}: {e}")
        return BenchmarkRow(replication.index, method.label, "failed", error=f"{type(e).__name__}: {e}")


def _run_pool(count: int, work: Callable[[int], Any], workers: Optional[int], label: str) -> Dict[int, Any]:
    """Run work(i) for i in 0..count-1 on a thread pool; results keyed by index"""
    workers = workers or default_workers()
    results: Dict[int, Any] = {}
    logger.info(f"Starting {count} {label} replication(s) with {workers} worker(s)...")

    def task(i: int):
        logger.info(f"[{i + 1}/{count}] {label} replication {i}")
        return work(i)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_index = {executor.submit(task, i): i for i in range(count)}
        for future in as_completed(future_to_index):
            i = future_to_index[future]
            try:
                results[i] = future.result()
                logger.info(f"✓ Completed: replication {i}")
            except FIT_ERRORS as e:
                logger.warning(f"✗ Failed: replication {i}: {e}")
                results[i] = e
    return results


def run_benchmark(scenario: Scenario, workers: Optional[int] = None) -> BenchmarkReport:
    """
    Run every requested method on every replication of a scenario

    Args:
        scenario: simulation setting
        workers: thread-pool size (RTL_WORKERS or logical cores by default)

    Returns:
        BenchmarkReport with one row per (replication, method), failed rows included
    """
    design = scenario.make_design()
    methods = create_methods(scenario.methods, scenario.method_configs())

    def work(i: int) -> List[BenchmarkRow]:
        replication = simulate_replication(scenario, design, i)
        return [evaluate_method(m, replication) for m in methods]

    results = _run_pool(scenario.replications, work, workers, scenario.name)
    rows: List[BenchmarkRow] = []
    for i in range(scenario.replications):
        outcome = results[i]
        if isinstance(outcome, Exception):
            rows.extend(BenchmarkRow(i, m.label, "failed", error=f"{type(outcome).__name__}: {outcome}")
                        for m in methods)
        else:
            rows.extend(outcome)

    report = BenchmarkReport(scenario, rows, [m.get_stats() for m in methods])
    logger.info(f"Benchmark {scenario.name}: {len(report.ok_rows())}/{len(rows)} rows ok")
    return report


def coverage_study(scenario: Scenario, alpha=None, level: float = 0.95, bins: int = 20,
                   workers: Optional[int] = None) -> NormalitySummary:
    """
    Interval coverage of alpha'beta0 with beta0 = gamma0 = 1

    Only the RTL method is fitted. alpha defaults to the unit vector (1,...,1)/sqrt(d).

    Raises:
        ConfigError: the design family is not Additive, AdditiveFactor or Deep
    """
    if scenario.family not in (DesignFamily.ADDITIVE, DesignFamily.ADDITIVE_FACTOR, DesignFamily.DEEP):
        raise ConfigError(f"coverage study does not support the {scenario.family.value} design")
    design = scenario.make_design()
    alpha = np.full(design.d, 1.0 / math.sqrt(design.d)) if alpha is None else np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (design.d,):
        raise DimensionMismatch(f"alpha has {alpha.size} entries, expected d={design.d}")
    beta0, gamma0 = np.ones(design.d), np.ones(design.p)
    theta = float(alpha @ beta0)
    method = RepresentationTransfer(scenario.method_configs().get("RTL") or MethodConfig(
        name="RTL", network=dict(scenario.net), r_working=scenario.r_working,
        train=scenario.train, solve=scenario.train.ridge))

    def work(i: int):
        replication = simulate_replication(scenario, design, i, fixed_target=(beta0, gamma0))
        try:
            fit = method.run(replication.task)
            if fit.inference is None:
                raise InsufficientData("standard errors unavailable")
            return linear_combination_inference(fit.beta0, fit.inference.Sigma_hat, fit.inference.n0,
                                                alpha, level, "theta")
        except FIT_ERRORS as e:
            logger.error(f"Replication {i}: {type(e).__name__}: {e}")
            return None

    results = _run_pool(scenario.replications, work, workers, f"{scenario.name} coverage")
    intervals = [results[i] for i in range(scenario.replications)
                 if results[i] is not None and not isinstance(results[i], Exception)]
    if not intervals:
        raise InsufficientData("every coverage replication failed")
    summary = NormalitySummary(
        theta=theta,
        level=level,
        estimates=np.array([ci.estimate for ci in intervals]),
        ses=np.array([ci.se for ci in intervals]),
        covered=np.array([ci.covers(theta) for ci in intervals]),
        n_failed=scenario.replications - len(intervals),
        bins=bins,
    )
    logger.info(f"Coverage {scenario.name}: bias={summary.avg_bias:.4f} sd={summary.sd_of_estimates:.4f} "
                f"se={summary.mean_se:.4f} coverage={summary.coverage:.3f}")
    return summary


SWEEP_COLUMNS = ["n_k", "r_working", "method", "mean_mse0", "sd_mse0", "mean_err_beta", "sd_err_beta",
                 "n_ok", "n_failed"]


@dataclass
class SweepReport:
    scenario: Scenario
    table: pd.DataFrame

    def write(self, out_dir: Path) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        paths = {"table": out_dir / "sweep.csv", "scenario": out_dir / "sweep.json"}
        atomic_write_csv(paths["table"], self.table)
        atomic_write_text(paths["scenario"], json.dumps({"scenario": self.scenario.to_dict()}, indent=2))
        return paths


def run_sweep(scenario: Scenario, n_k_grid: Sequence[int], r_working_grid: Sequence[int],
              workers: Optional[int] = None) -> SweepReport:
    """run_benchmark over every (n_k, r_working) cell with the scenario's master seed"""
    if not n_k_grid or not r_working_grid:
        raise ConfigError("sweep grids must not be empty")
    records = []
    cells = [(int(n), int(r)) for n in n_k_grid for r in r_working_grid]
    for i, (n_k, r_working) in enumerate(cells, 1):
        logger.info(f"[{i}/{len(cells)}] Sweep cell n_k={n_k}, r_working={r_working}")
        cell = replace(scenario, n_k=n_k, r_working=r_working, name=f"{scenario.name}-n{n_k}-r{r_working}")
        for method, agg in run_benchmark(cell, workers).aggregates().items():
            records.append({"n_k": n_k, "r_working": r_working, "method": method,
                            **{k: agg[k] for k in SWEEP_COLUMNS[3:]}})
    return SweepReport(scenario, pd.DataFrame(records, columns=SWEEP_COLUMNS))


COMPARE_COLUMNS = ["method", "status", "test_mse", "runtime", "error"]


@dataclass
class ComparisonReport:
    rows: List[Dict[str, Any]]
    split_sizes: Dict[str, int]
    placeholders: Dict[str, str] = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=COMPARE_COLUMNS)

    def write(self, out_dir: Path) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        paths = {"table": out_dir / "comparison.csv", "summary": out_dir / "comparison.json"}
        atomic_write_csv(paths["table"], self.frame())
        atomic_write_text(paths["summary"], json.dumps({
            "split_sizes": self.split_sizes,
            "placeholders": self.placeholders,
            "test_mse": {r["method"]: r["test_mse"] for r in self.rows if r["status"] == "ok"},
        }, indent=2))
        return paths


def compare_on_data(sources: Sequence[Dataset], target: Dataset, split: SplitSpec,
                    methods: Sequence[str], configs: Dict[str, MethodConfig]) -> ComparisonReport:
    """
    Test-set prediction error of each method on observed data

    The target is split into train, validation and test rows; Oracle is
    skipped since no true representation exists.
    """
    train, val, test = split_dataset(target, split)
    task = TransferTask(tuple(sources), train, None, val, None, seed=split.seed)
    rows = []
    instances = create_methods(methods, configs, has_truth=False)
    for i, method in enumerate(instances, 1):
        logger.info(f"[{i}/{len(instances)}] Fitting {method.label}")
        try:
            fit = method.run(task)
            mse = float(np.mean((fit.predict(test.X, test.Z) - test.y) ** 2))
            rows.append({"method": method.label, "status": "ok", "test_mse": mse,
                         "runtime": fit.runtime, "error": ""})
            logger.info(f"✓ Completed: {method.label} (test MSE {mse:.6f})")
        except FIT_ERRORS as e:
            logger.warning(f"✗ Failed: {method.label}: {e}")
            rows.append({"method": method.label, "status": "failed", "test_mse": float("nan"),
                         "runtime": 0.0, "error": f"{type(e).__name__}: {e}"})
    placeholders = {}
    for m in methods:
        name = canonical_name(m)
        if name in PLACEHOLDERS:
            placeholders[name] = PLACEHOLDERS[name]
    return ComparisonReport(rows, {"train": train.n, "val": val.n, "test": test.n}, placeholders)

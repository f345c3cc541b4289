"""
CSV ingestion with column roles, seeded splits, and atomic file output
"""

import logging
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Sequence, Tuple

import numpy as np
import pandas as pd

from .dataset import Dataset
from .errors import (ConfigError, EmptyFile, InsufficientData, InvalidFractions,
                     MissingColumn, ParseError)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ColumnRoles:
    """Which CSV columns are the response, primary covariates and confounders"""
    y: str
    x: Tuple[str, ...]
    z: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(self.x))
        object.__setattr__(self, "z", tuple(self.z))
        if not self.y:
            raise ConfigError("ColumnRoles.y must name a column")
        if not self.x and not self.z:
            raise ConfigError("ColumnRoles needs at least one x or z column")
        names = [self.y, *self.x, *self.z]
        if len(set(names)) != len(names):
            raise ConfigError(f"ColumnRoles columns must be disjoint, got {names}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ColumnRoles":
        try:
            return cls(y=data["y"], x=tuple(data.get("x", ())), z=tuple(data.get("z", ())))
        except KeyError as e:
            raise ConfigError(f"ColumnRoles missing key {e}")

    def to_dict(self) -> Dict[str, Any]:
        return {"y": self.y, "x": list(self.x), "z": list(self.z)}


@dataclass(frozen=True)
class SplitSpec:
    """Train / validation / test fractions for a seeded random split"""
    train: float = 0.3
    val: float = 0.4
    test: float = 0.3
    seed: int = 0

    def __post_init__(self):
        fractions = (self.train, self.val, self.test)
        if any(not f > 0 for f in fractions):
            raise InvalidFractions(f"split fractions must be positive, got {fractions}")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise InvalidFractions(f"split fractions must sum to 1, got {sum(fractions)}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SplitSpec":
        return cls(
            train=float(data.get("train", 0.3)),
            val=float(data.get("val", 0.4)),
            test=float(data.get("test", 0.3)),
            seed=int(data.get("seed", 0)),
        )


def atomic_write_text(path: Path, text: str):
    """Write to a temp file beside path, then rename over it"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_csv(path: Path, frame: pd.DataFrame):
    atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g", lineterminator="\n"))


def save_csv(data: Dataset, path: Path):
    """Export a dataset with header y, x..., z..."""
    atomic_write_csv(path, data.to_frame())
    logger.debug(f"Wrote {data.n} rows of {data.domain_id} to {path}")


def load_csv(path: Path, roles: ColumnRoles, domain_id: str = None) -> Dataset:
    """
    Load one domain from a header-bearing CSV

    Args:
        path: CSV file
        roles: column roles; X and Z columns come out in the listed order
        domain_id: label for the domain (defaults to the file stem)

    Returns:
        Dataset

    Raises:
        EmptyFile: no header or no data rows
        MissingColumn: a role column is absent from the header
        ParseError: a role cell is not numeric
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyFile(f"{path}: file is empty")
    if frame.shape[0] == 0:
        raise EmptyFile(f"{path}: no data rows")

    columns = [roles.y, *roles.x, *roles.z]
    for column in columns:
        if column not in frame.columns:
            raise MissingColumn(column, str(path))

    numeric = {}
    for column in columns:
        raw = frame[column].str.strip()
        parsed = pd.to_numeric(raw, errors="coerce")
        bad = parsed.isna() | ~np.isfinite(parsed.to_numpy(dtype=float, na_value=np.nan))
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(row + 1, column, raw.iloc[row], str(path))
        numeric[column] = parsed.to_numpy(dtype=np.float64)

    n = frame.shape[0]
    X = np.column_stack([numeric[c] for c in roles.x]) if roles.x else np.zeros((n, 0))
    Z = np.column_stack([numeric[c] for c in roles.z]) if roles.z else np.zeros((n, 0))
    return Dataset(numeric[roles.y], X, Z, domain_id or path.stem,
                   roles.y, roles.x or None, roles.z or None)


def split_dataset(data: Dataset, fractions: SplitSpec) -> Tuple[Dataset, Dataset, Dataset]:
    """
    Seeded permutation, then contiguous train / validation / test blocks

    Train and test sizes are floored; the remainder goes to validation.
    """
    if data.n < 3:
        raise InsufficientData(f"{data.domain_id}: need at least 3 rows to split, got {data.n}")
    order = np.random.default_rng(fractions.seed).permutation(data.n)
    n_train = int(math.floor(data.n * fractions.train + 1e-9))
    n_test = int(math.floor(data.n * fractions.test + 1e-9))
    n_val = data.n - n_train - n_test
    train = data.subset(order[:n_train], f"{data.domain_id}-train")
    val = data.subset(order[n_train:n_train + n_val], f"{data.domain_id}-val")
    test = data.subset(order[n_train + n_val:], f"{data.domain_id}-test")
    logger.info(f"Split {data.domain_id}: train={train.n}, val={val.n}, test={test.n}")
    return train, val, test


def holdout_split(data: Dataset, fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Split off round(fraction * n) rows as a validation set"""
    order = np.random.default_rng(seed).permutation(data.n)
    n_val = int(round(fraction * data.n))
    return (data.subset(order[n_val:], f"{data.domain_id}"),
            data.subset(order[:n_val], f"{data.domain_id}-val"))


def parse_path_list(value: str) -> Sequence[Path]:
    return [Path(p.strip()) for p in value.split(",") if p.strip()]

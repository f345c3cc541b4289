"""
One domain's observations (Y, X, Z) with column-role metadata
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import DataError, DimensionMismatch


@dataclass(frozen=True)
class Dataset:
    """Y (n), X (n x d) primary covariates, Z (n x q) confounders"""
    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    domain_id: str = "domain"
    y_name: str = "y"
    x_names: Optional[Tuple[str, ...]] = None
    z_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        X = np.asarray(self.X, dtype=np.float64)
        Z = np.asarray(self.Z, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if Z.ndim == 1:
            Z = Z.reshape(-1, 1)
        if X.shape[0] != y.shape[0] or Z.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"{self.domain_id}: row counts disagree (y {y.shape[0]}, X {X.shape[0]}, Z {Z.shape[0]})"
            )
        for name, arr in (("y", y), ("X", X), ("Z", Z)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{self.domain_id}: {name} contains non-finite entries")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        x_names = tuple(self.x_names) if self.x_names else tuple(f"x{j + 1}" for j in range(X.shape[1]))
        z_names = tuple(self.z_names) if self.z_names else tuple(f"z{j + 1}" for j in range(Z.shape[1]))
        if len(x_names) != X.shape[1] or len(z_names) != Z.shape[1]:
            raise DimensionMismatch(f"{self.domain_id}: column names do not match X/Z widths")
        object.__setattr__(self, "x_names", x_names)
        object.__setattr__(self, "z_names", z_names)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Z.shape[1]

    def subset(self, rows: Sequence[int], domain_id: Optional[str] = None) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.y[rows], self.X[rows], self.Z[rows], domain_id or self.domain_id,
                       self.y_name, self.x_names, self.z_names)

    def to_frame(self) -> pd.DataFrame:
        """Columns in role order: y, x..., z..."""
        data = {self.y_name: self.y}
        for j, name in enumerate(self.x_names):
            data[name] = self.X[:, j]
        for j, name in enumerate(self.z_names):
            data[name] = self.Z[:, j]
        return pd.DataFrame(data)


def stack_datasets(datasets: Sequence[Dataset], domain_id: str = "pooled") -> Dataset:
    """Concatenate rows of datasets sharing d and q"""
    if not datasets:
        raise DataError("cannot stack an empty list of datasets")
    d, q = datasets[0].d, datasets[0].q
    for ds in datasets:
        if ds.d != d or ds.q != q:
            raise DimensionMismatch(f"{ds.domain_id}: (d, q)=({ds.d}, {ds.q}) differs from ({d}, {q})")
    return Dataset(
        np.concatenate([ds.y for ds in datasets]),
        np.vstack([ds.X for ds in datasets]),
        np.vstack([ds.Z for ds in datasets]),
        domain_id,
        datasets[0].y_name,
        datasets[0].x_names,
        datasets[0].z_names,
    )

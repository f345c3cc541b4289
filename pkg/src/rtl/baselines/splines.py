"""
Additive cubic B-spline features for the spline-based comparators
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import BSpline

from ..errors import ConfigError, DimensionMismatch

DEGREE = 3


@dataclass(frozen=True)
class SplineBasis:
    """Interior knots and support interval for each confounder coordinate"""
    knots: Tuple[Tuple[float, ...], ...]
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    degree: int = DEGREE

    def __post_init__(self):
        if self.degree != DEGREE:
            raise ConfigError(f"only cubic splines are supported, got degree {self.degree}")
        if not (len(self.knots) == len(self.lower) == len(self.upper)):
            raise DimensionMismatch("knots, lower and upper must cover the same coordinates")
        for j, (inner, lo, hi) in enumerate(zip(self.knots, self.lower, self.upper)):
            if not lo < hi:
                raise ConfigError(f"coordinate {j}: lower bound {lo} must be below upper bound {hi}")
            points = (lo,) + tuple(inner) + (hi,)
            if any(b <= a for a, b in zip(points[:-1], points[1:])):
                raise ConfigError(f"coordinate {j}: knots must be strictly increasing inside ({lo}, {hi})")

    @classmethod
    def equally_spaced(cls, q: int, n_knots: int, lower: Optional[Sequence[float]] = None,
                       upper: Optional[Sequence[float]] = None) -> "SplineBasis":
        """n_knots equally spaced interior knots per coordinate (default support [-1, 1])"""
        if n_knots < 0:
            raise ConfigError(f"knot count must be >= 0, got {n_knots}")
        lower = tuple(float(v) for v in (lower if lower is not None else [-1.0] * q))
        upper = tuple(float(v) for v in (upper if upper is not None else [1.0] * q))
        knots = tuple(tuple(np.linspace(lo, hi, n_knots + 2)[1:-1].tolist()) for lo, hi in zip(lower, upper))
        return cls(knots, lower, upper)

    @property
    def q(self) -> int:
        return len(self.knots)

    def n_basis(self, j: int) -> int:
        return len(self.knots[j]) + self.degree + 1

    def knot_vector(self, j: int) -> np.ndarray:
        lo, hi = self.lower[j], self.upper[j]
        return np.concatenate([[lo] * (self.degree + 1), self.knots[j], [hi] * (self.degree + 1)])


def _coordinate_basis(basis: SplineBasis, j: int, x: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=np.float64), basis.lower[j], basis.upper[j])
    return BSpline.design_matrix(x, basis.knot_vector(j), basis.degree).toarray()


def spline_basis_eval(basis: SplineBasis, z) -> np.ndarray:
    """Per-coordinate cubic B-spline values of one point, concatenated"""
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.size != basis.q:
        raise DimensionMismatch(f"z has {z.size} coordinates, basis expects {basis.q}")
    return np.concatenate([_coordinate_basis(basis, j, z[j:j + 1])[0] for j in range(basis.q)])


def spline_features(basis: SplineBasis, Z) -> np.ndarray:
    """
    Additive spline design for Z (n x q)

    Each coordinate's basis sums to one, so the first column of every
    coordinate after the first is dropped; the first coordinate's full basis
    carries the intercept.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != basis.q:
        raise DimensionMismatch(f"Z must be n x {basis.q}, got shape {Z.shape}")
    blocks = []
    for j in range(basis.q):
        B = _coordinate_basis(basis, j, Z[:, j])
        blocks.append(B if j == 0 else B[:, 1:])
    return np.hstack(blocks)


def support_from_data(Z) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """[-1, 1] when the data fit inside it, otherwise the per-coordinate range"""
    Z = np.asarray(Z, dtype=np.float64)
    lo = Z.min(axis=0)
    hi = Z.max(axis=0)
    if np.all(lo >= -1.0) and np.all(hi <= 1.0):
        return (-1.0,) * Z.shape[1], (1.0,) * Z.shape[1]
    span = np.where(hi > lo, hi - lo, 1.0)
    return tuple((lo - 1e-9 * span).tolist()), tuple((hi + 1e-9 * span).tolist())

"""
Seeded data-generating processes for the simulation studies

Designs: additive (R_j = f_j(z_j)), additive factor (R_j = f_j((B z)_j)), a
two-layer deep composition over q=10 inputs, and small toy designs used to
demonstrate alignment of a learned representation.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DimensionMismatch, UnsupportedDims
from .seeding import derive_rng

logger = logging.getLogger(__name__)

CLIP = 10.0
LOG_FLOOR = 1e-3


class DesignFamily(str, Enum):
    ADDITIVE = "Additive"
    ADDITIVE_FACTOR = "AdditiveFactor"
    DEEP = "Deep"
    TOY = "ToyIdentifiability"

    @classmethod
    def parse(cls, value) -> "DesignFamily":
        if isinstance(value, cls):
            return value
        for member in cls:
            if str(value).lower() in (member.value.lower(), member.name.lower()):
                return member
        raise ConfigError(f"Unknown design family: {value}. Supported: {[m.value for m in cls]}")


class Regime(str, Enum):
    HOMOGENEOUS = "Homogeneous"
    HETEROGENEOUS = "Heterogeneous"

    @classmethod
    def parse(cls, value) -> "Regime":
        if isinstance(value, cls):
            return value
        for member in cls:
            if str(value).lower() in (member.value.lower(), member.name.lower()):
                return member
        raise ConfigError(f"Unknown coefficient regime: {value}")


# Univariate pools. Outputs are clipped to [-CLIP, CLIP] when evaluated.
ADDITIVE_POOL: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "sqrt_abs": lambda x: 2.0 * np.sqrt(np.abs(x)) - 1.0,
    "sq_one_minus_abs": lambda x: (1.0 - np.abs(x)) ** 2,
    "logistic": lambda x: 1.0 / (1.0 + np.exp(-x)),
    "cos_half_pi": lambda x: np.cos(np.pi * x / 2.0),
}

DEEP_POOL: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "neg_cos": lambda x: -np.cos(x),
    "cos_2x": lambda x: np.cos(2.0 * x),
    "sin_pi": lambda x: np.sin(np.pi * x),
    "cos_pi": lambda x: np.cos(np.pi * x),
    "sqrt_shift": lambda x: 2.0 * np.sqrt(np.maximum(x + 0.5, 0.0)) - 1.0,
    "sq_shift": lambda x: (1.0 - np.abs(x - 0.5)) ** 2,
    "rev_logistic": lambda x: 1.0 / (1.0 + np.exp(np.minimum(x, 50.0))),
    "tan_shift": lambda x: np.tan(x + 0.1),
    "log_shift": lambda x: np.log(np.maximum(x + 1.5, LOG_FLOOR)),
    "exp": lambda x: np.exp(np.minimum(x, np.log(CLIP) + 1.0)),
    "square": lambda x: x ** 2,
    "arctan": np.arctan,
}

TOY_POOL: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin_pi": lambda x: np.sin(np.pi * x),
    "cos_pi": lambda x: np.cos(np.pi * x),
    "sqrt_abs": lambda x: 2.0 * np.sqrt(np.abs(x)) - 1.0,
    "sq_one_minus_abs": lambda x: (1.0 - np.abs(x)) ** 2,
    "logistic": lambda x: 1.0 / (1.0 + np.exp(-x)),
    "neg_sin": lambda x: -np.sin(x),
}

TOY_VARIANTS: Dict[int, Tuple[str, ...]] = {
    2: ("sin_pi", "cos_pi"),
    3: ("sqrt_abs", "sin_pi", "cos_pi"),
    5: ("sq_one_minus_abs", "logistic", "neg_sin", "sin_pi", "cos_pi"),
}

POOLS = {
    DesignFamily.ADDITIVE: ADDITIVE_POOL,
    DesignFamily.ADDITIVE_FACTOR: ADDITIVE_POOL,
    DesignFamily.DEEP: DEEP_POOL,
    DesignFamily.TOY: TOY_POOL,
}

# Deep wiring (0-based): each f node reads the sum of its z inputs,
# h_i reads f_i + f_{i+1}
DEEP_F_INPUTS: Tuple[Tuple[int, ...], ...] = ((0, 1), (2, 3), (4, 5), (6, 7), (7, 8), (8, 9))
DEEP_H_INPUTS: Tuple[Tuple[int, int], ...] = ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5))
DEEP_Q = 10
DEEP_P = 5


def evaluate_pool(pool: Dict[str, Callable], function_id: str, x: np.ndarray) -> np.ndarray:
    try:
        fn = pool[function_id]
    except KeyError:
        raise ConfigError(f"Unknown pool function: {function_id}")
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        values = fn(np.asarray(x, dtype=np.float64))
    values = np.nan_to_num(values, nan=0.0, posinf=CLIP, neginf=-CLIP)
    return np.clip(values, -CLIP, CLIP)


@dataclass(frozen=True)
class DeepDesign:
    """Function ids and wiring of the two-layer deep composition"""
    f_nodes: Tuple[Tuple[str, Tuple[int, ...]], ...]
    h_nodes: Tuple[Tuple[str, Tuple[int, int]], ...]

    def __post_init__(self):
        if len(self.f_nodes) != len(DEEP_F_INPUTS) or len(self.h_nodes) != len(DEEP_H_INPUTS):
            raise ConfigError("deep design needs 6 f nodes and 5 h nodes")
        for (_, inputs), expected in zip(self.f_nodes, DEEP_F_INPUTS):
            if tuple(inputs) != expected:
                raise ConfigError(f"f node inputs {inputs} do not match wiring {expected}")
        for (_, inputs), expected in zip(self.h_nodes, DEEP_H_INPUTS):
            if tuple(inputs) != expected:
                raise ConfigError(f"h node inputs {inputs} do not match wiring {expected}")

    @classmethod
    def from_ids(cls, f_ids: Sequence[str], h_ids: Sequence[str]) -> "DeepDesign":
        return cls(tuple(zip(f_ids, DEEP_F_INPUTS)), tuple(zip(h_ids, DEEP_H_INPUTS)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "f_nodes": [{"function": fid, "inputs": list(inp)} for fid, inp in self.f_nodes],
            "h_nodes": [{"function": fid, "inputs": list(inp)} for fid, inp in self.h_nodes],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DeepDesign":
        return cls(
            tuple((n["function"], tuple(n["inputs"])) for n in data["f_nodes"]),
            tuple((n["function"], tuple(n["inputs"])) for n in data["h_nodes"]),
        )


@dataclass(frozen=True)
class SimulationDesign:
    """Ground-truth representation R* and noise level of a simulated study"""
    family: DesignFamily
    d: int
    q: int
    r_true: int
    function_assignment: Tuple[str, ...] = ()
    factor_B: Optional[np.ndarray] = None
    deep_wiring: Optional[DeepDesign] = None
    noise_sd: float = 0.3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", DesignFamily.parse(self.family))
        object.__setattr__(self, "function_assignment", tuple(self.function_assignment))
        if not self.noise_sd >= 0:
            raise ConfigError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if self.family == DesignFamily.ADDITIVE_FACTOR and self.factor_B is None:
            raise ConfigError("AdditiveFactor design requires factor_B")
        if self.family == DesignFamily.DEEP and self.deep_wiring is None:
            raise ConfigError("Deep design requires deep_wiring")
        if self.family != DesignFamily.DEEP and len(self.function_assignment) != self.r_true:
            raise ConfigError(
                f"{self.family.value} design needs {self.r_true} functions, got {len(self.function_assignment)}"
            )

    @property
    def p(self) -> int:
        return self.r_true

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family.value,
            "d": self.d,
            "q": self.q,
            "r_true": self.r_true,
            "function_assignment": list(self.function_assignment),
            "factor_B": self.factor_B.tolist() if self.factor_B is not None else None,
            "deep_wiring": self.deep_wiring.to_dict() if self.deep_wiring is not None else None,
            "noise_sd": self.noise_sd,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SimulationDesign":
        B = data.get("factor_B")
        wiring = data.get("deep_wiring")
        return cls(
            family=DesignFamily.parse(data["family"]),
            d=int(data["d"]),
            q=int(data["q"]),
            r_true=int(data["r_true"]),
            function_assignment=tuple(data.get("function_assignment", ())),
            factor_B=np.asarray(B, dtype=np.float64) if B is not None else None,
            deep_wiring=DeepDesign.from_dict(wiring) if wiring is not None else None,
            noise_sd=float(data.get("noise_sd", 0.3)),
            seed=int(data.get("seed", 0)),
        )


@dataclass(frozen=True)
class CoefficientSet:
    """Index 0 is the target domain, 1..K the sources"""
    betas: Tuple[np.ndarray, ...]
    gammas: Tuple[np.ndarray, ...]
    regime: Regime

    @property
    def K(self) -> int:
        return len(self.betas) - 1

    def with_target(self, beta0, gamma0) -> "CoefficientSet":
        """Fix the target pair; a homogeneous set gets it in every domain"""
        beta0 = np.asarray(beta0, dtype=np.float64)
        gamma0 = np.asarray(gamma0, dtype=np.float64)
        if beta0.shape != self.betas[0].shape or gamma0.shape != self.gammas[0].shape:
            raise DimensionMismatch("fixed target coefficients have the wrong length")
        if self.regime == Regime.HOMOGENEOUS:
            count = len(self.betas)
            return replace(self, betas=(beta0,) * count, gammas=(gamma0,) * count)
        return replace(self, betas=(beta0,) + self.betas[1:], gammas=(gamma0,) + self.gammas[1:])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "regime": self.regime.value,
            "betas": [b.tolist() for b in self.betas],
            "gammas": [g.tolist() for g in self.gammas],
        }


def make_design(family, d: int, q: int, r_true: int, seed: int, noise_sd: float = 0.3) -> SimulationDesign:
    """
    Draw a design's function assignment (and factor matrix) from its seed

    Args:
        family: design family
        d: length of the primary coefficient vector
        q: confounder dimension
        r_true: dimension of the true representation
        seed: design seed
        noise_sd: standard deviation of the additive Gaussian noise

    Raises:
        UnsupportedDims: dimensions the family cannot realize
    """
    family = DesignFamily.parse(family)
    if d < 1 or q < 1 or r_true < 1:
        raise UnsupportedDims(f"d, q and r_true must be >= 1, got ({d}, {q}, {r_true})")
    rng = derive_rng(seed, "design", family.value)

    if family == DesignFamily.ADDITIVE:
        if q < r_true:
            raise UnsupportedDims(f"Additive design needs q >= r_true, got q={q}, r_true={r_true}")
        ids = tuple(str(f) for f in rng.choice(sorted(ADDITIVE_POOL), size=r_true))
        return SimulationDesign(family, d, q, r_true, ids, noise_sd=noise_sd, seed=seed)

    if family == DesignFamily.ADDITIVE_FACTOR:
        ids = tuple(str(f) for f in rng.choice(sorted(ADDITIVE_POOL), size=r_true))
        B = rng.normal(0.0, np.sqrt(1.0 / q), size=(r_true, q))
        return SimulationDesign(family, d, q, r_true, ids, factor_B=B, noise_sd=noise_sd, seed=seed)

    if family == DesignFamily.DEEP:
        if q != DEEP_Q or r_true != DEEP_P:
            raise UnsupportedDims(f"Deep design requires q={DEEP_Q} and p={DEEP_P}, got q={q}, p={r_true}")
        pool = sorted(DEEP_POOL)
        f_ids = tuple(str(f) for f in rng.choice(pool, size=len(DEEP_F_INPUTS)))
        h_ids = tuple(str(h) for h in rng.choice(pool, size=len(DEEP_H_INPUTS)))
        wiring = DeepDesign.from_ids(f_ids, h_ids)
        return SimulationDesign(family, d, q, r_true, deep_wiring=wiring, noise_sd=noise_sd, seed=seed)

    if r_true not in TOY_VARIANTS or q != r_true:
        raise UnsupportedDims(
            f"Toy design supports q = r_true in {sorted(TOY_VARIANTS)}, got q={q}, r_true={r_true}"
        )
    return SimulationDesign(family, d, q, r_true, TOY_VARIANTS[r_true], noise_sd=noise_sd, seed=seed)


def true_representation(design: SimulationDesign, Z) -> np.ndarray:
    """Exact R*(Z) for the design, n x r_true"""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != design.q:
        raise DimensionMismatch(f"Z must be n x {design.q}, got shape {Z.shape}")
    pool = POOLS[design.family]

    if design.family == DesignFamily.DEEP:
        wiring = design.deep_wiring
        f_out = [evaluate_pool(pool, fid, Z[:, list(inputs)].sum(axis=1)) for fid, inputs in wiring.f_nodes]
        return np.column_stack([
            evaluate_pool(pool, hid, f_out[a] + f_out[b]) for hid, (a, b) in wiring.h_nodes
        ])

    if design.family == DesignFamily.ADDITIVE_FACTOR:
        inputs = Z @ design.factor_B.T
    else:
        # coordinates beyond r_true are inert
        inputs = Z[:, :design.r_true]
    return np.column_stack([
        evaluate_pool(pool, fid, inputs[:, j]) for j, fid in enumerate(design.function_assignment)
    ])


def make_coefficients(K: int, d: int, p: int, regime, seed: int) -> CoefficientSet:
    """Standard normal coefficients for the target (index 0) and K sources"""
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    regime = Regime.parse(regime)
    rng = derive_rng(seed, "coefficients")
    if regime == Regime.HOMOGENEOUS:
        beta = rng.standard_normal(d)
        gamma = rng.standard_normal(p)
        return CoefficientSet(tuple(beta.copy() for _ in range(K + 1)),
                              tuple(gamma.copy() for _ in range(K + 1)), regime)
    betas = tuple(rng.standard_normal(d) for _ in range(K + 1))
    gammas = tuple(rng.standard_normal(p) for _ in range(K + 1))
    return CoefficientSet(betas, gammas, regime)


def true_regression(design: SimulationDesign, beta, gamma, X, Z) -> np.ndarray:
    """Noiseless mean beta'X_i + gamma'R*(Z_i)"""
    X = np.asarray(X, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != beta.size or gamma.size != design.p:
        raise DimensionMismatch(
            f"X {X.shape}, beta {beta.shape}, gamma {gamma.shape} inconsistent with design p={design.p}"
        )
    return X @ beta + true_representation(design, Z) @ gamma


def sample_covariates(design: SimulationDesign, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    X = rng.uniform(-1.0, 1.0, size=(n, design.d))
    Z = rng.uniform(-1.0, 1.0, size=(n, design.q))
    return X, Z


def generate_domain(design: SimulationDesign, beta, gamma, n: int, seed: int,
                    domain_id: str = "domain") -> Dataset:
    """X, Z ~ U[-1,1], eps ~ N(0, noise_sd^2), Y = beta'X + gamma'R*(Z) + eps"""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    X, Z = sample_covariates(design, n, rng)
    eps = rng.normal(0.0, design.noise_sd, size=n) if design.noise_sd > 0 else np.zeros(n)
    y = true_regression(design, beta, gamma, X, Z) + eps
    return Dataset(y, X, Z, domain_id)

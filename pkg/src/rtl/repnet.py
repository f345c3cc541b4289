"""
Shared representation network R: R^q -> R^p

A plain feedforward ReLU network written out in numpy: forward pass, exact
backpropagation of the multi-domain squared-error objective, and an SGD update
with optional entrywise parameter clamping.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataio import atomic_write_text
from .errors import ConfigError, DimensionMismatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture of the representation network"""
    input_dim: int
    output_dim: int
    depth: int = 2
    width: int = 32
    # None means unbounded
    param_bound: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        for name in ("input_dim", "output_dim", "width"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"NetworkConfig.{name} must be >= 1, got {getattr(self, name)}")
        # depth 0 is a single affine map
        if int(self.depth) < 0:
            raise ConfigError(f"NetworkConfig.depth must be >= 0, got {self.depth}")
        if self.param_bound is not None and not self.param_bound > 0:
            raise ConfigError(f"NetworkConfig.param_bound must be > 0 when set, got {self.param_bound}")

    @property
    def layer_sizes(self) -> List[int]:
        return [self.input_dim] + [self.width] * self.depth + [self.output_dim]

    @classmethod
    def from_dict(cls, data: Dict[str, Any], input_dim: Optional[int] = None,
                  output_dim: Optional[int] = None) -> "NetworkConfig":
        """Build from a config mapping; explicit dims override the mapping"""
        data = dict(data or {})
        if input_dim is not None:
            data["input_dim"] = input_dim
        if output_dim is not None:
            data["output_dim"] = output_dim
        missing = [k for k in ("input_dim", "output_dim") if k not in data]
        if missing:
            raise ConfigError(f"NetworkConfig missing {', '.join(missing)}")
        unknown = set(data) - {"input_dim", "output_dim", "depth", "width", "param_bound", "seed"}
        if unknown:
            raise ConfigError(f"NetworkConfig has unknown keys: {sorted(unknown)}")
        bound = data.get("param_bound")
        return cls(
            input_dim=int(data["input_dim"]),
            output_dim=int(data["output_dim"]),
            depth=int(data.get("depth", 2)),
            width=int(data.get("width", 32)),
            param_bound=None if bound in (None, "unbounded") else float(bound),
            seed=int(data.get("seed", 0)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "depth": self.depth,
            "width": self.width,
            "param_bound": self.param_bound if self.param_bound is not None else "unbounded",
            "seed": self.seed,
        }


@dataclass(frozen=True)
class NetworkParams:
    """Weights A_0..A_D (shape p_{i+1} x p_i) and biases b_0..b_D"""
    config: NetworkConfig
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    def __post_init__(self):
        sizes = self.config.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise DimensionMismatch(
                f"expected {len(sizes) - 1} layers, got {len(self.weights)} weights / {len(self.biases)} biases"
            )
        for i, (A, b) in enumerate(zip(self.weights, self.biases)):
            if A.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise DimensionMismatch(
                    f"layer {i}: expected A {(sizes[i + 1], sizes[i])} and b {(sizes[i + 1],)}, "
                    f"got {A.shape} and {b.shape}"
                )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "weights": [A.tolist() for A in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NetworkParams":
        config = NetworkConfig.from_dict(data["config"])
        weights = tuple(np.array(A, dtype=np.float64).reshape(len(A), -1) for A in data["weights"])
        biases = tuple(np.array(b, dtype=np.float64) for b in data["biases"])
        return cls(config, weights, biases)

    def save(self, path: Path):
        atomic_write_text(Path(path), json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: Path) -> "NetworkParams":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class GradientBundle:
    """Gradients shaped like NetworkParams, plus the loss they came from"""
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    loss_value: float = 0.0


def init_params(config: NetworkConfig) -> NetworkParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases"""
    rng = np.random.default_rng(config.seed)
    sizes = config.layer_sizes
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(config, tuple(weights), tuple(biases))


def _forward_with_cache(params: NetworkParams, Z: np.ndarray):
    """Return (output, activations, pre-activations) for backprop"""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != params.config.input_dim:
        raise DimensionMismatch(
            f"Z must be n x {params.config.input_dim}, got shape {Z.shape}"
        )
    activations = [Z]
    pre_activations = []
    H = Z
    last = len(params.weights) - 1
    for i, (A, b) in enumerate(zip(params.weights, params.biases)):
        pre = H @ A.T + b
        if i == last:
            return pre, activations, pre_activations
        pre_activations.append(pre)
        H = np.maximum(pre, 0.0)
        activations.append(H)


def forward(params: NetworkParams, Z) -> np.ndarray:
    """Evaluate R on each row of Z (n x q) -> n x p"""
    out, _, _ = _forward_with_cache(params, Z)
    return out


def loss_and_gradients(params: NetworkParams,
                       batches: Sequence[Tuple[np.ndarray, np.ndarray, np.ndarray]]) -> GradientBundle:
    """
    Multi-domain squared error and its exact gradient with respect to theta

    Args:
        params: current network parameters
        batches: one (Z_k, t_k, gamma_k) per domain, where t_k = Y_k - X_k beta_k

    Returns:
        GradientBundle with loss (1/K) sum_k (1/n_k) ||t_k - R(Z_k) gamma_k||^2
    """
    K = len(batches)
    if K < 1:
        raise DimensionMismatch("loss_and_gradients needs at least one domain batch")
    p = params.config.output_dim
    grad_w = [np.zeros_like(A) for A in params.weights]
    grad_b = [np.zeros_like(b) for b in params.biases]
    loss = 0.0

    for Z, target, gamma in batches:
        target = np.asarray(target, dtype=np.float64)
        gamma = np.asarray(gamma, dtype=np.float64)
        if gamma.shape != (p,):
            raise DimensionMismatch(f"gamma must have length {p}, got shape {gamma.shape}")
        out, acts, pres = _forward_with_cache(params, Z)
        n = out.shape[0]
        if target.shape != (n,):
            raise DimensionMismatch(f"residual target must have length {n}, got shape {target.shape}")

        resid = target - out @ gamma
        weight = 1.0 / (K * n)
        loss += weight * float(resid @ resid)

        # dL/dR for this domain
        delta = np.outer(-2.0 * weight * resid, gamma)
        for i in range(len(params.weights) - 1, -1, -1):
            grad_w[i] += delta.T @ acts[i]
            grad_b[i] += delta.sum(axis=0)
            if i > 0:
                delta = (delta @ params.weights[i]) * (pres[i - 1] > 0)

    return GradientBundle(tuple(grad_w), tuple(grad_b), loss)


def sgd_step(params: NetworkParams, grads: GradientBundle, lr: float,
             clamp: Optional[float] = None) -> NetworkParams:
    """theta <- theta - lr * grad, then clip to [-clamp, clamp] when bounded"""
    if len(grads.weights) != len(params.weights) or len(grads.biases) != len(params.biases):
        raise DimensionMismatch("gradient bundle does not match parameter layers")
    new_w = []
    new_b = []
    for A, gA, b, gb in zip(params.weights, grads.weights, params.biases, grads.biases):
        if A.shape != gA.shape or b.shape != gb.shape:
            raise DimensionMismatch(f"gradient shape {gA.shape} does not match weight shape {A.shape}")
        A_next = A - lr * gA
        b_next = b - lr * gb
        if clamp is not None:
            A_next = np.clip(A_next, -clamp, clamp)
            b_next = np.clip(b_next, -clamp, clamp)
        new_w.append(A_next)
        new_b.append(b_next)
    return NetworkParams(params.config, tuple(new_w), tuple(new_b))


def with_output_transform(params: NetworkParams, Lambda_inv: np.ndarray) -> NetworkParams:
    """Fold a fixed invertible map into the output layer: R -> Lambda_inv R"""
    Lambda_inv = np.asarray(Lambda_inv, dtype=np.float64)
    p = params.config.output_dim
    if Lambda_inv.shape != (p, p):
        raise DimensionMismatch(f"output transform must be {p} x {p}, got {Lambda_inv.shape}")
    weights = params.weights[:-1] + (Lambda_inv @ params.weights[-1],)
    biases = params.biases[:-1] + (Lambda_inv @ params.biases[-1],)
    return NetworkParams(params.config, weights, biases)

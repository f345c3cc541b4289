"""
Method Factory
Resolves method names from configs and CLI flags to estimator instances
"""

import logging
from typing import Any, Dict, List, Optional, Sequence, Type

from ..errors import ConfigError
from .base import MethodConfig, TransferMethod
from .meta import MetaAnalysis
from .oracle import OracleMethod
from .pool import PooledRegression
from .representation import RepresentationTransfer
from .stl import SingleTaskLearning

logger = logging.getLogger(__name__)

METHODS: Dict[str, Type[TransferMethod]] = {
    "RTL": RepresentationTransfer,
    "STL": SingleTaskLearning,
    "Pool": PooledRegression,
    "Meta": MetaAnalysis,
    "Oracle": OracleMethod,
}

# Listed in reports, never fitted
PLACEHOLDERS = {
    "MAP": "external, not computed",
    "Trans-Lasso": "external, not computed",
}

# Methods that need the simulation truth
NEEDS_TRUTH = {"Oracle"}


def canonical_name(name: str) -> str:
    """Case-insensitive lookup of a computed or placeholder method name"""
    lookup = {k.lower(): k for k in list(METHODS) + list(PLACEHOLDERS)}
    key = str(name).strip().lower()
    if key not in lookup:
        raise ConfigError(
            f"Unknown method: {name}. Supported methods: {', '.join(list(METHODS) + list(PLACEHOLDERS))}"
        )
    return lookup[key]


class MethodFactory:
    """Factory for creating transfer methods by name"""

    @staticmethod
    def create_method(method_name: str, config: Optional[MethodConfig] = None) -> TransferMethod:
        """
        Create a transfer method instance

        Args:
            method_name: one of RTL, STL, Pool, Meta, Oracle (case-insensitive)
            config: method settings; defaults when omitted

        Returns:
            TransferMethod instance

        Raises:
            ConfigError: unknown name, or a placeholder method that is never fitted
        """
        name = canonical_name(method_name)
        if name in PLACEHOLDERS:
            raise ConfigError(f"{name} is a report placeholder ({PLACEHOLDERS[name]}) and cannot be fitted")
        config = config or MethodConfig(name=name)
        method = METHODS[name](config)
        logger.debug(f"Method initialized: {name} ({config.to_dict()})")
        return method

    @staticmethod
    def get_method_info() -> Dict[str, Any]:
        return {
            "computed_methods": {
                "RTL": {
                    "description": "Shared representation learned on sources, target fit with R fixed",
                    "needs_truth": False,
                    "inference": True,
                },
                "STL": {
                    "description": "Representation network trained on the target alone",
                    "needs_truth": False,
                    "inference": False,
                },
                "Pool": {
                    "description": "Pooled additive-spline partially linear regression",
                    "needs_truth": False,
                    "inference": False,
                },
                "Meta": {
                    "description": "Inverse-variance combination of per-domain spline fits",
                    "needs_truth": False,
                    "inference": False,
                },
                "Oracle": {
                    "description": "Target least squares on the true representation",
                    "needs_truth": True,
                    "inference": False,
                },
            },
            "placeholders": dict(PLACEHOLDERS),
        }

    @staticmethod
    def validate_methods(method_names: Sequence[str], has_truth: bool = True) -> Dict[str, Any]:
        """
        Check a method list before a run

        Returns:
            Validation results: canonical computed methods, placeholders, unknown
            names and warnings
        """
        results = {
            "valid": False,
            "methods": [],
            "placeholders": [],
            "unknown": [],
            "warnings": [],
        }
        for raw in method_names:
            try:
                name = canonical_name(raw)
            except ConfigError:
                results["unknown"].append(raw)
                continue
            if name in PLACEHOLDERS:
                results["placeholders"].append(name)
            elif name in NEEDS_TRUTH and not has_truth:
                results["warnings"].append(f"{name} needs the simulation truth and is skipped")
            elif name not in results["methods"]:
                results["methods"].append(name)

        results["valid"] = not results["unknown"] and bool(results["methods"])
        return results


def get_method(method_name: str, config: Optional[MethodConfig] = None) -> TransferMethod:
    """Quick helper to get a method instance"""
    return MethodFactory.create_method(method_name, config)


def create_methods(method_names: Sequence[str], configs: Dict[str, MethodConfig],
                   has_truth: bool = True) -> List[TransferMethod]:
    """Instances for every computable name, in order; raises ConfigError on unknown names"""
    validation = MethodFactory.validate_methods(method_names, has_truth)
    if validation["unknown"]:
        raise ConfigError(f"Unknown method(s): {validation['unknown']}")
    for warning in validation["warnings"]:
        logger.warning(warning)
    if not validation["methods"]:
        raise ConfigError(f"No computable methods in {list(method_names)}")
    return [MethodFactory.create_method(name, configs.get(name)) for name in validation["methods"]]

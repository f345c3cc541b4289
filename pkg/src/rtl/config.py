"""
Configuration file loading and environment overrides
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from .errors import ConfigError

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "RTL_SEED"
WORKERS_ENV_VAR = "RTL_WORKERS"


def load_environment(dotenv_path: Optional[str] = None) -> bool:
    """Load a .env file if present; existing environment variables win"""
    return load_dotenv(dotenv_path, override=False)


def env_seed() -> Optional[int]:
    """Seed pinned through RTL_SEED, if any"""
    value = os.environ.get(SEED_ENV_VAR)
    if value is None or value.strip() == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {value!r}")


def apply_seed_override(data: Any, seed: Optional[int]) -> Any:
    """Replace every 'seed' key in a nested config mapping"""
    if seed is None:
        return data
    if isinstance(data, dict):
        return {k: (seed if k == "seed" else apply_seed_override(v, seed)) for k, v in data.items()}
    if isinstance(data, list):
        return [apply_seed_override(v, seed) for v in data]
    return data


def load_config(path) -> Dict[str, Any]:
    """
    Load a JSON (or YAML) config mapping

    Args:
        path: config file

    Returns:
        Parsed mapping with RTL_SEED applied to every seed key

    Raises:
        ConfigError: missing file, syntax error (with line), or non-mapping document
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError("config file not found", str(path))
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError(f"cannot parse config: {problem}", str(path), line)
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level", str(path))

    seed = env_seed()
    if seed is not None:
        logger.info(f"{SEED_ENV_VAR}={seed} overrides seeds in {path.name}")
    return apply_seed_override(data, seed)


def default_workers() -> int:
    """Worker-pool size from RTL_WORKERS, else the logical core count"""
    value = os.environ.get(WORKERS_ENV_VAR)
    if value:
        try:
            workers = int(value)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV_VAR} must be an integer, got {value!r}")
        if workers < 1:
            raise ConfigError(f"{WORKERS_ENV_VAR} must be >= 1, got {workers}")
        return workers
    return os.cpu_count() or 1

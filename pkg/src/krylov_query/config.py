"""Configuration management for krylov-query."""
import copy
import os
from pathlib import Path
from typing import Optional

import yaml

from .utils.log import get_logger

logger = get_logger(__name__)

DEFAULTS = {
    "linalg": {
        "hermitian_rtol": 1.0e-12,
        "rank_tol": 1.0e-10,
        "ql_sweeps_per_dim": 50,
    },
    "lanczos": {
        "breakdown_rtol": 1.0e-12,
    },
    "measure": {
        "atom_merge_rtol": 1.0e-10,
        "pole_rtol": 1.0e-10,
        "overflow_exponent": 700.0,
        "cfrac_min_denominator": 1.0e-300,
        "finite_difference_step": 1.0e-2,
    },
    "favard": {
        "inverse_guard_rtol": 1.0e-8,
    },
    "duality": {
        "coeff_zero_rtol": 1.0e-10,
        "oracle_max_condition": 1.0e12,
        "worst_case": {
            "grid_points": 1000,
            "max_degree": 512,
            "floor_rtol": 1.0e-12,
        },
    },
    "dynamics": {
        "norm_tol": 1.0e-10,
        "disorder_clamp": 0.5,
    },
    "runner": {
        "max_workers": 4,
        "format": "json",
    },
}


class Config:
    """Tolerances and runner settings: built-in defaults overlaid by a YAML file.

    The file is looked up at the given path, else ``$KQ_CONFIG``, else
    ``~/.config/krylov-query/config.yaml``. A missing file means defaults. An
    unreadable or malformed one is logged and ignored, and so are keys the
    defaults do not know.
    """

    def __init__(self, config_path: Optional[Path] = None):
        if config_path is None:
            env_path = os.environ.get("KQ_CONFIG")
            config_path = (
                Path(env_path)
                if env_path
                else Path.home() / ".config" / "krylov-query" / "config.yaml"
            )
        self.config_path = Path(config_path)
        self.config = self._load()

    def _load(self) -> dict:
        settings = copy.deepcopy(DEFAULTS)
        if not self.config_path.exists():
            return settings
        try:
            user = yaml.safe_load(self.config_path.read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as e:
            logger.warning("ignoring config %s: %s", self.config_path, e)
            return settings
        if user is None:
            return settings
        if not isinstance(user, dict):
            logger.warning("ignoring config %s: top level is not a mapping", self.config_path)
            return settings
        _overlay(settings, user, "")
        logger.debug("loaded config from %s", self.config_path)
        return settings

    def get(self, key: str, default=None):
        """Value at a dot-separated key such as ``lanczos.breakdown_rtol``."""
        node = self.config
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node


def _overlay(base: dict, user: dict, prefix: str) -> None:
    """Write ``user`` into ``base`` in place, keeping only keys ``base`` defines."""
    for key, value in user.items():
        path = f"{prefix}{key}"
        if key not in base:
            logger.warning("unknown config key %s ignored", path)
        elif isinstance(base[key], dict):
            if isinstance(value, dict):
                _overlay(base[key], value, f"{path}.")
            else:
                logger.warning("config key %s must be a mapping, ignored", path)
        else:
            base[key] = value


_config: Optional[Config] = None


def get_config() -> Config:
    """Process-wide configuration, loaded on first use."""
    global _config
    if _config is None:
        _config = Config()
    return _config


def reset_config(config: Optional[Config] = None) -> None:
    """Replace (or drop) the global configuration instance."""
    global _config
    _config = config


def setting(key: str, override=None):
    """Return ``override`` when given, else the configured value for ``key``."""
    if override is not None:
        return override
    value = get_config().get(key)
    if value is None:
        raise KeyError(f"missing configuration key: {key}")
    return value

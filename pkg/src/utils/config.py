"""
Experiment configuration loading.

Values are merged in this order (later wins):
    1. defaults of ``ExperimentConfig``
    2. the ``key=value`` file named by the ``VAKON_SETTINGS`` environment variable
    3. the file given with ``--config``
    4. explicit command flags
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import dotenv_values

from src.schemas.experiment import ExperimentConfig
from src.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)

SETTINGS_ENV_VAR = "VAKON_SETTINGS"


def read_settings_file(path: str) -> Dict[str, str]:
    """Parse a ``key=value`` file (``#`` comments allowed)."""
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigError(f"settings file not found: {path}")
    values = dotenv_values(file_path)
    unknown = sorted(set(values) - set(ExperimentConfig.model_fields))
    if unknown:
        raise ConfigError(f"unknown keys in {path}: {', '.join(unknown)}")
    # a bare "key" line carries no value
    return {k.strip(): v for k, v in values.items() if v is not None}


def load_config(overrides: Optional[Dict[str, Any]] = None,
                config_file: Optional[str] = None) -> ExperimentConfig:
    """Build an ``ExperimentConfig`` from defaults, settings files and overrides.

    Raises:
        ConfigError: unknown keys or missing files
        pydantic.ValidationError: values that fail validation
    """
    values: Dict[str, Any] = {}
    env_file = os.getenv(SETTINGS_ENV_VAR)
    if env_file:
        logger.debug(f"reading defaults from {env_file}")
        values.update(read_settings_file(env_file))
    if config_file:
        logger.debug(f"reading configuration from {config_file}")
        values.update(read_settings_file(config_file))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig(**values)

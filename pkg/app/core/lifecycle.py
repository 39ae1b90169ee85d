"""Utilities for preparing configuration and logging before a run."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path

from app.core.config import AppConfig
from app.core.logger import configure_logging
from app.core.utils import coerce_bool


log = logging.getLogger(__name__)


def get_default_data_dir() -> str:
    """Return the location used when no data directory is configured.

    The path resolves to ``<package_root>/data`` so that local runs do not
    require elevated permissions to create the default storage directory and
    contributors can inspect the run log next to ``config.yaml``.
    """

    package_root = Path(__file__).resolve().parents[1]
    return str(package_root / "data")


def resolve_data_dir(explicit: str | None = None) -> str:
    if explicit:
        return str(Path(explicit).expanduser().resolve())
    env_value = os.environ.get("SHIFTKRAUS_DATA")
    if env_value:
        return str(Path(env_value).expanduser().resolve())
    return get_default_data_dir()


@dataclass
class Runtime:
    """Configuration and logging state shared by one command-line run."""

    config: AppConfig
    data_dir: str
    log_path: str
    debug_logging: bool


def load_runtime(data_dir: str | None = None) -> Runtime:
    """Load ``config.yaml`` and configure logging for ``data_dir``.

    ``SHIFTKRAUS_DEBUG_LOGGING`` overrides the ``diagnostics.debug_logging``
    value stored in the configuration file.
    """

    data_dir = resolve_data_dir(data_dir)
    os.makedirs(data_dir, exist_ok=True)

    cfg = AppConfig.load(data_dir)
    diagnostics_cfg = cfg.raw.get("diagnostics", {}) if isinstance(cfg.raw, dict) else {}
    debug_logging = coerce_bool(diagnostics_cfg.get("debug_logging"), False)
    debug_logging_env = os.environ.get("SHIFTKRAUS_DEBUG_LOGGING")
    if debug_logging_env is not None:
        debug_logging = coerce_bool(debug_logging_env, debug_logging)
    log_path = configure_logging(
        data_dir,
        debug_enabled=debug_logging,
        max_bytes=diagnostics_cfg.get("log_max_bytes", 1_048_576),
        retention=diagnostics_cfg.get("log_retention", 5),
    )

    log.info(
        "Runtime loaded (data_dir=%s, debug_logging=%s, log_path=%s)",
        data_dir,
        debug_logging,
        log_path,
    )

    return Runtime(
        config=cfg,
        data_dir=data_dir,
        log_path=str(log_path),
        debug_logging=debug_logging,
    )

"""
INI-file and environment configuration.

Precedence for every key is: command-line flag, then (tol only) the
TCHAK_TOL environment variable, then the [tchakaloff] section of the INI
file, then the built-in default.
"""

import configparser
import logging
import os
from typing import Any, Dict, Mapping

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = os.path.join(os.path.expanduser("~"), ".tchakaloff.ini")
SECTION = "tchakaloff"
TOL_ENV_VAR = "TCHAK_TOL"

DEFAULT_TOL = 1e-9

DEFAULTS: Dict[str, Any] = {
    "tol": "",
    "rank_tol": "",
    "jobs": "1",
    "verbose": "false",
}


def load_settings(
    config_file: str, section: str, defaults: Dict[str, Any] | None = None
) -> Dict[str, Any]:
    """
    Load the given section of an INI file as a dict of strings.
    A missing file or section yields a copy of `defaults` (or {}); keys
    absent from the section are filled from `defaults`.
    """
    fallback = dict(defaults) if defaults is not None else {}
    if not config_file or not os.path.exists(config_file):
        return fallback
    config = configparser.ConfigParser()
    try:
        config.read(config_file)
    except configparser.Error as e:
        raise ValueError(f"unreadable config file {config_file}: {e}")
    if section not in config:
        logger.debug(f"No [{section}] section in {config_file}; using defaults")
        return fallback
    settings = dict(config[section])
    for k, v in fallback.items():
        settings.setdefault(k, v)
    logger.debug(f"Settings loaded from {config_file} [{section}]")
    return settings


def _positive(value: Any, name: str) -> float:
    try:
        tol = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a number, got {value!r}")
    if not tol > 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    return tol


def resolve_tolerance(
    cli_value: float | None,
    settings: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> float:
    """
    Moment-match tolerance by precedence: flag > TCHAK_TOL > INI > DEFAULT_TOL.

    :raises ValueError: if the winning value is not a positive number
    """
    environ = os.environ if environ is None else environ
    if cli_value is not None:
        return _positive(cli_value, "--tol")
    if environ.get(TOL_ENV_VAR):
        return _positive(environ[TOL_ENV_VAR], TOL_ENV_VAR)
    if settings and str(settings.get("tol", "")).strip():
        return _positive(settings["tol"], "tol")
    return DEFAULT_TOL


def resolve_rank_tol(cli_value: float | None, settings: Mapping[str, Any] | None = None):
    """Relative rank tolerance, or None for the size*eps default."""
    if cli_value is not None:
        return _positive(cli_value, "--rank-tol")
    raw = str((settings or {}).get("rank_tol", "")).strip()
    return _positive(raw, "rank_tol") if raw else None


def resolve_jobs(cli_value: int | None, settings: Mapping[str, Any] | None = None) -> int:
    raw = cli_value if cli_value is not None else (settings or {}).get("jobs", 1)
    try:
        jobs = int(raw)
    except (TypeError, ValueError):
        raise ValueError(f"jobs must be an integer, got {raw!r}")
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    return jobs


def resolve_verbose(cli_flag: bool, settings: Mapping[str, Any] | None = None) -> bool:
    if cli_flag:
        return True
    raw = str((settings or {}).get("verbose", "false")).strip().lower()
    return raw in ("1", "true", "yes", "on")

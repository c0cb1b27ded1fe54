"""
Environment utilities for loading configuration from .env files
"""

import os
from functools import lru_cache
from pathlib import Path

from loguru import logger

try:
    from dotenv import load_dotenv

    HAS_DOTENV = True
except ImportError:
    HAS_DOTENV = False

ROOT = Path(__file__).parent.parent


@lru_cache(maxsize=None)
def load_environment() -> None:
    """
    Load environment variables from the repository's .env file, once per process
    """
    if not HAS_DOTENV:
        logger.debug("python-dotenv not installed; using the process environment only")
        return

    env_file = ROOT / ".env"
    if env_file.exists():
        load_dotenv(env_file)
        logger.debug(f"Loaded environment variables from {env_file}")


def get_env_var(key: str, default: str = None, var_type: type = str):
    """
    Get environment variable with type conversion and default value

    Args:
        key: Environment variable name
        default: Default value if not found
        var_type: Target type (str, int, float, bool)

    Returns:
        Environment variable value converted to specified type
    """
    load_environment()

    value = os.getenv(key, default)

    if value is None:
        return None

    try:
        if var_type == bool:
            return str(value).lower() in ("true", "1", "yes", "on")
        elif var_type == int:
            return int(value)
        elif var_type == float:
            return float(value)
        else:
            return str(value)
    except (ValueError, TypeError):
        logger.warning(f"Cannot read {key}={value!r} as {var_type.__name__}; using {default!r}")
        if default is not None:
            return (
                var_type(default)
                if var_type != bool
                else (str(default).lower() in ("true", "1", "yes", "on"))
            )
        return None


def get_result_folder() -> str:
    """
    Result folder from PAIRCLONE_RESULT_FOLDER, relative paths taken from the working directory
    """
    return os.path.abspath(get_env_var("PAIRCLONE_RESULT_FOLDER", "result"))


def get_log_level() -> str:
    return get_env_var("PAIRCLONE_LOG_LEVEL", "INFO").upper()


def get_num_workers() -> int:
    return max(1, get_env_var("PAIRCLONE_NUM_WORKERS", "1", int))

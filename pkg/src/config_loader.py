"""
Configuration loader.
Loads experiment documents (JSON, or YAML which is a superset) with
environment variable resolution, and layers them over repository defaults.
"""

import os
import re
from typing import Any, Mapping

import structlog
import yaml
from dotenv import load_dotenv

from src.errors import ConfigError

logger = structlog.get_logger()

_PLACEHOLDER = re.compile(r"\$\{([^}]+)\}")


def resolve_env_vars(obj: Any) -> Any:
    """
    Recursively resolve ${VAR} placeholders with environment variables.
    A string that is exactly one placeholder is re-parsed as a YAML scalar,
    so "${LOSAW_RUNS}" can carry an integer.
    """
    if isinstance(obj, str):
        def replacer(match: re.Match) -> str:
            var_name = match.group(1)
            value = os.getenv(var_name, "")
            if not value:
                logger.warning("env_var_not_found", var=var_name)
            return value

        whole = _PLACEHOLDER.fullmatch(obj)
        resolved = _PLACEHOLDER.sub(replacer, obj)
        if whole and resolved:
            return yaml.safe_load(resolved)
        return resolved

    elif isinstance(obj, dict):
        return {key: resolve_env_vars(value) for key, value in obj.items()}

    elif isinstance(obj, list):
        return [resolve_env_vars(item) for item in obj]

    else:
        return obj


def load_config_document(path: str) -> dict[str, Any]:
    """
    Load a configuration document from a JSON or YAML file.

    Args:
        path: Path to the document

    Returns:
        Mapping with resolved env vars

    Raises:
        ConfigError: file missing, unparsable, or not a mapping
    """
    load_dotenv(override=True)

    try:
        with open(path, "r") as f:
            document = yaml.safe_load(f)
    except FileNotFoundError:
        logger.warning("config_file_not_found", path=path)
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as e:
        logger.error("config_load_error", path=path, error=str(e))
        mark = getattr(e, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"cannot parse {path}{where}: {getattr(e, 'problem', e)}")

    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError(f"{path} must contain a mapping at top level")

    document = resolve_env_vars(document)
    logger.info("config_loaded", path=path)
    return document


def load_defaults(path: str, section: str = "experiment_defaults") -> dict[str, Any]:
    """Repository defaults; a missing defaults file is not an error."""
    if not os.path.exists(path):
        logger.debug("defaults_not_found", path=path)
        return {}
    return dict(load_config_document(path).get(section) or {})


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    """Return `base` updated by `override`, merging nested mappings key by key."""
    merged: dict[str, Any] = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged

"""Configuration management for vitctl.

Two layers: user defaults in ``~/.vitctl/config.yaml`` (``VITCTL_DIR`` overrides the
directory) and per-run documents passed with ``--config``.
"""

from __future__ import annotations

import json
import os
import stat
from pathlib import Path
from typing import Any

import yaml

from vitctl.exceptions import ConfigError
from vitctl.models import Precision

_ENV_DIR = "VITCTL_DIR"
_DEFAULT_DIR = Path.home() / ".vitctl"

_DEFAULTS: dict[str, str | int | None] = {
    "data_dir": None,
    "output_dir": "sweep-out",
    "workers": 1,
    "precision": Precision.FLOAT32.value,
    "seed": 0,
}

_INT_KEYS = ("workers", "seed")


def _config_dir() -> Path:
    """Get config directory, respecting VITCTL_DIR env override."""
    env = os.environ.get(_ENV_DIR, "")
    if env:
        return Path(env)
    return _DEFAULT_DIR


def _config_path() -> Path:
    return _config_dir() / "config.yaml"


def init_config() -> Path:
    """Create default config file. Returns path."""
    path = _config_path()
    if path.exists():
        raise ConfigError(f"Config already exists at {path}")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.dump(dict(_DEFAULTS), f, default_flow_style=False)
    path.chmod(stat.S_IRUSR | stat.S_IWUSR)  # 0o600
    return path


def get_config() -> dict[str, str | int | None]:
    """Load config, falling back to defaults."""
    path = _config_path()
    if not path.exists():
        return dict(_DEFAULTS)
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping")
    merged = dict(_DEFAULTS)
    merged.update(data)
    return merged


def set_value(key: str, value: str) -> None:
    """Set a config value. Creates config if needed."""
    if key not in _DEFAULTS:
        raise ConfigError(f"Unknown config key '{key}'. Valid keys: {', '.join(sorted(_DEFAULTS))}")
    path = _config_path()
    if not path.exists():
        init_config()
    config = get_config()
    if key in _INT_KEYS:
        try:
            config[key] = int(value)
        except ValueError as e:
            raise ConfigError(f"Invalid integer for '{key}': {value}") from e
        if key == "workers" and config[key] < 1:  # type: ignore[operator]
            raise ConfigError(f"'workers' must be at least 1, got {value}")
    elif key == "precision":
        try:
            config[key] = Precision(value).value
        except ValueError as e:
            raise ConfigError(f"Invalid precision '{value}' (float32 or float64)") from e
    else:
        config[key] = value
    with open(path, "w") as f:
        yaml.dump(config, f, default_flow_style=False)


def get_data_dir() -> str | None:
    """MNIST directory from VITCTL_DATA_DIR or config."""
    env = os.environ.get("VITCTL_DATA_DIR", "")
    if env:
        return env
    value = get_config().get("data_dir")
    return str(value) if value else None


def load_document(path: str | Path) -> dict[str, Any]:
    """Read a run document (JSON, or YAML for .yaml/.yml files) as a mapping."""
    src = Path(path)
    if not src.exists():
        raise ConfigError(f"Config file not found: {path}")
    text = src.read_text(encoding="utf-8")
    try:
        if src.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"Invalid config document {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping, got {type(data).__name__}")
    return data


def merge_overrides(document: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Flags win over the document; ``None`` means the flag was not given."""
    merged = dict(document)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged

"""Flat key=value run configuration with typed access.

Config files are plain text, one ``key = value`` per line, ``#`` comments;
CLI flags override file values which override defaults.  Chosen over a
nested format so configs diff cleanly and hash canonically.
"""

from __future__ import annotations

import os

from .errors import ConfigError

ENV_DATA_ROOT = "TACGRASP_DATA"


def parse_config_file(path) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


class RunConfig:
    """Layered string map (defaults < file < flags) with typed getters."""

    def __init__(self, defaults: dict | None = None):
        self._values = dict(defaults or {})

    def update(self, values: dict) -> None:
        self._values.update({k: str(v) for k, v in values.items() if v is not None})

    def as_dict(self) -> dict:
        return dict(self._values)

    def canonical_text(self) -> str:
        return "".join(f"{k}={self._values[k]}\n" for k in sorted(self._values))

    def get(self, key: str, default=None) -> str | None:
        return self._values.get(key, default)

    def get_int(self, key: str, default=None) -> int:
        raw = self._values.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing required config key {key!r}")
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r} must be an integer, got {raw!r}")

    def get_float(self, key: str, default=None) -> float:
        raw = self._values.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing required config key {key!r}")
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r} must be a number, got {raw!r}")

    def get_bool(self, key: str, default: bool = False) -> bool:
        raw = self._values.get(key)
        if raw is None:
            return default
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r} must be boolean, got {raw!r}")

    def get_int_list(self, key: str, default=None) -> list:
        raw = self._values.get(key)
        if raw is None:
            return list(default or [])
        try:
            return [int(v) for v in raw.replace("+", ",").split(",") if v]
        except ValueError:
            raise ConfigError(f"config key {key!r} must be a list of ints")


def default_data_root() -> str:
    return os.environ.get(ENV_DATA_ROOT, os.path.join(os.getcwd(), "data"))

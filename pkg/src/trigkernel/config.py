"""Flat ``key = value`` experiment configuration.

Keys may be dotted (``kernel.lengthscale``); ``#`` starts a comment line.
Lists are comma separated.  Parsing is delegated to :mod:`configparser`
with an implicit section; this module adds typed accessors and rejects
keys that no experiment reads, so typos fail loudly.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .errors import ParseError

__all__ = ["Config", "ConfigError", "REQUIRED", "load_config"]

_SECTION = "run"
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}
REQUIRED = object()  # default marking a key that must be present


class ConfigError(ParseError):
    """Malformed, missing or inconsistent configuration."""


class Config:
    def __init__(self, values: dict[str, str], base_dir: Path = Path(".")):
        self._values = dict(values)
        self._used: set[str] = set()
        self.base_dir = Path(base_dir)

    @classmethod
    def from_text(cls, text: str, base_dir: Path = Path(".")) -> "Config":
        parser = configparser.ConfigParser(
            delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
            interpolation=None, strict=True,
        )
        parser.optionxform = str  # keep key case
        try:
            parser.read_string(f"[{_SECTION}]\n" + text)
        except configparser.Error as err:
            raise ConfigError(f"malformed config: {err}") from err
        if len(parser.sections()) != 1:
            raise ConfigError("section headers are not allowed; use dotted keys instead")
        return cls(dict(parser[_SECTION]), base_dir)

    def items(self) -> list[tuple[str, str]]:
        return sorted(self._values.items())

    def __contains__(self, key: str) -> bool:
        return key in self._values

    def set(self, key: str, value) -> None:
        self._values[key] = str(value)

    def _raw(self, key: str, default):
        self._used.add(key)
        if key in self._values:
            raw = self._values[key].strip()
            if raw == "":
                raise ConfigError(f"{key}: empty value")
            return raw
        if default is REQUIRED:
            raise ConfigError(f"missing required key '{key}'")
        return None

    def _convert(self, key, raw, kind):
        try:
            return kind(raw)
        except ValueError as err:
            raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}") from err

    def get_str(self, key: str, default=None, choices=None):
        raw = self._raw(key, default)
        value = default if raw is None else raw
        if choices is not None and value not in choices:
            raise ConfigError(f"{key}: expected one of {sorted(choices)}, got {value!r}")
        return value

    def get_float(self, key: str, default=None, positive: bool = False):
        raw = self._raw(key, default)
        value = default if raw is None else self._convert(key, raw, float)
        if positive and value is not None and not value > 0:
            raise ConfigError(f"{key}: must be positive")
        return value

    def get_int(self, key: str, default=None, minimum: int | None = None):
        raw = self._raw(key, default)
        value = default if raw is None else self._convert(key, raw, int)
        if minimum is not None and value is not None and value < minimum:
            raise ConfigError(f"{key}: must be at least {minimum}")
        return value

    def get_bool(self, key: str, default=None):
        raw = self._raw(key, default)
        if raw is None:
            return default
        if raw.lower() in _TRUE:
            return True
        if raw.lower() in _FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")

    def get_floats(self, key: str, default=None) -> tuple[float, ...] | None:
        raw = self._raw(key, default)
        if raw is None:
            return None if default is None else tuple(default)
        return tuple(self._convert(key, part.strip(), float) for part in raw.split(","))

    def get_ints(self, key: str, default=None, minimum: int | None = None) -> tuple[int, ...] | None:
        raw = self._raw(key, default)
        if raw is None:
            return None if default is None else tuple(default)
        values = tuple(self._convert(key, part.strip(), int) for part in raw.split(","))
        if minimum is not None and any(v < minimum for v in values):
            raise ConfigError(f"{key}: every entry must be at least {minimum}")
        return values

    def get_strs(self, key: str, default=None) -> tuple[str, ...] | None:
        raw = self._raw(key, default)
        if raw is None:
            return None if default is None else tuple(default)
        return tuple(part.strip() for part in raw.split(","))

    def get_path(self, key: str, default=None) -> Path | None:
        raw = self._raw(key, default)
        if raw is None:
            return None if default is None else Path(default)
        p = Path(raw)
        return p if p.is_absolute() else self.base_dir / p

    def check_consumed(self) -> None:
        unknown = sorted(set(self._values) - self._used)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return Config.from_text(text, path.parent)

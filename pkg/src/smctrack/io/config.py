"""Flat ``key = value`` tracker configuration files.

Keys are :class:`TrackerConfig` field names. ``#`` starts a comment. Values
are converted to the field's type; booleans accept true/false/1/0/yes/no.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Union

from ..association import TrackerConfig
from ..errors import ConfigError

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _convert(name: str, raw: str, default):
    if isinstance(default, bool):
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        return type(default)(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot convert {raw!r} to {type(default).__name__}") from None


def parse_config_text(text: str, base: TrackerConfig = TrackerConfig(), source: str = "<config>") -> TrackerConfig:
    defaults = {f.name: getattr(base, f.name) for f in dataclasses.fields(TrackerConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in defaults:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _convert(key, value, defaults[key])
    return dataclasses.replace(base, **values)


def load_config(path: Union[str, Path], base: TrackerConfig = TrackerConfig()) -> TrackerConfig:
    return parse_config_text(Path(path).read_text(), base, str(path))


def dump_config(cfg: TrackerConfig) -> str:
    lines = []
    for f in dataclasses.fields(TrackerConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = str(v).lower()
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"

"""Flat ``key = value`` configuration text.

Blank lines and ``#`` comments are ignored. Keys are lower-case
identifiers; values are kept as stripped strings and typed by the consumer.
A ``config_version`` key, when present, must equal ``CONFIG_VERSION``.
"""

from __future__ import annotations

import re

from .errors import ConfigError

CONFIG_VERSION = 1
_KEY = re.compile(r"^[a-z_][a-z0-9_]*$")


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"line {lineno}: invalid key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    version = out.pop("config_version", str(CONFIG_VERSION))
    if version != str(CONFIG_VERSION):
        raise ConfigError(f"unsupported config_version {version} (expected {CONFIG_VERSION})")
    return out


def dump_kv(values: dict) -> str:
    lines = [f"config_version = {CONFIG_VERSION}"]
    for key in sorted(values):
        v = values[key]
        if isinstance(v, (list, tuple)):
            v = ", ".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif v is None:
            continue
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


def as_bool(value: str) -> bool:
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")

"""Flat `key = value` text files with dotted section prefixes.

Both run configs and chip profiles use this format.  Keys are dotted
paths, values are uninterpreted strings; typing happens in the consumer.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def loads(text: str, source: str = "<string>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def dumps(values: dict[str, str]) -> str:
    lines = [f"{k} = {values[k]}" for k in sorted(values)]
    return "\n".join(lines) + "\n"


def load(path: str | Path) -> dict[str, str]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {p}: {e}") from e
    return loads(text, source=str(p))


def dump(values: dict[str, str], path: str | Path) -> None:
    Path(path).write_text(dumps(values))


def parse_float(values: dict[str, str], key: str, default: float) -> float:
    if key not in values:
        return default
    try:
        return float(values[key])
    except ValueError as e:
        raise ConfigError(f"{key}: not a number: {values[key]!r}") from e


def parse_int(values: dict[str, str], key: str, default: int) -> int:
    if key not in values:
        return default
    try:
        return int(values[key], 0)
    except ValueError as e:
        raise ConfigError(f"{key}: not an integer: {values[key]!r}") from e


def parse_bool(values: dict[str, str], key: str, default: bool) -> bool:
    if key not in values:
        return default
    v = values[key].lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: not a boolean: {values[key]!r}")

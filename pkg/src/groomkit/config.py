"""Flat ``key = value`` config files (``#`` starts a comment).

Values are kept as strings by :func:`read_config`; :func:`build` coerces
them onto a frozen dataclass by field type, so one file can carry keys for
several parameter objects.
"""

from __future__ import annotations

import dataclasses
import typing
from pathlib import Path


class ConfigError(ValueError):
    """A config file line is malformed or a value has the wrong type."""


def parse_config(text: str, source: str = "<config>") -> dict[str, tuple[str, int]]:
    """Map ``key -> (raw value, line number)``; later keys override earlier ones."""
    out: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in body.split("=", 1))
        if not key:
            raise ConfigError(f"{source}: line {lineno}: empty key")
        out[key] = (value, lineno)
    return out


def read_config(path) -> dict[str, tuple[str, int]]:
    return parse_config(Path(path).read_text(), str(path))


def _coerce(raw: str, tp, where: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or (origin is not None and type(None) in args):
        if raw.lower() in ("none", "null", ""):
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(raw, inner[0], where)
    if origin is tuple:
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if len(parts) != len(args):
            raise ConfigError(f"{where}: expected {len(args)} comma-separated values")
        return tuple(_coerce(p, a, where) for p, a in zip(parts, args))
    try:
        if tp is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        if tp is str:
            return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {tp.__name__}") from None
    raise ConfigError(f"{where}: unsupported field type {tp}")


def build(cls, entries: dict[str, tuple[str, int]], source: str = "<config>", **overrides):
    """Instantiate dataclass ``cls`` from the entries naming its fields."""
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in entries:
            raw, lineno = entries[f.name]
            kwargs[f.name] = _coerce(raw, hints[f.name], f"{source}: line {lineno}: {f.name}")
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def check_keys(entries: dict[str, tuple[str, int]], classes, source: str = "<config>") -> None:
    """Reject keys that belong to none of ``classes``."""
    known = {f.name for c in classes for f in dataclasses.fields(c)}
    for key, (_, lineno) in entries.items():
        if key not in known:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")


def dump(obj) -> str:
    lines = []
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, tuple):
            v = ", ".join(map(str, v))
        lines.append(f"{f.name} = {'none' if v is None else v}")
    return "\n".join(lines) + "\n"

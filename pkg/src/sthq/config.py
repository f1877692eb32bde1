"""Flat ``key=value`` run configuration.

A config file holds one ``key=value`` per line; blank lines and lines starting
with ``#`` are ignored.  Command-line overrides use the same syntax and win
over file values.  Unknown keys are rejected with the list of valid ones.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path


class ConfigError(ValueError):
    pass


def parse_pairs(lines, source: str = "<flags>") -> dict[str, str]:
    out: dict[str, str] = {}
    for n, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{n}: expected key=value, got {raw.strip()!r}")
        out[key.strip()] = value.strip()
    return out


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    return parse_pairs(path.read_text(encoding="utf-8").splitlines(), str(path))


def _convert(key: str, value: str, like):
    try:
        if isinstance(like, bool):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(like, int):
            return int(value)
        if isinstance(like, float):
            return float(value)
        if isinstance(like, (list, tuple)):
            return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{key}={value!r}: expected {type(like).__name__}") from None
    return value


def build(cls, values: dict[str, str], extras: dict | None = None):
    """Instantiate dataclass ``cls`` from string values.

    ``extras`` maps additional command-level keys to their defaults; they are
    converted the same way and returned separately.
    """
    extras = dict(extras or {})
    defaults = {f.name: f.default for f in dataclasses.fields(cls)}
    valid = sorted(set(defaults) | set(extras))
    unknown = sorted(set(values) - set(valid))
    if unknown:
        raise ConfigError(f"unknown config key(s) {', '.join(unknown)}; valid keys: {', '.join(valid)}")
    kwargs = {k: _convert(k, v, defaults[k]) for k, v in values.items() if k in defaults}
    for k, v in values.items():
        if k in extras:
            extras[k] = _convert(k, v, extras[k])
    return cls(**kwargs), extras


def echo(cfg, extras: dict | None = None) -> str:
    """The exact configuration as sorted ``key=value`` lines (re-readable by ``build``)."""
    items = dict(dataclasses.asdict(cfg))
    items.update(extras or {})

    def fmt(v):
        if isinstance(v, (list, tuple)):
            return ",".join(repr(float(x)) for x in v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    return "".join(f"{k}={fmt(v)}\n" for k, v in sorted(items.items()))

"""Run configuration: TOML parsing and schema validation.

The schema lives next to this module (``schema.json``) and rejects unknown
keys at every level, so a typo such as ``cfll`` fails before any work is
done.
"""

from __future__ import annotations

import hashlib
import json
import sys
from importlib import resources

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import jsonschema

__all__ = ["ConfigError", "load_schema", "load_config", "validate_config", "config_hash"]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry (dotted path)."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config error at '{key}': {message}" if key else f"config error: {message}")


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("schema.json").read_text(encoding="utf-8"))


def _offending_key(err) -> str:
    path = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties":
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            path.append(extra[0])
    return ".".join(path)


def validate_config(cfg: dict, command: str | None = None) -> dict:
    """Validate against the schema; raise :class:`ConfigError` naming the key."""
    schema = load_schema()
    errors = sorted(jsonschema.Draft7Validator(schema).iter_errors(cfg),
                    key=lambda e: (list(map(str, e.absolute_path)), e.validator))
    if errors:
        err = errors[0]
        raise ConfigError(_offending_key(err), err.message)
    if command is not None and cfg.get("command", command) != command:
        raise ConfigError("command", f"config declares {cfg['command']!r} but {command!r} was invoked")
    return cfg


def load_config(path, command: str | None = None) -> dict:
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"cannot parse {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from exc
    return validate_config(cfg, command)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()

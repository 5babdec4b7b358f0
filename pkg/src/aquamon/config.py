"""Layered JSON configuration.

The package ships a complete default configuration; a user file supplies
overrides that are deep-merged on top, so a config file only needs the
keys it changes.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .frames import GeoPoint
from .world import WorldSpec

_REQUIRED_SECTIONS = ("world", "vehicle", "gp", "mission", "link", "thresholds")


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def default_config() -> dict:
    text = (
        resources.files("aquamon").joinpath("config/default.json").read_text("utf-8")
    )
    return json.loads(text)


def load_config(path: str | Path | None = None) -> dict:
    """Defaults merged with the optional override file at path."""
    cfg = default_config()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = _deep_merge(cfg, user)
    for section in _REQUIRED_SECTIONS:
        if not isinstance(cfg.get(section), dict):
            raise ConfigError(f"config is missing the {section!r} section")
    return cfg


def world_origin(cfg: dict) -> GeoPoint:
    w = cfg["world"]
    try:
        return GeoPoint(float(w["origin_lat"]), float(w["origin_lon"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad world origin: {exc}") from None


def world_spec(cfg: dict) -> WorldSpec:
    w = {k: v for k, v in cfg["world"].items() if k not in ("origin_lat", "origin_lon")}
    return WorldSpec.from_dict(w)

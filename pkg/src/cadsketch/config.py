"""Key=value configuration shared by every CLI subcommand.

Sources, lowest precedence first: built-in defaults, CADSKETCH_WORKERS
environment variable, the config file (./cadsketch.conf or --config),
then command-line flags. Unknown keys in a config file are rejected.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

from .hog import HogParams
from .sketch import OPERATORS, SketchParams
from .view_render import (POLICY_MANUAL, POLICY_MAX_ENTROPY,
                          POLICY_MAX_SILHOUETTE)

DEFAULT_CONFIG_NAME = "cadsketch.conf"
WORKERS_ENV = "CADSKETCH_WORKERS"

_POLICIES = (POLICY_MAX_SILHOUETTE, POLICY_MAX_ENTROPY, POLICY_MANUAL)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Config:
    # sketch generation
    gaussian_kernel: int = 21
    gaussian_sigma: float = 6.0
    dodge_scale: float = 256.0
    binary_threshold: int = 245
    canny_low: float = 50.0
    canny_high: float = 150.0
    operator: str = "canny"
    nms: bool = True
    blend_weight: float = 0.15
    # descriptor
    pixels_per_cell: int = 8
    orientations: int = 8
    block_norm: str = "L2"
    # rendering and pipeline
    render_size: int = 256
    policy: str = POLICY_MAX_SILHOUETTE
    manual_index: int = -1
    workers: int = 1
    seed: int = 0

    def sketch_params(self) -> SketchParams:
        return SketchParams(
            gaussian_kernel=self.gaussian_kernel,
            gaussian_sigma=self.gaussian_sigma,
            dodge_scale=self.dodge_scale,
            binary_threshold=self.binary_threshold,
            canny_low=self.canny_low,
            canny_high=self.canny_high,
            operator=self.operator,
            nms_enabled=self.nms,
            blend_weight_o1=self.blend_weight,
        )

    def hog_params(self) -> HogParams:
        return HogParams(
            pixels_per_cell=(self.pixels_per_cell, self.pixels_per_cell),
            orientations=self.orientations,
            block_norm=self.block_norm,
        )

    def validate(self) -> None:
        self.sketch_params()
        self.hog_params()
        if self.render_size < 1:
            raise ValueError(f"render_size must be positive, got {self.render_size}")
        if self.policy not in _POLICIES:
            raise ValueError(f"policy must be one of {_POLICIES}, got {self.policy!r}")
        if self.policy == POLICY_MANUAL and not 0 <= self.manual_index < 20:
            raise ValueError("manual policy needs manual_index in 0..19")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.operator not in OPERATORS:
            raise ValueError(f"operator must be one of {OPERATORS}")


_PARSERS = {
    "gaussian_kernel": int,
    "gaussian_sigma": float,
    "dodge_scale": float,
    "binary_threshold": int,
    "canny_low": float,
    "canny_high": float,
    "operator": str,
    "nms": _parse_bool,
    "blend_weight": float,
    "pixels_per_cell": int,
    "orientations": int,
    "block_norm": str,
    "render_size": int,
    "policy": str,
    "manual_index": int,
    "workers": int,
    "seed": int,
}

assert set(_PARSERS) == {f.name for f in fields(Config)}


def parse_config_file(path) -> dict:
    """Read key=value lines ('#' starts a comment). Unknown keys raise."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _PARSERS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _PARSERS[key](value)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value for {key}: {exc}")
    return values


def load_config(path=None, overrides=None) -> Config:
    """Assemble the effective config: defaults, env, file, overrides."""
    values = {}
    env_workers = os.environ.get(WORKERS_ENV)
    if env_workers:
        values["workers"] = int(env_workers)
    if path is None and os.path.isfile(DEFAULT_CONFIG_NAME):
        path = DEFAULT_CONFIG_NAME
    if path is not None:
        values.update(parse_config_file(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    cfg = replace(Config(), **values)
    cfg.validate()
    return cfg

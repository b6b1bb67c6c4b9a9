"""Pipeline configuration: plain-text `key = value` files with dotted section
prefixes, validated against a fixed schema (unknown keys are rejected).
Every key can also be overridden on the command line by a flag of the same
name."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .baselines import BilateralConfig, TVConfig
from .errors import ConfigError
from .inpaint import InpaintConfig
from .noise import NoiseConfig
from .training import TrainConfig


def _positive(v):
    return v > 0


def _non_negative(v):
    return v >= 0


def _unit_interval(v):
    return 0.0 <= v <= 1.0


def _open_unit(v):
    return 0.0 < v < 1.0


def _angle(v):
    return 0.0 < v < 90.0


def _mode(v):
    return v in ("sred", "n2n", "n2stack")


# key -> (type, default, validator or None)
SCHEMA = {
    "core.max_depth_mm": (float, 8000.0, _positive),
    "inpaint.radius": (int, 5, _positive),
    "inpaint.lambda": (float, 0.5, _unit_interval),
    "inpaint.sigma_g": (float, None, _positive),  # absent = auto
    "inpaint.d0": (float, 1.0, _positive),
    "noise.sigma_base": (float, 0.5, _non_negative),
    "noise.q_step": (float, 0.125, _positive),
    "noise.sigma_s": (float, 0.5, _non_negative),
    "noise.theta_max_deg": (float, 80.0, _angle),
    "noise.k_disparity": (float, 35130.0, _positive),
    "noise.seed": (int, 0, None),
    "tv.weight": (float, 0.4, _positive),
    "tv.max_iters": (int, 200, _positive),
    "tv.tol": (float, 2e-4, _positive),
    "bf.sigma_s": (float, 3.0, _positive),
    "bf.sigma_r": (float, 0.05, _positive),
    "bf.radius": (int, 7, _positive),
    "train.batch": (int, 16, _positive),
    "train.epochs": (int, 200, _positive),
    "train.lr": (float, 1e-4, _positive),
    "train.seed": (int, 0, None),
    "train.val_split": (float, 0.1, _open_unit),
    "train.test_split": (float, 0.04, _open_unit),
    "train.max_steps": (int, None, _positive),
    "train.mode": (str, "sred", _mode),
    "bench.frames": (int, 100, _positive),
}


def _coerce(key: str, raw: str):
    typ, _, check = SCHEMA[key]
    try:
        if typ is int:
            val = int(raw)
        elif typ is float:
            val = float(raw)
        else:
            val = raw
    except ValueError:
        raise ConfigError(f"key {key}: cannot parse {raw!r} as {typ.__name__}") from None
    if check is not None and not check(val):
        raise ConfigError(f"key {key}: invalid value {val!r}")
    return val


@dataclass
class PipelineConfig:
    """Validated merged configuration; build per-module configs on demand."""

    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = {k: d for k, (_, d, _) in SCHEMA.items()}
        for k, v in self.values.items():
            if k not in SCHEMA:
                raise ConfigError(f"unknown config key: {k}")
            merged[k] = v
        self.values = merged

    def __getitem__(self, key: str):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        return self.values[key]

    def set(self, key: str, raw) -> None:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        self.values[key] = _coerce(key, str(raw)) if not isinstance(raw, SCHEMA[key][0]) else raw

    def inpaint_config(self) -> InpaintConfig:
        return InpaintConfig(
            d0=self["inpaint.d0"],
            sigma_g=self["inpaint.sigma_g"],
            lam=self["inpaint.lambda"],
            radius=self["inpaint.radius"],
        )

    def noise_config(self, seed=None) -> NoiseConfig:
        return NoiseConfig(
            sigma_base=self["noise.sigma_base"],
            q_step=self["noise.q_step"],
            sigma_s=self["noise.sigma_s"],
            theta_max_deg=self["noise.theta_max_deg"],
            k_disparity=self["noise.k_disparity"],
            seed=self["noise.seed"] if seed is None else seed,
        )

    def tv_config(self) -> TVConfig:
        return TVConfig(
            weight=self["tv.weight"],
            max_iters=self["tv.max_iters"],
            tol=self["tv.tol"],
        )

    def bilateral_config(self) -> BilateralConfig:
        return BilateralConfig(
            sigma_spatial=self["bf.sigma_s"],
            sigma_range=self["bf.sigma_r"],
            radius=self["bf.radius"],
        )

    def train_config(self, seed=None) -> TrainConfig:
        return TrainConfig(
            batch=self["train.batch"],
            epochs=self["train.epochs"],
            lr=self["train.lr"],
            seed=self["train.seed"] if seed is None else seed,
            val_split=self["train.val_split"],
            test_split=self["train.test_split"],
            max_depth_mm=self["core.max_depth_mm"],
            max_steps=self["train.max_steps"],
        )


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{ln}: expected `key = value`")
        key, _, raw_val = line.partition("=")
        key = key.strip()
        raw_val = raw_val.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{ln}: unknown config key: {key}")
        values[key] = _coerce(key, raw_val)
    return values


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    path = os.fspath(path)
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        return PipelineConfig(parse_config_text(fh.read(), source=path))

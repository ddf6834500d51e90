"""Loop configuration files (JSON, or YAML by extension).

Example::

    {
      "plant": {"num": [0, -1.5], "den": [1, -2]},
      "noise": {"sigma_w2": 1.0, "sigma_v2": 1.0},
      "message": {"sigma_02": 1.0, "theta": [1.0]},
      "quadrature": {"panels": 64, "nodes": 16, "tol": 1e-9},
      "horizon": 64,
      "trials": 1000,
      "seed": 42
    }

Only ``plant`` and ``noise`` are required.  Unknown keys are errors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import InfoflowError
from .lti import FeedbackLoop, TransferFunction
from .spectral import DEFAULT_QUAD, QuadratureSpec

_SCHEMA = {
    "plant": {"num", "den"},
    "noise": {"sigma_w2", "sigma_v2"},
    "message": {"sigma_02", "theta"},
    "quadrature": {"panels", "nodes", "tol"},
    "horizon": None,
    "trials": None,
    "seed": None,
}
_REQUIRED = {"plant": {"num", "den"}, "noise": {"sigma_w2", "sigma_v2"}}


class ConfigError(InfoflowError):
    pass


@dataclass(frozen=True)
class LoopConfig:
    loop: FeedbackLoop
    quad: QuadratureSpec = field(default=DEFAULT_QUAD)
    horizon: int = 64
    trials: int = 1000
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "plant": self.loop.plant.to_dict(),
            "noise": {"sigma_w2": self.loop.sigma_w2, "sigma_v2": self.loop.sigma_v2},
            "message": {"sigma_02": self.loop.sigma_02, "theta": list(self.loop.theta)},
            "quadrature": {"panels": self.quad.panels, "nodes": self.quad.nodes, "tol": self.quad.tol},
            "horizon": self.horizon,
            "trials": self.trials,
            "seed": self.seed,
        }


def _number_list(value, where: str) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where} must be a non-empty list of numbers")
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must contain only numbers") from None


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer")
    return value


def parse_config(data: dict) -> LoopConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    unknown = set(data) - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    for section, keys in _SCHEMA.items():
        if keys is None or section not in data:
            continue
        if not isinstance(data[section], dict):
            raise ConfigError(f"{section} must be a mapping")
        bad = set(data[section]) - keys
        if bad:
            raise ConfigError(f"unknown keys in {section}: {sorted(bad)}")
    for section, keys in _REQUIRED.items():
        missing = keys - set(data.get(section, {}))
        if missing:
            raise ConfigError(f"missing keys in {section}: {sorted(missing)}")

    plant = TransferFunction.from_coeffs(
        _number_list(data["plant"]["num"], "plant.num"),
        _number_list(data["plant"]["den"], "plant.den"),
    )
    message = data.get("message", {})
    loop = FeedbackLoop(
        plant,
        sigma_w2=_number(data["noise"]["sigma_w2"], "noise.sigma_w2"),
        sigma_v2=_number(data["noise"]["sigma_v2"], "noise.sigma_v2"),
        sigma_02=_number(message.get("sigma_02", 1.0), "message.sigma_02"),
        theta=tuple(_number_list(message.get("theta", [1.0]), "message.theta")),
    )
    q = data.get("quadrature", {})
    try:
        quad = QuadratureSpec(
            panels=_integer(q.get("panels", DEFAULT_QUAD.panels), "quadrature.panels"),
            nodes=_integer(q.get("nodes", DEFAULT_QUAD.nodes), "quadrature.nodes"),
            tol=_number(q.get("tol", DEFAULT_QUAD.tol), "quadrature.tol"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = LoopConfig(
        loop,
        quad,
        horizon=_integer(data.get("horizon", 64), "horizon"),
        trials=_integer(data.get("trials", 1000), "trials"),
        seed=_integer(data.get("seed", 0), "seed"),
    )
    if cfg.horizon < 1 or cfg.trials < 1:
        raise ConfigError("horizon and trials must be >= 1")
    return cfg


def load_config(path) -> LoopConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return parse_config(data)

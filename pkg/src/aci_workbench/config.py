"""Tolerances and pipeline configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Any

from aci_workbench.errors import ConfigError


@dataclass(frozen=True)
class Tolerances:
    """Numeric thresholds shared by every stage."""

    balance_residual: float = 1e-10
    dedupe: float = 1e-6
    integer: float = 1e-8
    compatibility: float = 1e-9
    rational: float = 1e-8
    max_denominator: int = 10**6
    membership: float = 1e-8
    bilinear: float = 1e-9
    quadrature: float = 1e-10
    involution: float = 1e-4
    block: float = 1e-8
    symmetry: float = 1e-8
    drift: float = 1e-8
    seed_agreement: float = 1e-6

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Tolerances:
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"Unknown tolerance keys: {sorted(unknown)}")
        values: dict[str, Any] = {}
        for key, value in data.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"Tolerance '{key}' must be a number, got {type(value).__name__}")
            if value <= 0:
                raise ConfigError(f"Tolerance '{key}' must be positive")
            values[key] = int(value) if key == "max_denominator" else float(value)
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()


@dataclass
class PipelineConfig:
    """Everything a pipeline run needs besides the system registry."""

    system: str
    params: dict[str, Any] = field(default_factory=dict)
    levels: list[Any] | None = None
    order: int = 8
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 0
    random_starts: int = 200
    samples: int = 40
    t_end: float = 5.0
    step: float = 0.01

    _INT_KEYS = ("order", "seed", "random_starts", "samples")
    _FLOAT_KEYS = ("t_end", "step")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PipelineConfig:
        """Validate a parsed JSON config; raise ConfigError on bad keys or types."""
        if not isinstance(data, dict):
            raise ConfigError("Config root must be an object")
        allowed = {"system", "params", "levels", "order", "tolerances", "seed", "random_starts", "samples",
                   "t_end", "step"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"Unknown config keys: {sorted(unknown)}")
        if "system" not in data:
            raise ConfigError("Missing required key: 'system'")
        if not isinstance(data["system"], str):
            raise ConfigError("'system' must be a string")

        kwargs: dict[str, Any] = {"system": data["system"]}
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("'params' must be an object")
        kwargs["params"] = params
        levels = data.get("levels")
        if levels is not None and not isinstance(levels, list):
            raise ConfigError("'levels' must be a list")
        kwargs["levels"] = levels
        for key in cls._INT_KEYS:
            if key in data:
                value = data[key]
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"'{key}' must be an integer")
                kwargs[key] = value
        for key in cls._FLOAT_KEYS:
            if key in data:
                value = data[key]
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"'{key}' must be a number")
                kwargs[key] = float(value)
        if "tolerances" in data:
            if not isinstance(data["tolerances"], dict):
                raise ConfigError("'tolerances' must be an object")
            kwargs["tolerances"] = Tolerances.from_dict(data["tolerances"])

        config = cls(**kwargs)
        config.validate()
        return config

    def validate(self) -> None:
        if self.order < 1:
            raise ConfigError("'order' must be at least 1")
        if self.random_starts < 0:
            raise ConfigError("'random_starts' must be non-negative")
        if self.samples < 4:
            raise ConfigError("'samples' must be at least 4")
        if self.t_end <= 0 or self.step <= 0:
            raise ConfigError("'t_end' and 'step' must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {
            "system": self.system,
            "params": self.params,
            "levels": self.levels,
            "order": self.order,
            "tolerances": self.tolerances.to_dict(),
            "seed": self.seed,
            "random_starts": self.random_starts,
            "samples": self.samples,
            "t_end": self.t_end,
            "step": self.step,
        }

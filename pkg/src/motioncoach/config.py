"""Pipeline configuration and its versioned JSON file form."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import InvalidConfigError, ParseError
from .feedback import ADVANCE_FRACTION, ANGULAR_TOLERANCE, POSITION_TOLERANCE, SEGMENT_COUNTS
from .verbalize import DEFAULT_MODEL, DEFAULT_TIMEOUT, DESCRIPTOR_CAP, DIRECTION_TABLE, NAIVE_THRESHOLD

CONFIG_FORMAT = "motioncoach-config"
CONFIG_VERSION = 1


@dataclass(frozen=True)
class Tolerances:
    angular: float = ANGULAR_TOLERANCE
    position: float = POSITION_TOLERANCE
    advance_fraction: float = ADVANCE_FRACTION


@dataclass(frozen=True)
class SimulateSettings:
    joint_fraction: float = 0.25
    sigma_scale: float = 0.25
    seed: int = 0


@dataclass(frozen=True)
class ForestSettings:
    n_estimators: int = 5
    max_depth: int | None = None
    seed: int = 0


@dataclass(frozen=True)
class VerbalizeSettings:
    threshold: float = NAIVE_THRESHOLD
    cap: int = DESCRIPTOR_CAP
    directions: dict = field(default_factory=lambda: {k: list(v) for k, v in DIRECTION_TABLE.items()})

    def direction_table(self) -> dict[str, tuple[str, str]]:
        return {k: (v[0], v[1]) for k, v in self.directions.items()}


@dataclass(frozen=True)
class ServiceSettings:
    endpoint: str | None = None
    credential_env: str = "MOTIONCOACH_API_KEY"
    model: str = DEFAULT_MODEL
    timeout: float = DEFAULT_TIMEOUT
    stub: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    segments: int = 4
    fast_radius: int | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    simulate: SimulateSettings = field(default_factory=SimulateSettings)
    forest: ForestSettings = field(default_factory=ForestSettings)
    verbalize: VerbalizeSettings = field(default_factory=VerbalizeSettings)
    service: ServiceSettings = field(default_factory=ServiceSettings)

    def __post_init__(self):
        if self.segments not in SEGMENT_COUNTS:
            raise InvalidConfigError(f"segments must be one of {SEGMENT_COUNTS}, got {self.segments}")
        if self.fast_radius is not None and self.fast_radius < 0:
            raise InvalidConfigError("fast_radius must be nonnegative")
        for axis in ("x", "y", "z"):
            if axis not in self.verbalize.directions or len(self.verbalize.directions[axis]) != 2:
                raise InvalidConfigError(f"direction table needs a (negative, positive) pair for axis {axis}")

    def to_dict(self) -> dict:
        return {"format": CONFIG_FORMAT, "version": CONFIG_VERSION, **asdict(self)}

    def replace(self, **changes) -> "PipelineConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return PipelineConfig(**data)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        if d.get("format", CONFIG_FORMAT) != CONFIG_FORMAT or d.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise InvalidConfigError("not a version-1 motioncoach config")
        sections = {
            "tolerances": Tolerances,
            "simulate": SimulateSettings,
            "forest": ForestSettings,
            "verbalize": VerbalizeSettings,
            "service": ServiceSettings,
        }
        kwargs = {}
        try:
            for key, value in d.items():
                if key in ("format", "version"):
                    continue
                if key in sections:
                    kwargs[key] = sections[key](**value)
                elif key in ("segments", "fast_radius"):
                    kwargs[key] = value
                else:
                    raise InvalidConfigError(f"unknown config key {key!r}")
        except TypeError as exc:
            raise InvalidConfigError(f"bad config section: {exc}") from None
        return cls(**kwargs)


def load_config(path: str | os.PathLike | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"unreadable config: {exc}", str(path)) from None
    return PipelineConfig.from_dict(doc)


def save_config(config: PipelineConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")

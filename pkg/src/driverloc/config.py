"""Run configuration: detection, fusion, classifier and input settings."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError

STAT_KINDS = ("o", "w", "g", "m")


@dataclass
class DetectionConfig:
    k: int = 26
    l0_frac: float = 0.1
    l1_frac: float = 0.9
    stat: str = "m"
    perm_B: int = 100
    alpha: float = 0.05
    sample_hz: float = 10.0
    window_secs: float = 60.0
    offset_secs: float = 30.0
    seed: int = 0

    def validate(self) -> "DetectionConfig":
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 0 < self.l0_frac <= 1 or not 0 < self.l1_frac <= 1:
            raise ConfigError("l0_frac and l1_frac must lie in (0, 1]")
        if self.l0_frac > self.l1_frac:
            raise ConfigError(f"l0_frac ({self.l0_frac}) exceeds l1_frac ({self.l1_frac})")
        if self.stat not in STAT_KINDS:
            raise ConfigError(f"stat must be one of {STAT_KINDS}, got {self.stat!r}")
        if self.perm_B < 1:
            raise ConfigError("perm_B must be >= 1")
        if not 0 <= self.alpha <= 1:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.sample_hz <= 0 or self.window_secs <= 0:
            raise ConfigError("sample_hz and window_secs must be positive")
        if not 0 <= self.offset_secs < self.window_secs:
            raise ConfigError("offset_secs must satisfy 0 <= offset < window_secs")
        return self

    def interval_bounds(self, n: int) -> tuple[int, int]:
        """Admissible changed-interval lengths (l0, l1) for a window of n samples."""
        l0 = max(2, math.ceil(self.l0_frac * n - 1e-9))
        l1 = min(n - 2, math.floor(self.l1_frac * n + 1e-9))
        return l0, l1


@dataclass
class FusionConfig:
    merge_iou: float = 0.3
    start_tol_s: float = 2.0
    end_tol_s: float = 2.0
    min_views: int = 2

    def validate(self) -> "FusionConfig":
        if not 0 <= self.merge_iou <= 1:
            raise ConfigError("merge_iou must lie in [0, 1]")
        if self.start_tol_s < 0 or self.end_tol_s < 0:
            raise ConfigError("fusion tolerances must be non-negative")
        if not 1 <= self.min_views <= 3:
            raise ConfigError("min_views must be 1, 2 or 3")
        return self


@dataclass
class ClassifierConfig:
    kind: str = "mock"  # "mock" or "http"
    endpoint: str | None = None
    template: int = 3
    error_rate: float = 0.0
    timeout_s: float = 60.0
    retries: int = 2
    clip_pattern: str = "{video_id}.mp4"

    def validate(self) -> "ClassifierConfig":
        if self.kind not in ("mock", "http"):
            raise ConfigError("classifier kind must be 'mock' or 'http'")
        if self.kind == "http" and not self.endpoint:
            raise ConfigError("http classifier needs an endpoint")
        if self.template not in (1, 2, 3):
            raise ConfigError("template must be 1, 2 or 3")
        if not 0 <= self.error_rate <= 1:
            raise ConfigError("error_rate must lie in [0, 1]")
        if self.timeout_s <= 0 or self.retries < 0:
            raise ConfigError("timeout must be positive and retries non-negative")
        return self


@dataclass
class InputConfig:
    fps: float = 30.0
    frame_w: float = 1920
    frame_h: float = 1080
    conf_threshold: float = 0.5

    def validate(self) -> "InputConfig":
        if self.fps <= 0 or self.frame_w <= 0 or self.frame_h <= 0:
            raise ConfigError("fps and frame dimensions must be positive")
        if not 0 <= self.conf_threshold <= 1:
            raise ConfigError("conf_threshold must lie in [0, 1]")
        return self


@dataclass
class RunConfig:
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    input: InputConfig = field(default_factory=InputConfig)
    tolerance_s: float = 10.0

    def validate(self) -> "RunConfig":
        self.detection.validate()
        self.fusion.validate()
        self.classifier.validate()
        self.input.validate()
        if self.tolerance_s < 0:
            raise ConfigError("tolerance_s must be non-negative")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        sections = {"detection": DetectionConfig, "fusion": FusionConfig,
                    "classifier": ClassifierConfig, "input": InputConfig}
        kwargs = {}
        for key, value in d.items():
            if key in sections:
                kwargs[key] = _build(sections[key], value)
            elif key == "tolerance_s":
                kwargs[key] = float(value)
            else:
                raise ConfigError(f"unknown config section {key!r}")
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid config JSON: {exc}") from None


def _build(klass, values: dict):
    known = {f.name for f in fields(klass)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown {klass.__name__} fields: {sorted(unknown)}")
    return klass(**values)

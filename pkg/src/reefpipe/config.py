"""Pipeline tunables: defaults, config-file loading, and override precedence.

Precedence is flags over file over defaults. The config file is flat JSON
mirroring PipelineConfig field names.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

CONFIG_ENV_VAR = "REEFPIPE_CONFIG"


@dataclass(frozen=True)
class PipelineConfig:
    input_size: int = 720
    batch_size: int = 4
    skip_interval: int = 1
    conf_threshold: float = 0.25
    assoc_iou_threshold: float = 0.3
    track_patience: int = 5
    flow_radius: int = 16
    frame_queue_capacity: int = 64
    result_queue_capacity: int = 128
    frame_queue_policy: str = "drop_oldest"
    batch_flush_ms: int = 200
    seed: int = 0
    frame_store_capacity: int = 600
    summary_length: int = 8
    detector: str = "oracle"
    noise_jitter_px: int = 0
    noise_miss_rate: float = 0.0
    noise_fp_rate: float = 0.0
    external_cmd: str = ""
    external_addr: str = ""
    external_deadline_ms: int = 2000

    def __post_init__(self):
        if self.input_size <= 0:
            raise ValueError(f"input_size must be positive, got {self.input_size}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.skip_interval < 1:
            raise ValueError(f"skip_interval must be >= 1, got {self.skip_interval}")
        if self.frame_queue_capacity < 1 or self.result_queue_capacity < 1:
            raise ValueError("queue capacities must be >= 1")
        if self.batch_size > self.frame_queue_capacity:
            raise ValueError(
                f"batch_size {self.batch_size} exceeds frame_queue_capacity "
                f"{self.frame_queue_capacity}"
            )
        for name in ("conf_threshold", "assoc_iou_threshold", "noise_miss_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.track_patience < 0:
            raise ValueError(f"track_patience must be >= 0, got {self.track_patience}")
        if self.batch_flush_ms < 0:
            raise ValueError(f"batch_flush_ms must be >= 0, got {self.batch_flush_ms}")
        if self.frame_queue_policy not in ("block", "drop_oldest"):
            raise ValueError(f"unknown frame_queue_policy: {self.frame_queue_policy}")
        if self.detector not in ("oracle", "external"):
            raise ValueError(f"unknown detector backend: {self.detector}")
        if self.noise_fp_rate < 0 or self.noise_jitter_px < 0:
            raise ValueError("noise rates must be non-negative")

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def load_config_file(path) -> dict:
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    known = set(PipelineConfig.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown config keys in {path}: {unknown}")
    return raw


def resolve_config(file_path=None, overrides: dict | None = None) -> PipelineConfig:
    """defaults <- config file <- explicit overrides (None values skipped)."""
    values: dict = {}
    if file_path:
        values.update(load_config_file(file_path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return PipelineConfig(**values)

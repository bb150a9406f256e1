"""Frame and geolocation records shared across the pipeline."""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GeoFix:
    lat: float
    lon: float
    fix_time_ms: int

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


def interpolate_geo(fixes: list[GeoFix], t: int) -> GeoFix:
    """Linearly interpolate a position at time `t` from time-ordered fixes.

    Outside the fix range the nearest endpoint is returned (clamp); an
    exact time hit returns that fix unchanged.
    """
    if not fixes:
        raise ValueError("no geolocation available")
    if t <= fixes[0].fix_time_ms:
        return fixes[0]
    if t >= fixes[-1].fix_time_ms:
        return fixes[-1]
    for earlier, later in zip(fixes, fixes[1:]):
        if earlier.fix_time_ms <= t <= later.fix_time_ms:
            span = later.fix_time_ms - earlier.fix_time_ms
            if span == 0:
                return earlier
            frac = (t - earlier.fix_time_ms) / span
            return GeoFix(
                lat=earlier.lat + frac * (later.lat - earlier.lat),
                lon=earlier.lon + frac * (later.lon - earlier.lon),
                fix_time_ms=t,
            )
    return fixes[-1]


@dataclass(eq=False)
class Frame:
    """One decoded survey frame.

    `pixels` is a row-major (height, width, 3) uint8 RGB array. `scale` is
    the factor applied relative to the original capture, so boxes measured
    on this frame map back to source coordinates by dividing through it.
    """

    frame_id: int
    timestamp_ms: int
    pixels: np.ndarray
    geo: GeoFix | None = None
    source_ref: str = ""
    scale: float = 1.0

    def __post_init__(self):
        if self.frame_id < 0:
            raise ValueError(f"frame_id must be non-negative, got {self.frame_id}")
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError(
                f"pixels must be (h, w, 3) uint8, got shape {px.shape} dtype {px.dtype}"
            )
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class FrameStore:
    """Bounded LRU of recent frames, keyed by frame_id.

    Used for rendering track crops after the fact; eviction means a crop
    degrades to a placeholder, never an error.
    """

    capacity: int = 600
    _frames: "OrderedDict[int, Frame]" = field(default_factory=OrderedDict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def put(self, frame: Frame) -> None:
        with self._lock:
            if frame.frame_id in self._frames:
                self._frames.move_to_end(frame.frame_id)
            self._frames[frame.frame_id] = frame
            while len(self._frames) > self.capacity:
                self._frames.popitem(last=False)

    def get(self, frame_id: int) -> Frame | None:
        with self._lock:
            frame = self._frames.get(frame_id)
            if frame is not None:
                self._frames.move_to_end(frame_id)
            return frame

    def __len__(self) -> int:
        with self._lock:
            return len(self._frames)

"""Deterministic synthetic survey scenes.

Moving textured rectangles on a static textured background, with exact
per-frame ground-truth boxes. Everything derives from the seed, so two
sources opened from the same spec yield byte-identical frames; objects
live in disjoint grid cells and bounce off the cell walls, which keeps
them non-overlapping for identity tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import BoundingBox
from .frames import Frame, GeoFix, interpolate_geo


@dataclass
class SyntheticSpec:
    seed: int = 0
    frames: int = 100
    width: int = 320
    height: int = 240
    objects: int = 2
    min_object_size: int = 28
    max_object_size: int = 44
    max_speed: int = 2
    frame_interval_ms: int = 100
    start_time_ms: int = 1_700_000_000_000
    geo_start: tuple = (-16.800, 145.600)
    geo_end: tuple = (-16.812, 145.631)

    @classmethod
    def from_dict(cls, raw: dict) -> "SyntheticSpec":
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {k: v for k, v in raw.items() if k in known}
        spec = cls(**kwargs)
        if spec.frames < 0 or spec.width < 8 or spec.height < 8:
            raise ValueError(f"bad synthetic spec: {raw}")
        return spec


@dataclass
class _SceneObject:
    x: int
    y: int
    w: int
    h: int
    vx: int
    vy: int
    cell: tuple  # (x0, y0, x1, y1) bounds the object stays inside
    texture: np.ndarray = field(repr=False, default=None)

    def step(self) -> None:
        x0, y0, x1, y1 = self.cell
        nx, ny = self.x + self.vx, self.y + self.vy
        if nx < x0 or nx + self.w > x1:
            self.vx = -self.vx
            nx = self.x + self.vx
        if ny < y0 or ny + self.h > y1:
            self.vy = -self.vy
            ny = self.y + self.vy
        self.x = min(max(nx, x0), x1 - self.w)
        self.y = min(max(ny, y0), y1 - self.h)

    @property
    def box(self) -> BoundingBox:
        return BoundingBox(self.x, self.y, self.w, self.h)


class SyntheticSource:
    """Iterator of Frame over a generated scene; exposes ground truth."""

    def __init__(self, spec: SyntheticSpec):
        self.spec = spec
        self.skipped = 0
        rng = np.random.default_rng(spec.seed)
        self._background = rng.integers(0, 256, (spec.height, spec.width, 3), dtype=np.uint8)
        self._objects = self._spawn_objects(rng)
        self._fixes = [
            GeoFix(spec.geo_start[0], spec.geo_start[1], spec.start_time_ms),
            GeoFix(
                spec.geo_end[0],
                spec.geo_end[1],
                spec.start_time_ms + max(1, spec.frames) * spec.frame_interval_ms,
            ),
        ]
        self._truth: dict[int, list[BoundingBox]] = {}
        self._render_all()

    def _spawn_objects(self, rng: np.random.Generator) -> list[_SceneObject]:
        spec = self.spec
        objects = []
        if spec.objects == 0:
            return objects
        cols = math.ceil(math.sqrt(spec.objects))
        rows = math.ceil(spec.objects / cols)
        cell_w = spec.width // cols
        cell_h = spec.height // rows
        for i in range(spec.objects):
            cx0 = (i % cols) * cell_w
            cy0 = (i // cols) * cell_h
            cell = (cx0 + 1, cy0 + 1, cx0 + cell_w - 1, cy0 + cell_h - 1)
            max_w = min(spec.max_object_size, cell_w - 4 - 2 * spec.max_speed)
            max_h = min(spec.max_object_size, cell_h - 4 - 2 * spec.max_speed)
            w = int(rng.integers(min(spec.min_object_size, max_w), max_w + 1))
            h = int(rng.integers(min(spec.min_object_size, max_h), max_h + 1))
            x = int(rng.integers(cell[0], cell[2] - w + 1))
            y = int(rng.integers(cell[1], cell[3] - h + 1))
            vx = int(rng.integers(-spec.max_speed, spec.max_speed + 1))
            vy = int(rng.integers(-spec.max_speed, spec.max_speed + 1))
            # brighter noise patch so objects stand out in review crops
            texture = rng.integers(80, 256, (h, w, 3), dtype=np.uint8)
            objects.append(_SceneObject(x, y, w, h, vx, vy, cell, texture))
        return objects

    def _render_all(self) -> None:
        # Pre-advancing the whole trajectory keeps truth available before
        # iteration and makes re-iteration byte-identical.
        self._positions: list[list[tuple]] = []
        for fid in range(self.spec.frames):
            self._truth[fid] = [obj.box for obj in self._objects]
            self._positions.append([(o.x, o.y, o.w, o.h) for o in self._objects])
            for obj in self._objects:
                obj.step()

    def truth(self) -> dict[int, list[BoundingBox]]:
        return {fid: list(boxes) for fid, boxes in self._truth.items()}

    def _render(self, fid: int) -> np.ndarray:
        canvas = self._background.copy()
        for obj, (x, y, w, h) in zip(self._objects, self._positions[fid]):
            canvas[y : y + h, x : x + w] = obj.texture
        return canvas

    def __iter__(self):
        spec = self.spec
        for fid in range(spec.frames):
            ts = spec.start_time_ms + fid * spec.frame_interval_ms
            yield Frame(
                frame_id=fid,
                timestamp_ms=ts,
                pixels=self._render(fid),
                geo=interpolate_geo(self._fixes, ts),
                source_ref=f"synthetic://{spec.seed}/{fid}",
            )

"""Persistent object identities across frames.

Motion between consecutive frames is estimated per track by integer block
matching (SAD search), which keeps propagation deterministic and exactly
testable on synthetic shifts. Fresh detections are linked to tracks by
greedy IoU association; unmatched detections open new tracks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .boxes import BoundingBox, clamp_into_frame, clip_to_frame, iou
from .errors import OrderingError
from .frames import Frame, FrameStore


class Provenance(Enum):
    DETECTED = "detected"
    PROPAGATED = "propagated"


class TrackState(Enum):
    ACTIVE = "active"
    LOST = "lost"
    FINALIZED = "finalized"


class ReviewLabel(Enum):
    UNREVIEWED = "unreviewed"
    TRUE_POSITIVE = "tp"
    FALSE_POSITIVE = "fp"


@dataclass(frozen=True)
class TrackPoint:
    frame_id: int
    box: BoundingBox
    confidence: float
    provenance: Provenance


@dataclass(frozen=True)
class FlowVector:
    dx: int
    dy: int
    score: float


@dataclass
class Track:
    track_id: int
    points: list = field(default_factory=list)
    state: TrackState = TrackState.ACTIVE
    misses: int = 0
    review_label: ReviewLabel = ReviewLabel.UNREVIEWED

    @property
    def current_box(self) -> BoundingBox:
        return self.points[-1].box

    @property
    def current_confidence(self) -> float:
        return self.points[-1].confidence

    @property
    def best_confidence(self) -> float:
        return max(p.confidence for p in self.points)

    @property
    def first_frame_id(self) -> int:
        return self.points[0].frame_id

    @property
    def last_frame_id(self) -> int:
        return self.points[-1].frame_id


class EventKind(Enum):
    CREATED = "created"
    UPDATED = "updated"
    LOST = "lost"
    FINALIZED = "finalized"


@dataclass(frozen=True)
class TrackEvent:
    kind: EventKind
    track_id: int
    frame_id: int
    state: TrackState
    misses: int
    point: TrackPoint | None = None


def estimate_flow(prev: Frame, cur: Frame, region: BoundingBox, radius: int) -> FlowVector:
    """Integer displacement of `region` from prev to cur by SAD search.

    Scans (dx, dy) in [-radius, radius]^2 (windows falling off the frame
    are excluded), minimizing the sum of absolute differences. Ties break
    toward smaller |dx|+|dy|, then smaller dy, then smaller dx. Score is
    1 - best_sad / worst_case_sad; a flat (zero-variance) patch returns
    (0, 0) with score 0.
    """
    if prev.pixels.shape != cur.pixels.shape:
        raise ValueError("frames must have identical dimensions")
    h, w = prev.height, prev.width
    if region.x < 0 or region.y < 0 or region.x2 > w or region.y2 > h:
        raise ValueError(f"region {region} outside {w}x{h} frame")
    patch = prev.pixels[region.y : region.y2, region.x : region.x2]
    if int(patch.max()) == int(patch.min()):
        return FlowVector(0, 0, 0.0)
    patch_t = patch.astype(np.int16).transpose(2, 0, 1)  # (3, h, w)
    worst = 255 * patch.size

    dy_lo, dy_hi = max(-radius, -region.y), min(radius, h - region.y2)
    dx_lo, dx_hi = max(-radius, -region.x), min(radius, w - region.x2)
    ndx = dx_hi - dx_lo + 1
    ndy = dy_hi - dy_lo + 1
    sad = np.empty((ndy, ndx), dtype=np.int64)
    for i, dy in enumerate(range(dy_lo, dy_hi + 1)):
        slab = cur.pixels[
            region.y + dy : region.y2 + dy, region.x + dx_lo : region.x2 + dx_hi
        ].astype(np.int16)
        windows = sliding_window_view(slab, (region.h, region.w), axis=(0, 1))
        sad[i] = np.abs(windows - patch_t).sum(axis=(2, 3, 4), dtype=np.int64)[0]

    dys, dxs = np.meshgrid(
        np.arange(dy_lo, dy_hi + 1), np.arange(dx_lo, dx_hi + 1), indexing="ij"
    )
    dys, dxs = dys.ravel(), dxs.ravel()
    manhattan = np.abs(dys) + np.abs(dxs)
    order = np.lexsort((dxs, dys, manhattan, sad.ravel()))
    best = order[0]
    score = 1.0 - sad.ravel()[best] / worst
    return FlowVector(int(dxs[best]), int(dys[best]), float(score))


def propagate_tracks(tracks: list, prev: Frame, cur: Frame, radius: int = 16) -> list:
    """Advance every active track to `cur` with a Propagated point.

    The track box is translated by its region's flow vector and clamped so
    it keeps a non-empty intersection with the frame. Misses are not
    touched; propagation is not a miss.
    """
    for track in tracks:
        box = track.current_box
        region = clip_to_frame(box, prev.width, prev.height)
        if region is None:
            flow = FlowVector(0, 0, 0.0)
        else:
            flow = estimate_flow(prev, cur, region, radius)
        new_box = clamp_into_frame(box.translated(flow.dx, flow.dy), cur.width, cur.height)
        track.points.append(
            TrackPoint(cur.frame_id, new_box, track.current_confidence, Provenance.PROPAGATED)
        )
    return tracks


def associate(dets: list, tracks: list, iou_tau: float) -> tuple:
    """Greedy IoU matching of one frame's detections against active tracks.

    Candidate pairs with IoU >= iou_tau (and non-zero overlap) are taken in
    descending IoU order, ties broken by lower track_id then lower
    detection index; each side is used at most once. Returns
    (matches as (det_index, track) pairs, unmatched det indices,
    unmatched tracks).
    """
    pairs = []
    for ti, track in enumerate(tracks):
        for di, det in enumerate(dets):
            overlap = iou(det.box, track.current_box)
            if overlap >= iou_tau and overlap > 0.0:
                pairs.append((overlap, track.track_id, di, ti))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    matches = []
    used_dets: set = set()
    used_tracks: set = set()
    for _, _, di, ti in pairs:
        if di in used_dets or ti in used_tracks:
            continue
        matches.append((di, tracks[ti]))
        used_dets.add(di)
        used_tracks.add(ti)
    unmatched_dets = [i for i in range(len(dets)) if i not in used_dets]
    unmatched_tracks = [t for i, t in enumerate(tracks) if i not in used_tracks]
    return matches, unmatched_dets, unmatched_tracks


class Tracker:
    """Single-consumer track state machine over an ordered frame stream."""

    def __init__(
        self,
        assoc_iou_threshold: float = 0.3,
        track_patience: int = 5,
        flow_radius: int = 16,
        frame_store_capacity: int = 600,
    ):
        self.assoc_iou_threshold = assoc_iou_threshold
        self.track_patience = track_patience
        self.flow_radius = flow_radius
        self.frame_store = FrameStore(capacity=frame_store_capacity)
        self.active: list[Track] = []
        self.closed: list[Track] = []
        self.prev_frame: Frame | None = None
        self.last_frame_id = -1
        self.next_track_id = 0

    def step(self, frame: Frame, dets: list | None = None) -> list:
        """Process one frame; dets is None on propagate-only frames.

        Returns the track events produced at this frame.
        """
        if frame.frame_id <= self.last_frame_id:
            raise OrderingError(
                f"frame {frame.frame_id} after {self.last_frame_id}; "
                "tracker requires strictly increasing frame ids"
            )
        created: list[Track] = []
        lost: list[Track] = []

        if self.prev_frame is not None and self.active:
            propagate_tracks(self.active, self.prev_frame, frame, self.flow_radius)

        if dets is not None:
            matches, unmatched_dets, unmatched_tracks = associate(
                dets, self.active, self.assoc_iou_threshold
            )
            for di, track in matches:
                det = dets[di]
                if track.points and track.points[-1].frame_id == frame.frame_id:
                    track.points.pop()  # detection supersedes this frame's propagation
                box = clamp_into_frame(det.box, frame.width, frame.height)
                track.points.append(
                    TrackPoint(frame.frame_id, box, det.confidence, Provenance.DETECTED)
                )
                track.misses = 0
            for track in unmatched_tracks:
                if track.misses > self.track_patience:
                    track.state = TrackState.LOST
                    lost.append(track)
                else:
                    track.misses += 1
            for di in unmatched_dets:
                det = dets[di]
                box = clamp_into_frame(det.box, frame.width, frame.height)
                track = Track(
                    track_id=self.next_track_id,
                    points=[TrackPoint(frame.frame_id, box, det.confidence, Provenance.DETECTED)],
                )
                self.next_track_id += 1
                self.active.append(track)
                created.append(track)
            for track in lost:
                self.active.remove(track)
                self.closed.append(track)

        self.frame_store.put(frame)
        self.prev_frame = frame
        self.last_frame_id = frame.frame_id
        return self._events(frame.frame_id, created, lost)

    def _events(self, frame_id: int, created: list, lost: list) -> list:
        events = []
        created_ids = {t.track_id for t in created}
        lost_ids = {t.track_id for t in lost}
        for track in self.active:
            if not track.points or track.points[-1].frame_id != frame_id:
                continue
            kind = EventKind.CREATED if track.track_id in created_ids else EventKind.UPDATED
            events.append(
                TrackEvent(kind, track.track_id, frame_id, track.state, track.misses, track.points[-1])
            )
        for track in lost:
            if track.points and track.points[-1].frame_id == frame_id:
                events.append(
                    TrackEvent(
                        EventKind.UPDATED, track.track_id, frame_id,
                        TrackState.ACTIVE, track.misses, track.points[-1],
                    )
                )
            events.append(
                TrackEvent(EventKind.LOST, track.track_id, frame_id, track.state, track.misses)
            )
        return events

    def finalize(self) -> list:
        """Close out remaining active tracks at end of stream."""
        events = []
        for track in self.active:
            track.state = TrackState.FINALIZED
            self.closed.append(track)
            events.append(
                TrackEvent(
                    EventKind.FINALIZED, track.track_id, self.last_frame_id,
                    track.state, track.misses,
                )
            )
        self.active = []
        return events

    def all_tracks(self) -> list:
        return sorted(self.closed + self.active, key=lambda t: t.track_id)


@dataclass(frozen=True)
class CropEntry:
    frame_id: int
    provenance: Provenance
    confidence: float
    region: BoundingBox
    image: np.ndarray | None  # None when the frame was evicted from the store

    @property
    def placeholder(self) -> bool:
        return self.image is None


def _summary_indices(points: list, n: int) -> list:
    count = len(points)
    if count <= n:
        return list(range(count))
    sel = sorted({round(i * (count - 1) / (n - 1)) for i in range(n)})
    detected = [i for i, p in enumerate(points) if p.provenance is Provenance.DETECTED]
    forced = {detected[0], detected[-1]} if detected else set()
    for want in sorted(forced):
        if want in sel:
            continue
        replaceable = [i for i in sel if i not in forced]
        if not replaceable:
            continue
        nearest = min(replaceable, key=lambda i: abs(i - want))
        sel.remove(nearest)
        sel.append(want)
        sel.sort()
    return sel


def summarize_track(track: Track, frame_store: FrameStore, n: int = 8) -> list:
    """Up to `n` evenly spaced crops over the track, padded 20% per side.

    The first and last Detected points are always represented. Frames no
    longer in the store yield placeholder entries instead of images.
    """
    entries = []
    for idx in _summary_indices(track.points, n):
        point = track.points[idx]
        box = point.box
        pad_x = round(0.2 * box.w)
        pad_y = round(0.2 * box.h)
        region = BoundingBox(box.x - pad_x, box.y - pad_y, box.w + 2 * pad_x, box.h + 2 * pad_y)
        frame = frame_store.get(point.frame_id)
        image = None
        clipped = region
        if frame is not None:
            clipped = clip_to_frame(region, frame.width, frame.height) or region
            image = frame.pixels[clipped.y : clipped.y2, clipped.x : clipped.x2].copy()
        entries.append(CropEntry(point.frame_id, point.provenance, point.confidence, clipped, image))
    return entries


def track_to_record(track: Track) -> dict:
    """Track export record: one JSON-serializable dict per track."""
    return {
        "track_id": track.track_id,
        "state": track.state.value,
        "review_label": track.review_label.value,
        "points": [
            {
                "frame_id": p.frame_id,
                "x": p.box.x,
                "y": p.box.y,
                "w": p.box.w,
                "h": p.box.h,
                "conf": round(p.confidence, 6),
                "provenance": p.provenance.value,
            }
            for p in track.points
        ],
    }


def record_to_track(record: dict) -> Track:
    return Track(
        track_id=record["track_id"],
        state=TrackState(record["state"]),
        review_label=ReviewLabel(record["review_label"]),
        points=[
            TrackPoint(
                frame_id=p["frame_id"],
                box=BoundingBox(p["x"], p["y"], p["w"], p["h"]),
                confidence=p["conf"],
                provenance=Provenance(p["provenance"]),
            )
            for p in record["points"]
        ],
    )

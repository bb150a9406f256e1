"""HTTP/JSON review service over the track store.

Paths are fixed API surface:
  GET  /api/tracks                      filtered, paginated summaries
  GET  /api/tracks/{id}                 full track + crop references
  GET  /api/tracks/{id}/crops/{n}       crop JPEG
  POST /api/tracks/{id}/label           {"verdict": "tp"|"fp", "reviewer": ...}
  GET  /api/stats                       pipeline metrics snapshot
  GET  /api/events                      SSE stream, event ids as cursors
The browser console is served from / when a built UI directory exists.
"""

from __future__ import annotations

import json
import logging
import threading
from collections import OrderedDict
from pathlib import Path
from typing import Callable, Literal, Optional

import cv2
import numpy as np
from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import Response, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .pipeline import StageMetrics
from .store import TrackStore
from .tracker import summarize_track

logger = logging.getLogger(__name__)

SSE_KEEPALIVE_S = 15.0


class BoxModel(BaseModel):
    x: int
    y: int
    w: int
    h: int


class TrackSummaryModel(BaseModel):
    track_id: int
    state: str
    review_label: str
    point_count: int
    first_frame_id: int
    last_frame_id: int
    first_timestamp_ms: Optional[int] = None
    best_confidence: float
    last_box: BoxModel
    last_provenance: str
    geo: Optional[dict] = None
    updated_seq: int


class TracksPageModel(BaseModel):
    tracks: list[TrackSummaryModel]
    page: int
    page_size: int
    total: int


class TrackPointModel(BaseModel):
    frame_id: int
    x: int
    y: int
    w: int
    h: int
    conf: float
    provenance: str


class CropRefModel(BaseModel):
    index: int
    frame_id: int
    provenance: str
    confidence: float
    placeholder: bool
    url: str


class TrackDetailModel(BaseModel):
    summary: TrackSummaryModel
    points: list[TrackPointModel]
    crops: list[CropRefModel]


class LabelRequest(BaseModel):
    verdict: Literal["tp", "fp"]
    reviewer: str = Field(default="", max_length=200)


class LabelAck(BaseModel):
    track_id: int
    verdict: str
    reviewer: str
    labeled_at_ms: int


class _CropCache:
    """Bounded cache of encoded crop JPEGs keyed per track revision."""

    def __init__(self, capacity: int = 512):
        self.capacity = capacity
        self._items: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def get_or_render(self, key, render: Callable):
        with self._lock:
            if key in self._items:
                self._items.move_to_end(key)
                return self._items[key]
        value = render()
        with self._lock:
            self._items[key] = value
            self._items.move_to_end(key)
            while len(self._items) > self.capacity:
                self._items.popitem(last=False)
        return value


PLACEHOLDER_TILE_PX = 64


def _encode_jpeg(image: np.ndarray) -> bytes:
    ok, buf = cv2.imencode(".jpg", cv2.cvtColor(image, cv2.COLOR_RGB2BGR))
    if not ok:
        raise RuntimeError("JPEG encoding failed")
    return bytes(buf)


def _placeholder_tile() -> bytes:
    tile = np.full((PLACEHOLDER_TILE_PX, PLACEHOLDER_TILE_PX, 3), 96, dtype=np.uint8)
    return _encode_jpeg(tile)


def _sse_chunk(event: str, payload: dict, event_id: int | None = None) -> str:
    lines = []
    if event_id is not None:
        lines.append(f"id: {event_id}")
    lines.append(f"event: {event}")
    lines.append(f"data: {json.dumps(payload)}")
    return "\n".join(lines) + "\n\n"


def create_app(
    store: TrackStore,
    frame_supplier=None,
    metrics_provider: Callable | None = None,
    summary_length: int = 8,
    ui_dir=None,
    sse_keepalive_s: float = SSE_KEEPALIVE_S,
) -> FastAPI:
    """Assemble the review service around a store and a frame supplier.

    `frame_supplier` is anything with get(frame_id) -> Frame | None (the
    tracker's in-memory LRU during a live run, a DiskFrameStore afterward).
    `metrics_provider` returns the current StageMetrics snapshot.
    """
    app = FastAPI(title="reefpipe review service")
    crop_cache = _CropCache()

    def _summaries_for(track, summary):
        key = (track.track_id, len(track.points))
        def render():
            if frame_supplier is None:
                entries = summarize_track(track, _EmptySupplier(), summary_length)
            else:
                entries = summarize_track(track, frame_supplier, summary_length)
            encoded = []
            for entry in entries:
                data = None if entry.image is None else _encode_jpeg(entry.image)
                encoded.append((entry, data))
            return encoded
        return crop_cache.get_or_render(key, render)

    @app.get("/api/tracks", response_model=TracksPageModel)
    def list_tracks(
        state: Optional[str] = None,
        label: Optional[str] = None,
        unreviewed_only: bool = False,
        page: int = Query(default=0, ge=0),
        page_size: int = Query(default=50, ge=1, le=500),
    ):
        return store.summaries(
            state=state,
            label=label,
            unreviewed_only=unreviewed_only,
            page=page,
            page_size=page_size,
        )

    @app.get("/api/tracks/{track_id}", response_model=TrackDetailModel)
    def get_track(track_id: int):
        try:
            track, summary = store.get_track(track_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown track {track_id}")
        entries = _summaries_for(track, summary)
        crops = [
            CropRefModel(
                index=i,
                frame_id=entry.frame_id,
                provenance=entry.provenance.value,
                confidence=entry.confidence,
                placeholder=data is None,
                url=f"/api/tracks/{track_id}/crops/{i}",
            )
            for i, (entry, data) in enumerate(entries)
        ]
        points = [
            TrackPointModel(
                frame_id=p.frame_id,
                x=p.box.x, y=p.box.y, w=p.box.w, h=p.box.h,
                conf=p.confidence,
                provenance=p.provenance.value,
            )
            for p in track.points
        ]
        return {"summary": summary, "points": points, "crops": crops}

    @app.get("/api/tracks/{track_id}/crops/{n}")
    def get_crop(track_id: int, n: int):
        try:
            track, summary = store.get_track(track_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown track {track_id}")
        entries = _summaries_for(track, summary)
        if n < 0 or n >= len(entries):
            raise HTTPException(status_code=404, detail=f"no crop {n} on track {track_id}")
        _, data = entries[n]
        if data is None:
            data = _placeholder_tile()
        return Response(content=data, media_type="image/jpeg")

    @app.post("/api/tracks/{track_id}/label", response_model=LabelAck)
    def label_track(track_id: int, body: LabelRequest):
        try:
            record = store.label_track(track_id, body.verdict, body.reviewer)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown track {track_id}")
        return record.to_dict()

    @app.get("/api/stats")
    def stats():
        metrics = metrics_provider() if metrics_provider else StageMetrics()
        return {"metrics": metrics.to_dict(), "review": store.review_counts()}

    @app.get("/api/events")
    def events(request: Request, since: Optional[int] = None):
        cursor = since
        if cursor is None:
            header = request.headers.get("last-event-id")
            if header and header.isdigit():
                cursor = int(header)
        start = cursor or 0

        def stream():
            cur = start
            while True:
                newer, missed = store.events_after(cur)
                if missed:
                    yield _sse_chunk("gap", {"missed": missed})
                    cur += missed
                for ev in newer:
                    yield _sse_chunk(ev.kind, ev.payload, ev.event_id)
                    cur = ev.event_id
                if not store.wait_for_events(cur, sse_keepalive_s):
                    yield ": keepalive\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/")
        def index():
            return {
                "service": "reefpipe review",
                "endpoints": [
                    "/api/tracks", "/api/tracks/{id}", "/api/tracks/{id}/crops/{n}",
                    "/api/tracks/{id}/label", "/api/stats", "/api/events",
                ],
            }

    return app


class _EmptySupplier:
    def get(self, frame_id):
        return None


class MetricsTicker:
    """Pushes a MetricsTick event into the store at a fixed interval."""

    def __init__(self, store: TrackStore, provider: Callable, interval_s: float = 1.0):
        self.store = store
        self.provider = provider
        self.interval_s = interval_s
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, name="reefpipe-metrics", daemon=True)

    def start(self) -> "MetricsTicker":
        self._thread.start()
        return self

    def _loop(self) -> None:
        while not self._stop.wait(self.interval_s):
            try:
                self.store.emit_metrics(self.provider())
            except Exception:  # noqa: BLE001 - ticker must never kill the service
                logger.exception("metrics tick failed")

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2)

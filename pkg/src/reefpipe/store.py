"""Live track store backing the review service.

Single-writer (the tracker event applier), multi-reader: readers get
copies, never live references. Review labels are append-only JSONL with
latest-wins semantics, fsynced before the call returns so an acknowledged
verdict survives a crash. Store events (track lifecycle, labels, metrics
ticks) go into a bounded ring; subscribers keep their own cursor and see a
gap marker if they fall behind the ring.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .frames import GeoFix
from .tracker import EventKind, ReviewLabel, Track, record_to_track, track_to_record

logger = logging.getLogger(__name__)

VALID_VERDICTS = ("tp", "fp")


@dataclass(frozen=True)
class LabelRecord:
    track_id: int
    verdict: str
    reviewer: str
    labeled_at_ms: int

    def to_dict(self) -> dict:
        return {
            "track_id": self.track_id,
            "verdict": self.verdict,
            "reviewer": self.reviewer,
            "labeled_at_ms": self.labeled_at_ms,
        }


@dataclass(frozen=True)
class StoreEvent:
    event_id: int
    kind: str  # TrackCreated | TrackUpdated | TrackLost | TrackLabeled | MetricsTick
    payload: dict


@dataclass
class _Replica:
    track: Track
    updated_seq: int = 0
    first_geo: GeoFix | None = None
    first_timestamp_ms: int | None = None


class TrackStore:
    def __init__(self, labels_path=None, event_buffer: int = 1024):
        self._lock = threading.RLock()
        self._new_events = threading.Condition(self._lock)
        self._replicas: dict[int, _Replica] = {}
        self._seq = 0
        self._events: deque = deque(maxlen=event_buffer)
        self._next_event_id = 1
        self._labels_current: dict[int, LabelRecord] = {}
        self._labels_history: list[LabelRecord] = []
        self._labels_path = Path(labels_path) if labels_path else None
        self._labels_file = None
        if self._labels_path is not None:
            self._replay_labels()
            self._labels_path.parent.mkdir(parents=True, exist_ok=True)
            self._labels_file = open(self._labels_path, "a", encoding="utf-8")

    # -- construction ------------------------------------------------------

    @classmethod
    def load(cls, run_dir, event_buffer: int = 1024) -> "TrackStore":
        """Rebuild a store from a run directory (tracks.jsonl + labels.jsonl)."""
        run_dir = Path(run_dir)
        store = cls(labels_path=run_dir / "labels.jsonl", event_buffer=event_buffer)
        tracks_path = run_dir / "tracks.jsonl"
        if tracks_path.is_file():
            for line in tracks_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                track = record_to_track(json.loads(line))
                store._ingest_loaded_track(track)
        return store

    def _ingest_loaded_track(self, track: Track) -> None:
        with self._lock:
            self._seq += 1
            self._replicas[track.track_id] = _Replica(track=track, updated_seq=self._seq)

    def _replay_labels(self) -> None:
        if not self._labels_path.is_file():
            return
        for line in self._labels_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            record = LabelRecord(
                track_id=int(rec["track_id"]),
                verdict=rec["verdict"],
                reviewer=rec.get("reviewer", ""),
                labeled_at_ms=int(rec.get("labeled_at_ms", 0)),
            )
            self._labels_history.append(record)
            self._labels_current[record.track_id] = record

    def close(self) -> None:
        with self._lock:
            if self._labels_file is not None:
                self._labels_file.close()
                self._labels_file = None

    # -- writer side (tracker sink) -----------------------------------------

    def apply_events(self, events: list, geo: GeoFix | None = None,
                     timestamp_ms: int | None = None) -> None:
        """Apply one frame's tracker events; the single-writer entry point."""
        with self._lock:
            for ev in events:
                replica = self._replicas.get(ev.track_id)
                if ev.kind is EventKind.CREATED:
                    track = Track(
                        track_id=ev.track_id,
                        points=[ev.point],
                        state=ev.state,
                        misses=ev.misses,
                    )
                    self._seq += 1
                    self._replicas[ev.track_id] = _Replica(
                        track=track,
                        updated_seq=self._seq,
                        first_geo=geo,
                        first_timestamp_ms=timestamp_ms,
                    )
                    self._emit("TrackCreated", {"track": self._summary_locked(ev.track_id)})
                    continue
                if replica is None:
                    logger.warning("event for unknown track %d dropped", ev.track_id)
                    continue
                track = replica.track
                if ev.point is not None:
                    if track.points and track.points[-1].frame_id == ev.point.frame_id:
                        track.points[-1] = ev.point
                    else:
                        track.points.append(ev.point)
                track.state = ev.state
                track.misses = ev.misses
                self._seq += 1
                replica.updated_seq = self._seq
                if ev.kind is EventKind.LOST:
                    self._emit("TrackLost", {"track": self._summary_locked(ev.track_id)})
                else:
                    self._emit("TrackUpdated", {"track": self._summary_locked(ev.track_id)})

    def emit_metrics(self, metrics) -> None:
        with self._lock:
            self._emit("MetricsTick", {"metrics": metrics.to_dict()})

    def _emit(self, kind: str, payload: dict) -> None:
        event = StoreEvent(self._next_event_id, kind, payload)
        self._next_event_id += 1
        self._events.append(event)
        self._new_events.notify_all()

    # -- labels --------------------------------------------------------------

    def label_track(self, track_id: int, verdict: str, reviewer: str = "") -> LabelRecord:
        """Persist a verdict durably, then acknowledge and emit the event."""
        if verdict not in VALID_VERDICTS:
            raise ValueError(f"verdict must be one of {VALID_VERDICTS}, got {verdict!r}")
        with self._lock:
            if track_id not in self._replicas:
                raise KeyError(f"unknown track {track_id}")
            record = LabelRecord(
                track_id=track_id,
                verdict=verdict,
                reviewer=reviewer,
                labeled_at_ms=int(time.time() * 1000),
            )
            if self._labels_file is not None:
                self._labels_file.write(json.dumps(record.to_dict()) + "\n")
                self._labels_file.flush()
                os.fsync(self._labels_file.fileno())
            self._labels_history.append(record)
            self._labels_current[track_id] = record
            self._emit("TrackLabeled", {
                "track_id": track_id,
                "verdict": verdict,
                "reviewer": reviewer,
            })
            return record

    def current_label(self, track_id: int) -> ReviewLabel:
        with self._lock:
            record = self._labels_current.get(track_id)
            if record is None:
                return ReviewLabel.UNREVIEWED
            return ReviewLabel(record.verdict)

    def label_history(self) -> list:
        with self._lock:
            return list(self._labels_history)

    # -- readers ---------------------------------------------------------------

    def _summary_locked(self, track_id: int) -> dict:
        replica = self._replicas[track_id]
        track = replica.track
        last = track.points[-1]
        label = self._labels_current.get(track_id)
        return {
            "track_id": track.track_id,
            "state": track.state.value,
            "review_label": label.verdict if label else ReviewLabel.UNREVIEWED.value,
            "point_count": len(track.points),
            "first_frame_id": track.first_frame_id,
            "last_frame_id": track.last_frame_id,
            "first_timestamp_ms": replica.first_timestamp_ms,
            "best_confidence": round(track.best_confidence, 6),
            "last_box": {"x": last.box.x, "y": last.box.y, "w": last.box.w, "h": last.box.h},
            "last_provenance": last.provenance.value,
            "geo": (
                {"lat": replica.first_geo.lat, "lon": replica.first_geo.lon}
                if replica.first_geo
                else None
            ),
            "updated_seq": replica.updated_seq,
        }

    def summaries(
        self,
        state: str | None = None,
        label: str | None = None,
        unreviewed_only: bool = False,
        page: int = 0,
        page_size: int = 50,
    ) -> dict:
        """Filtered track summaries, newest update first, stable pagination."""
        with self._lock:
            rows = []
            for tid, replica in self._replicas.items():
                current = self._labels_current.get(tid)
                effective = current.verdict if current else ReviewLabel.UNREVIEWED.value
                if state is not None and replica.track.state.value != state:
                    continue
                if label is not None and effective != label:
                    continue
                if unreviewed_only and effective != ReviewLabel.UNREVIEWED.value:
                    continue
                rows.append(self._summary_locked(tid))
            rows.sort(key=lambda r: (-r["updated_seq"], -r["track_id"]))
            total = len(rows)
            start = page * page_size
            return {
                "tracks": rows[start : start + page_size],
                "page": page,
                "page_size": page_size,
                "total": total,
            }

    def get_track(self, track_id: int) -> tuple:
        """Returns (track copy, summary dict); KeyError when unknown."""
        with self._lock:
            if track_id not in self._replicas:
                raise KeyError(f"unknown track {track_id}")
            replica = self._replicas[track_id]
            source = replica.track
            copy = Track(
                track_id=source.track_id,
                points=list(source.points),
                state=source.state,
                misses=source.misses,
                review_label=self.current_label(track_id),
            )
            return copy, self._summary_locked(track_id)

    def all_tracks(self) -> list:
        """Label-merged copies of every track, ordered by id (export view)."""
        with self._lock:
            out = []
            for tid in sorted(self._replicas):
                copy, _ = self.get_track(tid)
                out.append(copy)
            return out

    def review_counts(self) -> dict:
        with self._lock:
            total = len(self._replicas)
            reviewed = sum(1 for tid in self._replicas if tid in self._labels_current)
            return {"tracks": total, "reviewed": reviewed, "unreviewed": total - reviewed}

    # -- event stream ------------------------------------------------------------

    def events_after(self, cursor: int) -> tuple:
        """(events newer than cursor, missed count evicted from the ring)."""
        with self._lock:
            newer = [e for e in self._events if e.event_id > cursor]
            missed = 0
            if newer:
                first_available = newer[0].event_id
                if cursor + 1 < first_available:
                    missed = first_available - cursor - 1
            elif self._events and cursor + 1 <= self._events[-1].event_id:
                missed = self._events[-1].event_id - cursor
            elif not self._events and cursor + 1 < self._next_event_id:
                missed = self._next_event_id - 1 - cursor
            return newer, missed

    def wait_for_events(self, cursor: int, timeout: float) -> bool:
        with self._new_events:
            if self._next_event_id - 1 > cursor:
                return True
            return self._new_events.wait(timeout)

    def latest_event_id(self) -> int:
        with self._lock:
            return self._next_event_id - 1

    # -- export view ----------------------------------------------------------

    def export_records(self, labeled_only: bool = False) -> list:
        """Track export records with effective labels merged in.

        labeled_only keeps only tracks whose current verdict is tp,
        excluding false positives and unreviewed tracks.
        """
        records = []
        for track in self.all_tracks():
            if labeled_only and track.review_label is not ReviewLabel.TRUE_POSITIVE:
                continue
            records.append(track_to_record(track))
        return records


class StoreSink:
    """Pipeline sink feeding tracker events into a TrackStore."""

    def __init__(self, store: TrackStore):
        self.store = store
        self._geo: GeoFix | None = None
        self._timestamp_ms: int | None = None

    def on_frame(self, frame, dets) -> None:
        self._geo = frame.geo
        self._timestamp_ms = frame.timestamp_ms

    def on_events(self, events) -> None:
        self.store.apply_events(events, geo=self._geo, timestamp_ms=self._timestamp_ms)

    def close(self, tracks) -> None:
        pass

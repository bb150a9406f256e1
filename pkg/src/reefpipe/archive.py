"""Data archiver: streaming frame persistence and curated export.

During a run the ArchiveSink mirrors every processed frame into the run
directory (frames/ + metadata.jsonl) on a dedicated writer thread and
writes tracks.jsonl at shutdown. export_archive snapshots a curated copy
with labels and a hashed manifest.
"""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
import threading
import time
from pathlib import Path

import cv2

from .errors import ExportError, StorageError
from .frames import Frame, FrameStore
from .ingest import FrameRecordWriter, read_metadata
from .pipeline import Sink
from .queues import END_OF_STREAM, BoundedQueue, OfferPolicy
from .tracker import track_to_record

logger = logging.getLogger(__name__)


class ArchiveSink(Sink):
    """Pipeline sink persisting frames and final tracks to a run directory."""

    def __init__(self, run_dir, queue_capacity: int = 256):
        self.run_dir = Path(run_dir)
        self.writer = FrameRecordWriter(self.run_dir)
        self._q = BoundedQueue(queue_capacity)
        self._error: StorageError | None = None
        self._thread = threading.Thread(target=self._write_loop, name="reefpipe-archive", daemon=True)
        self._thread.start()

    def _write_loop(self) -> None:
        while True:
            item = self._q.take()
            if item is END_OF_STREAM:
                return
            try:
                self.writer.write(item)
            except StorageError as exc:
                self._error = exc
                self._q.close()
                return

    def on_frame(self, frame: Frame, dets) -> None:
        if self._error is not None:
            raise self._error
        self._q.offer(frame, OfferPolicy.BLOCK)

    def close(self, tracks: list) -> None:
        self._q.close()
        self._thread.join()
        self.writer.close()
        if self._error is not None:
            raise self._error
        write_tracks_jsonl(self.run_dir / "tracks.jsonl", tracks)


def write_tracks_jsonl(path, tracks: list) -> None:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for track in sorted(tracks, key=lambda t: t.track_id):
                fh.write(json.dumps(track_to_record(track)) + "\n")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def read_tracks_jsonl(path) -> list:
    from .tracker import record_to_track

    path = Path(path)
    if not path.is_file():
        return []
    return [
        record_to_track(json.loads(line))
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


class DiskFrameStore:
    """Frame supplier over an archived corpus, for serving crops after a run."""

    def __init__(self, run_dir, cache_capacity: int = 64):
        self.run_dir = Path(run_dir)
        self.frames_dir = self.run_dir / "frames"
        self._meta = read_metadata(self.run_dir / "metadata.jsonl")
        self._cache = FrameStore(capacity=cache_capacity)

    def get(self, frame_id: int) -> Frame | None:
        cached = self._cache.get(frame_id)
        if cached is not None:
            return cached
        path = self.frames_dir / f"frame_{frame_id:06d}.jpg"
        if not path.is_file():
            return None
        img = cv2.imread(str(path), cv2.IMREAD_COLOR)
        if img is None:
            return None
        meta = self._meta.get(frame_id, {})
        frame = Frame(
            frame_id=frame_id,
            timestamp_ms=int(meta.get("timestamp_ms") or 0),
            pixels=cv2.cvtColor(img, cv2.COLOR_BGR2RGB),
            source_ref=meta.get("source_ref") or str(path),
        )
        self._cache.put(frame)
        return frame


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def export_archive(store, dest, include: str = "all", run_dir=None, config: dict | None = None) -> dict:
    """Write the curated archive (frames, metadata, tracks, labels, manifest).

    `include` is "all" or "labeled-only"; labeled-only keeps only tracks
    whose current verdict is a true positive. The destination must be a
    new or empty directory; on any failure partial output is removed.
    """
    if include not in ("all", "labeled-only"):
        raise ValueError(f"include must be 'all' or 'labeled-only', got {include!r}")
    dest = Path(dest)
    if dest.exists() and any(dest.iterdir()):
        raise ExportError(f"destination {dest} is not empty")
    created = not dest.exists()
    try:
        dest.mkdir(parents=True, exist_ok=True)
        frames_written = 0
        frames_src = Path(run_dir) / "frames" if run_dir else None
        if frames_src and frames_src.is_dir():
            (dest / "frames").mkdir()
            for path in sorted(frames_src.iterdir()):
                if path.suffix.lower() in (".jpg", ".jpeg", ".png"):
                    shutil.copy2(path, dest / "frames" / path.name)
                    frames_written += 1
        meta_src = Path(run_dir) / "metadata.jsonl" if run_dir else None
        if meta_src and meta_src.is_file():
            shutil.copy2(meta_src, dest / "metadata.jsonl")
        else:
            (dest / "metadata.jsonl").touch()

        records = store.export_records(labeled_only=(include == "labeled-only"))
        with open(dest / "tracks.jsonl", "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")
        with open(dest / "labels.jsonl", "w", encoding="utf-8") as fh:
            for record in store.label_history():
                fh.write(json.dumps(record.to_dict()) + "\n")

        labeled = sum(1 for r in records if r["review_label"] != "unreviewed")
        files = {}
        for path in sorted(dest.rglob("*")):
            if path.is_file():
                files[str(path.relative_to(dest))] = _sha256(path)
        manifest = {
            "export_time_ms": int(time.time() * 1000),
            "config": config or {},
            "counts": {"tracks": len(records), "labeled": labeled, "frames": frames_written},
            "files": files,
        }
        (dest / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        return manifest
    except ExportError:
        raise
    except Exception as exc:
        if created:
            shutil.rmtree(dest, ignore_errors=True)
        else:
            for child in dest.iterdir():
                if child.is_dir():
                    shutil.rmtree(child, ignore_errors=True)
                else:
                    child.unlink(missing_ok=True)
        raise ExportError(f"export to {dest} failed: {exc}") from exc

"""Frame sources, resizing, and frame-record persistence.

The canonical corpus layout is a directory holding `frames/frame_%06d.jpg`
plus a `metadata.jsonl` sidecar (one JSON object per line) and optionally
`annotations.csv` with columns `frame_id,annotations`, where annotations
is a JSON list of {"x","y","width","height"} boxes.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from pathlib import Path
from typing import Iterator, Union

import cv2

from .boxes import BoundingBox
from .errors import SourceError, StorageError
from .frames import Frame, GeoFix, interpolate_geo
from .synthetic import SyntheticSource, SyntheticSpec

logger = logging.getLogger(__name__)

FRAME_FILE_RE = re.compile(r"^frame_(\d{6})\.(jpe?g|png)$", re.IGNORECASE)
DEFAULT_FRAME_INTERVAL_MS = 100

FrameSource = Union["DirectorySource", SyntheticSource]

__all__ = [
    "DirectorySource",
    "FrameRecordWriter",
    "FrameSource",
    "GeoFix",
    "interpolate_geo",
    "open_source",
    "read_annotations",
    "read_metadata",
    "resize_frame",
    "write_annotations",
    "write_frame_record",
]


class DirectorySource:
    """Yields frames from an extracted-frame corpus in ascending id order.

    Unreadable images are skipped with a warning (a survey must not abort
    mid-tow); a missing directory is unrecoverable.
    """

    def __init__(self, root):
        self.root = Path(root)
        frames_dir = self.root / "frames"
        if not frames_dir.is_dir():
            # tolerate a bare directory of frame images
            if self.root.is_dir() and any(
                FRAME_FILE_RE.match(p.name) for p in self.root.iterdir()
            ):
                frames_dir = self.root
            else:
                raise SourceError(f"no frame directory at {self.root}")
        self.frames_dir = frames_dir
        self.skipped = 0
        self._meta = read_metadata(self.root / "metadata.jsonl")
        self._files = self._index_files()

    def _index_files(self) -> list:
        indexed = {}
        for path in sorted(self.frames_dir.iterdir()):
            m = FRAME_FILE_RE.match(path.name)
            if not m:
                continue
            fid = int(m.group(1))
            if fid in indexed:
                logger.warning("duplicate frame id %d at %s, keeping first", fid, path)
                continue
            indexed[fid] = path
        return sorted(indexed.items())

    def truth(self) -> dict:
        return read_annotations(self.root / "annotations.csv")

    def __iter__(self) -> Iterator[Frame]:
        for fid, path in self._files:
            img = cv2.imread(str(path), cv2.IMREAD_COLOR)
            if img is None:
                self.skipped += 1
                logger.warning("unreadable frame %s, skipping", path)
                continue
            meta = self._meta.get(fid, {})
            ts = meta.get("timestamp_ms")
            if ts is None:
                ts = fid * DEFAULT_FRAME_INTERVAL_MS
            geo = None
            if meta.get("lat") is not None and meta.get("lon") is not None:
                geo = GeoFix(meta["lat"], meta["lon"], ts)
            yield Frame(
                frame_id=fid,
                timestamp_ms=int(ts),
                pixels=cv2.cvtColor(img, cv2.COLOR_BGR2RGB),
                geo=geo,
                source_ref=meta.get("source_ref") or str(path),
            )


def open_source(spec) -> FrameSource:
    """Open a frame source from a directory path or a synthetic descriptor.

    Accepts a directory path, a path to a JSON descriptor file, or a dict
    like {"type": "synthetic", "seed": 7, "frames": 100, ...}.
    """
    if isinstance(spec, (str, Path)):
        path = Path(spec)
        if path.is_file() and path.suffix == ".json":
            try:
                spec = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise SourceError(f"bad source descriptor {path}: {exc}") from exc
        else:
            return DirectorySource(path)
    if not isinstance(spec, dict):
        raise SourceError(f"unsupported source spec: {spec!r}")
    kind = spec.get("type", "synthetic")
    if kind == "synthetic":
        return SyntheticSource(SyntheticSpec.from_dict(spec))
    if kind == "directory":
        return DirectorySource(spec["path"])
    raise SourceError(f"unknown source type: {kind}")


def resize_frame(frame: Frame, target_edge: int) -> Frame:
    """Scale the longest edge to `target_edge`, preserving aspect ratio.

    Bilinear resampling; the short edge is floored via integer arithmetic
    (1920x1080 at target 1080 gives 1080x607). Identity when the long edge
    already matches. The compounded scale factor is recorded on the frame
    so boxes can be mapped back to source coordinates.
    """
    if target_edge <= 0:
        raise ValueError(f"target_edge must be positive, got {target_edge}")
    h, w = frame.height, frame.width
    long_edge = max(w, h)
    if long_edge == target_edge:
        return frame
    if w >= h:
        new_w = target_edge
        new_h = max(1, (h * target_edge) // long_edge)
    else:
        new_h = target_edge
        new_w = max(1, (w * target_edge) // long_edge)
    resized = cv2.resize(frame.pixels, (new_w, new_h), interpolation=cv2.INTER_LINEAR)
    return Frame(
        frame_id=frame.frame_id,
        timestamp_ms=frame.timestamp_ms,
        pixels=resized,
        geo=frame.geo,
        source_ref=frame.source_ref,
        scale=frame.scale * (target_edge / long_edge),
    )


class FrameRecordWriter:
    """Appends frame records (JPEG plus a metadata.jsonl line) to a corpus dir."""

    def __init__(self, out_dir, jpeg_quality: int = 95):
        self.out_dir = Path(out_dir)
        self.frames_dir = self.out_dir / "frames"
        self.jpeg_quality = jpeg_quality
        try:
            self.frames_dir.mkdir(parents=True, exist_ok=True)
            self._meta = open(self.out_dir / "metadata.jsonl", "a", encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot open archive at {out_dir}: {exc}") from exc
        self.frames_written = 0

    def write(self, frame: Frame) -> tuple:
        jpg_path = self.frames_dir / f"frame_{frame.frame_id:06d}.jpg"
        bgr = cv2.cvtColor(frame.pixels, cv2.COLOR_RGB2BGR)
        try:
            ok = cv2.imwrite(str(jpg_path), bgr, [cv2.IMWRITE_JPEG_QUALITY, self.jpeg_quality])
        except cv2.error as exc:
            raise StorageError(f"failed to encode {jpg_path}: {exc}") from exc
        if not ok:
            raise StorageError(f"failed to write {jpg_path}")
        record = {
            "frame_id": frame.frame_id,
            "timestamp_ms": frame.timestamp_ms,
            "lat": frame.geo.lat if frame.geo else None,
            "lon": frame.geo.lon if frame.geo else None,
            "source_ref": frame.source_ref,
        }
        try:
            self._meta.write(json.dumps(record) + "\n")
            self._meta.flush()
        except OSError as exc:
            raise StorageError(f"failed to append metadata: {exc}") from exc
        self.frames_written += 1
        return jpg_path, self.out_dir / "metadata.jsonl"

    def close(self) -> None:
        self._meta.close()


def write_frame_record(frame: Frame, out_dir) -> tuple:
    """One-shot frame persist; see FrameRecordWriter for streaming use."""
    writer = FrameRecordWriter(out_dir)
    try:
        return writer.write(frame)
    finally:
        writer.close()


def read_metadata(path) -> dict:
    """metadata.jsonl -> {frame_id: record}; missing file is an empty corpus."""
    path = Path(path)
    if not path.is_file():
        return {}
    records = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        records[int(rec["frame_id"])] = rec
    return records


def read_annotations(path) -> dict:
    """annotations.csv -> {frame_id: [BoundingBox, ...]}."""
    path = Path(path)
    if not path.is_file():
        return {}
    truth: dict[int, list[BoundingBox]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            boxes = json.loads(row["annotations"]) if row["annotations"] else []
            truth[int(row["frame_id"])] = [
                BoundingBox(int(b["x"]), int(b["y"]), int(b["width"]), int(b["height"]))
                for b in boxes
            ]
    return truth


def write_annotations(path, truth: dict) -> None:
    """Inverse of read_annotations; frame ids written in ascending order."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_id", "annotations"])
        for fid in sorted(truth):
            boxes = [
                {"x": b.x, "y": b.y, "width": b.w, "height": b.h} for b in truth[fid]
            ]
            writer.writerow([fid, json.dumps(boxes)])

"""Batch detection interface and backends.

Backends implement `detect_batch(frames) -> list[list[Detection]]`, one
(possibly empty) list per frame in batch order. The oracle backend replays
ground truth through a configurable noise model and is the test stand-in
for a trained model; the external backend talks newline-delimited JSON to
a subprocess or TCP socket so a real model can be plugged in.

Wire protocol (one line each):
  handshake (backend -> pipeline, on start):
      {"protocol": "reefpipe-detect", "version": 1}
  request:   {"frames": [{"id": 3, "path": "/spool/frame_000003.jpg"}, ...]}
  response:  {"detections": [[{"x":1,"y":2,"w":3,"h":4,"conf":0.9}, ...], ...]}
"""

from __future__ import annotations

import json
import logging
import queue
import shutil
import socket
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import cv2
import numpy as np

from .boxes import BoundingBox, clamp_into_frame
from .errors import BackendUnavailableError, DeadlineError, ProtocolError
from .frames import Frame

logger = logging.getLogger(__name__)

PROTOCOL_NAME = "reefpipe-detect"
PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class Detection:
    frame_id: int
    box: BoundingBox
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")


class Detector(Protocol):
    def detect_batch(self, frames: list) -> list: ...


def filter_confidence(dets: list, tau: float) -> list:
    """Keep detections with confidence >= tau (inclusive), order preserved."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"threshold out of range: {tau}")
    return [d for d in dets if d.confidence >= tau]


def default_confidence_law(is_true: bool, jitter_px: int, rng) -> float:
    """Confidence sampler: exact 1.0 for clean true boxes, noisy otherwise."""
    if is_true:
        if jitter_px == 0:
            return 1.0
        return float(1.0 - 0.35 * rng.random())
    return float(0.05 + 0.55 * rng.random())


@dataclass
class NoiseModel:
    """Perturbation applied by the oracle backend to ground-truth boxes."""

    jitter_px: int = 0
    miss_rate: float = 0.0
    fp_rate: float = 0.0
    confidence_law: Callable = default_confidence_law
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ValueError(f"miss_rate out of range: {self.miss_rate}")
        if self.fp_rate < 0:
            raise ValueError(f"fp_rate must be >= 0: {self.fp_rate}")
        if self.jitter_px < 0:
            raise ValueError(f"jitter_px must be >= 0: {self.jitter_px}")


def _frame_rng(seed: int, frame_id: int) -> np.random.Generator:
    # Seeded per frame so results do not depend on batch composition or
    # visit order.
    return np.random.default_rng([seed & 0xFFFFFFFF, frame_id])


def oracle_detect(frame: Frame, truth: dict, noise: NoiseModel) -> list:
    """Replay ground truth for one frame through the noise model.

    Truth boxes are in source coordinates and are mapped onto the frame via
    its recorded scale factor. Fully deterministic given (seed, frame_id).
    """
    rng = _frame_rng(noise.seed, frame.frame_id)
    dets = []
    for box in truth.get(frame.frame_id, []):
        missed = rng.random() < noise.miss_rate if noise.miss_rate > 0 else False
        if missed:
            continue
        scaled = box.scaled(frame.scale) if frame.scale != 1.0 else box
        if noise.jitter_px > 0:
            ox, oy, ow, oh = rng.integers(-noise.jitter_px, noise.jitter_px + 1, size=4)
            scaled = BoundingBox(
                scaled.x + int(ox),
                scaled.y + int(oy),
                max(1, scaled.w + int(ow)),
                max(1, scaled.h + int(oh)),
            )
        scaled = clamp_into_frame(scaled, frame.width, frame.height)
        conf = noise.confidence_law(True, noise.jitter_px, rng)
        dets.append(Detection(frame.frame_id, scaled, conf))
    if noise.fp_rate > 0:
        for _ in range(int(rng.poisson(noise.fp_rate))):
            w = int(rng.integers(12, max(13, frame.width // 4)))
            h = int(rng.integers(12, max(13, frame.height // 4)))
            w, h = min(w, frame.width), min(h, frame.height)
            x = int(rng.integers(0, frame.width - w + 1))
            y = int(rng.integers(0, frame.height - h + 1))
            conf = noise.confidence_law(False, noise.jitter_px, rng)
            dets.append(Detection(frame.frame_id, BoundingBox(x, y, w, h), conf))
    return dets


class OracleDetector:
    """Ground-truth replay backend; stateless after construction."""

    name = "oracle"

    def __init__(self, truth: dict, noise: NoiseModel | None = None):
        self.truth = truth
        self.noise = noise or NoiseModel()

    def detect_batch(self, frames: list) -> list:
        if not frames:
            raise ValueError("empty batch")
        return [oracle_detect(f, self.truth, self.noise) for f in frames]

    def close(self) -> None:
        pass


class SimulatedCostDetector:
    """Wraps a backend with a fixed-overhead-plus-per-pixel cost model.

    Batch latency = overhead_ms + per_megapixel_ms * sum(frame megapixels),
    the shape that makes batching amortize invocation overhead and larger
    inputs cost more.
    """

    name = "simulated"

    def __init__(self, inner, overhead_ms: float = 150.0, per_megapixel_ms: float = 60.0):
        self.inner = inner
        self.overhead_ms = overhead_ms
        self.per_megapixel_ms = per_megapixel_ms

    def detect_batch(self, frames: list) -> list:
        pixels = sum(f.width * f.height for f in frames)
        cost_s = (self.overhead_ms + self.per_megapixel_ms * pixels / 1e6) / 1000.0
        time.sleep(cost_s)
        return self.inner.detect_batch(frames)

    def close(self) -> None:
        self.inner.close()


class _LineChannel:
    """Deadline-capable line transport over a subprocess or TCP socket."""

    def __init__(self, cmd=None, address=None):
        self._proc = None
        self._sock = None
        self._lines: queue.Queue = queue.Queue()
        if cmd is not None:
            self._proc = subprocess.Popen(
                cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
            stream = self._proc.stdout
        elif address is not None:
            host, _, port = address.rpartition(":")
            self._sock = socket.create_connection((host or "127.0.0.1", int(port)))
            stream = self._sock.makefile("r", encoding="utf-8")
            self._wfile = self._sock.makefile("w", encoding="utf-8")
        else:
            raise ValueError("need a command or an address")
        self._reader = threading.Thread(
            target=self._pump, args=(stream,), daemon=True
        )
        self._reader.start()

    def _pump(self, stream):
        try:
            for line in stream:
                self._lines.put(line)
        except (OSError, ValueError):
            pass
        self._lines.put(None)  # stream closed

    def send_line(self, line: str) -> None:
        try:
            if self._proc is not None:
                self._proc.stdin.write(line + "\n")
                self._proc.stdin.flush()
            else:
                self._wfile.write(line + "\n")
                self._wfile.flush()
        except (OSError, BrokenPipeError, ValueError) as exc:
            raise BackendUnavailableError(f"backend write failed: {exc}") from exc

    def read_line(self, timeout_s: float):
        """Returns the next line, None if the stream closed, or raises queue.Empty."""
        line = self._lines.get(timeout=timeout_s)
        if line is None:
            self._lines.put(None)  # keep the closed marker visible
        return line

    def drain(self) -> None:
        while True:
            try:
                line = self._lines.get_nowait()
            except queue.Empty:
                return
            if line is None:
                self._lines.put(None)
                return

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.terminate()
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass


class ExternalDetector:
    """Speaks the reefpipe-detect line protocol with an external backend.

    Frames are spooled to disk as JPEGs and passed by path. Per-batch
    failures (malformed response, missed deadline) raise ProtocolError or
    DeadlineError so the pipeline can drop the batch and keep running;
    a dead process raises BackendUnavailableError.
    """

    name = "external"

    def __init__(self, cmd=None, address=None, deadline_ms: int = 2000, spool_dir=None):
        self.deadline_ms = deadline_ms
        self._owns_spool = spool_dir is None
        self.spool_dir = Path(spool_dir or tempfile.mkdtemp(prefix="reefpipe-spool-"))
        self.spool_dir.mkdir(parents=True, exist_ok=True)
        self._stale_responses = 0
        self._channel = _LineChannel(cmd=cmd, address=address)
        self._handshake()

    def _handshake(self) -> None:
        try:
            line = self._channel.read_line(self.deadline_ms / 1000.0)
        except queue.Empty:
            raise BackendUnavailableError("no handshake from backend before deadline")
        if line is None:
            raise BackendUnavailableError("backend closed before handshake")
        try:
            hello = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"bad handshake line: {line!r}") from exc
        if hello.get("protocol") != PROTOCOL_NAME or hello.get("version") != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported backend handshake: {hello}")

    def detect_batch(self, frames: list) -> list:
        if not frames:
            raise ValueError("empty batch")
        frame_ids = [f.frame_id for f in frames]
        # discard responses belonging to previously timed-out requests
        while self._stale_responses:
            try:
                line = self._channel.read_line(0.05)
            except queue.Empty:
                break
            if line is None:
                raise BackendUnavailableError("backend stream closed", frame_ids)
            self._stale_responses -= 1
        paths = self._spool(frames)
        request = {"frames": [{"id": f.frame_id, "path": str(p)} for f, p in zip(frames, paths)]}
        self._channel.send_line(json.dumps(request))
        try:
            line = self._channel.read_line(self.deadline_ms / 1000.0)
        except queue.Empty:
            self._stale_responses += 1
            raise DeadlineError(
                f"no response within {self.deadline_ms} ms", frame_ids
            ) from None
        finally:
            self._unspool(paths)
        if line is None:
            raise BackendUnavailableError("backend stream closed", frame_ids)
        return self._parse_response(line, frames)

    def _spool(self, frames: list) -> list:
        paths = []
        for frame in frames:
            path = self.spool_dir / f"frame_{frame.frame_id:06d}.jpg"
            cv2.imwrite(str(path), cv2.cvtColor(frame.pixels, cv2.COLOR_RGB2BGR))
            paths.append(path)
        return paths

    def _unspool(self, paths: list) -> None:
        for path in paths:
            try:
                path.unlink(missing_ok=True)
            except OSError:
                pass

    def _parse_response(self, line: str, frames: list) -> list:
        frame_ids = [f.frame_id for f in frames]
        try:
            payload = json.loads(line)
            per_frame = payload["detections"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed response: {line[:200]!r}", frame_ids) from exc
        if not isinstance(per_frame, list) or len(per_frame) != len(frames):
            raise ProtocolError(
                f"response length {len(per_frame) if isinstance(per_frame, list) else '?'} "
                f"!= batch length {len(frames)}",
                frame_ids,
            )
        results = []
        for frame, raw_list in zip(frames, per_frame):
            dets = []
            try:
                for raw in raw_list:
                    box = BoundingBox(
                        round(raw["x"]),
                        round(raw["y"]),
                        max(1, round(raw["w"])),
                        max(1, round(raw["h"])),
                    )
                    conf = min(1.0, max(0.0, float(raw["conf"])))
                    dets.append(Detection(frame.frame_id, box, conf))
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"bad detection record: {exc}", frame_ids) from exc
            results.append(dets)
        return results

    def close(self) -> None:
        self._channel.close()
        if self._owns_spool:
            shutil.rmtree(self.spool_dir, ignore_errors=True)

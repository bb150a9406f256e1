"""Concurrent pipeline: importer -> detector -> tracker -> sinks.

Stages run as independent threads decoupled by two bounded queues. The
frame queue absorbs importer bursts (drop_oldest by default so a live feed
never stalls); the result queue is always blocking so no detection is lost
between detector and tracker. Skipped frames ride the same conveyor as
detect frames but bypass inference, which keeps the tracker's input in
strictly increasing frame order even though detection happens in batches.
"""

from __future__ import annotations

import logging
import statistics
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator

from .config import PipelineConfig
from .detector import filter_confidence
from .errors import BackendUnavailableError, DeadlineError, ProtocolError, StorageError
from .frames import Frame
from .ingest import resize_frame
from .queues import END_OF_STREAM, TIMED_OUT, BoundedQueue, OfferPolicy
from .tracker import EventKind, Tracker

logger = logging.getLogger(__name__)


class Route(Enum):
    DETECT = "detect"
    PROPAGATE = "propagate"


def skip_decision(frame_id: int, k: int) -> Route:
    """Detect every k-th frame (frame_id % k == 0), propagate the rest."""
    if k < 1:
        raise ValueError(f"skip interval must be >= 1, got {k}")
    return Route.DETECT if frame_id % k == 0 else Route.PROPAGATE


@dataclass(frozen=True)
class RoutedFrame:
    frame: Frame
    route: Route


def make_batches(
    q: BoundedQueue,
    batch_size: int,
    flush_ms: int,
    counts: Callable | None = None,
) -> Iterator[list]:
    """Group queue items into batches of `batch_size`.

    A partial batch is flushed once `flush_ms` elapses after its first
    counted item, or at end of stream. Every item appears in exactly one
    batch, in arrival order. `counts` marks which items fill the batch
    (default: all); a run of uncounted items with no counted one pending is
    emitted immediately since there is nothing to wait for.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    counts = counts or (lambda item: True)
    pending: list = []
    counted = 0
    deadline = None
    while True:
        timeout = None if deadline is None else max(0.0, deadline - time.monotonic())
        item = q.take(timeout=timeout if deadline is not None else None)
        if item is TIMED_OUT:
            if pending:
                yield pending
            pending, counted, deadline = [], 0, None
            continue
        if item is END_OF_STREAM:
            if pending:
                yield pending
            return
        pending.append(item)
        if counts(item):
            counted += 1
            if counted == 1:
                deadline = time.monotonic() + flush_ms / 1000.0
            if counted >= batch_size:
                yield pending
                pending, counted, deadline = [], 0, None
        elif counted == 0:
            yield pending
            pending, counted, deadline = [], 0, None


@dataclass
class LatencyStats:
    mean_ms: float = 0.0
    p95_ms: float = 0.0
    count: int = 0


@dataclass
class StageMetrics:
    frames_in: int = 0
    frames_detected: int = 0
    frames_propagated: int = 0
    frames_dropped: int = 0
    detector_batches: int = 0
    detector_failures: int = 0
    tracks_created: int = 0
    end_to_end_fps: float = 0.0
    elapsed_s: float = 0.0
    import_latency: LatencyStats = field(default_factory=LatencyStats)
    detect_latency: LatencyStats = field(default_factory=LatencyStats)
    track_latency: LatencyStats = field(default_factory=LatencyStats)
    frame_queue_depth: int = 0
    result_queue_depth: int = 0
    status: str = "idle"
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "frames_in": self.frames_in,
            "frames_detected": self.frames_detected,
            "frames_propagated": self.frames_propagated,
            "frames_dropped": self.frames_dropped,
            "detector_batches": self.detector_batches,
            "detector_failures": self.detector_failures,
            "tracks_created": self.tracks_created,
            "end_to_end_fps": round(self.end_to_end_fps, 3),
            "elapsed_s": round(self.elapsed_s, 3),
            "latency_ms": {
                "import": {"mean": round(self.import_latency.mean_ms, 3),
                           "p95": round(self.import_latency.p95_ms, 3)},
                "detect": {"mean": round(self.detect_latency.mean_ms, 3),
                           "p95": round(self.detect_latency.p95_ms, 3)},
                "track": {"mean": round(self.track_latency.mean_ms, 3),
                          "p95": round(self.track_latency.p95_ms, 3)},
            },
            "queue_depths": {
                "frame_queue": self.frame_queue_depth,
                "result_queue": self.result_queue_depth,
            },
            "status": self.status,
            "error": self.error,
        }


class _MetricsBlock:
    """Thread-safe counters shared by all stages; snapshots at any frequency."""

    _MAX_SAMPLES = 100_000

    def __init__(self):
        self._lock = threading.Lock()
        self.frames_in = 0
        self.frames_detected = 0
        self.frames_propagated = 0
        self.frames_dropped = 0
        self.detector_batches = 0
        self.detector_failures = 0
        self.tracks_created = 0
        self.status = "idle"
        self.error = ""
        self._samples = {"import": [], "detect": [], "track": []}
        self._started_at: float | None = None
        self._finished_at: float | None = None

    def start(self):
        with self._lock:
            self._started_at = time.monotonic()
            self.status = "running"

    def finish(self):
        with self._lock:
            self._finished_at = time.monotonic()
            if self.status == "running":
                self.status = "ok"

    def fail(self, message: str):
        with self._lock:
            self.status = "error"
            if not self.error:
                self.error = message

    def add(self, counter: str, amount: int = 1):
        with self._lock:
            setattr(self, counter, getattr(self, counter) + amount)

    def sample(self, stage: str, latency_ms: float):
        with self._lock:
            samples = self._samples[stage]
            if len(samples) < self._MAX_SAMPLES:
                samples.append(latency_ms)

    def _stats(self, stage: str) -> LatencyStats:
        samples = self._samples[stage]
        if not samples:
            return LatencyStats()
        mean = statistics.fmean(samples)
        if len(samples) == 1:
            p95 = samples[0]
        else:
            p95 = statistics.quantiles(samples, n=20)[-1]
        return LatencyStats(mean_ms=mean, p95_ms=p95, count=len(samples))

    def snapshot(self, frame_q=None, result_q=None, extra_drops: int = 0) -> StageMetrics:
        with self._lock:
            now = time.monotonic()
            end = self._finished_at if self._finished_at is not None else now
            elapsed = max(0.0, end - self._started_at) if self._started_at else 0.0
            processed = self.frames_detected + self.frames_propagated
            return StageMetrics(
                frames_in=self.frames_in,
                frames_detected=self.frames_detected,
                frames_propagated=self.frames_propagated,
                frames_dropped=self.frames_dropped + extra_drops,
                detector_batches=self.detector_batches,
                detector_failures=self.detector_failures,
                tracks_created=self.tracks_created,
                end_to_end_fps=processed / elapsed if elapsed > 0 else 0.0,
                elapsed_s=elapsed,
                import_latency=self._stats("import"),
                detect_latency=self._stats("detect"),
                track_latency=self._stats("track"),
                frame_queue_depth=frame_q.depth() if frame_q else 0,
                result_queue_depth=result_q.depth() if result_q else 0,
                status=self.status,
                error=self.error,
            )


class Sink:
    """Receives tracker output; all hooks optional."""

    def on_frame(self, frame: Frame, dets: list | None) -> None:
        pass

    def on_events(self, events: list) -> None:
        pass

    def close(self, tracks: list) -> None:
        pass


class DetectionCollector(Sink):
    """Accumulates post-filter detections per frame (evaluation input)."""

    def __init__(self):
        self.per_frame: dict[int, list] = {}

    def on_frame(self, frame, dets):
        if dets is not None:
            self.per_frame[frame.frame_id] = list(dets)

    @property
    def detections(self) -> list:
        out = []
        for fid in sorted(self.per_frame):
            out.extend(self.per_frame[fid])
        return out


@dataclass
class PipelineResult:
    metrics: StageMetrics
    tracks: list
    working_scale: float = 1.0


class Pipeline:
    """Owns the stage threads, queues, and shared metrics for one run."""

    def __init__(self, cfg: PipelineConfig, source, detector, sinks=()):
        self.cfg = cfg
        self.source = source
        self.detector = detector
        self.sinks = list(sinks)
        self.frame_q = BoundedQueue(cfg.frame_queue_capacity)
        self.result_q = BoundedQueue(cfg.result_queue_capacity)
        self.tracker = Tracker(
            assoc_iou_threshold=cfg.assoc_iou_threshold,
            track_patience=cfg.track_patience,
            flow_radius=cfg.flow_radius,
            frame_store_capacity=cfg.frame_store_capacity,
        )
        self.metrics = _MetricsBlock()
        self._offer_policy = (
            OfferPolicy.BLOCK if cfg.frame_queue_policy == "block" else OfferPolicy.DROP_OLDEST
        )
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._working_scale = 1.0
        self._finish_lock = threading.Lock()
        self._result: PipelineResult | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self.metrics.start()
        self._threads = [
            threading.Thread(target=self._import_worker, name="reefpipe-import", daemon=True),
            threading.Thread(target=self._detect_worker, name="reefpipe-detect", daemon=True),
            threading.Thread(target=self._track_worker, name="reefpipe-track", daemon=True),
        ]
        for t in self._threads:
            t.start()

    def join(self, timeout: float | None = None) -> bool:
        deadline = None if timeout is None else time.monotonic() + timeout
        for t in self._threads:
            remaining = None if deadline is None else max(0.0, deadline - time.monotonic())
            t.join(remaining)
            if t.is_alive():
                return False
        return True

    def request_stop(self) -> None:
        """Ask all stages to wind down; queued work is drained, not processed."""
        self._stop.set()
        self.frame_q.close()

    def run(self) -> PipelineResult:
        self.start()
        self.join()
        return self.finish()

    def finish(self) -> PipelineResult:
        """Close sinks and assemble the final result; safe to call twice."""
        with self._finish_lock:
            if self._result is not None:
                return self._result
            self.metrics.finish()
            tracks = self.tracker.all_tracks()
            try:
                for sink in self.sinks:
                    sink.close(tracks)
            except StorageError as exc:
                self.metrics.fail(f"archive: {exc}")
            self._result = PipelineResult(
                metrics=self.snapshot_metrics(),
                tracks=tracks,
                working_scale=self._working_scale,
            )
            return self._result

    def snapshot_metrics(self) -> StageMetrics:
        # queue evictions count as drops alongside the stages' explicit ones
        return self.metrics.snapshot(self.frame_q, self.result_q,
                                     extra_drops=self.frame_q.drops)

    # -- stages ------------------------------------------------------------

    def _fail(self, message: str) -> None:
        logger.error("pipeline failure: %s", message)
        self.metrics.fail(message)
        self._stop.set()
        self.frame_q.close()

    def _import_worker(self) -> None:
        cfg = self.cfg
        try:
            iterator = iter(self.source)
            while not self._stop.is_set():
                t0 = time.perf_counter()
                frame = next(iterator, None)
                if frame is None:
                    break
                frame = resize_frame(frame, cfg.input_size)
                self._working_scale = frame.scale
                route = skip_decision(frame.frame_id, cfg.skip_interval)
                self.metrics.add("frames_in")
                self.metrics.sample("import", (time.perf_counter() - t0) * 1000.0)
                if not self.frame_q.offer(RoutedFrame(frame, route), self._offer_policy):
                    self.metrics.add("frames_dropped")
                    break
        except Exception as exc:  # noqa: BLE001 - any source failure ends the run
            self._fail(f"source: {exc}")
        finally:
            self.frame_q.close()

    def _detect_worker(self) -> None:
        cfg = self.cfg
        try:
            batches = make_batches(
                self.frame_q,
                cfg.batch_size,
                cfg.batch_flush_ms,
                counts=lambda rf: rf.route is Route.DETECT,
            )
            for batch in batches:
                if self._stop.is_set():
                    self._discard(batch)
                    break
                detect_frames = [rf.frame for rf in batch if rf.route is Route.DETECT]
                results: dict[int, list] = {}
                failed = False
                if detect_frames:
                    t0 = time.perf_counter()
                    try:
                        per_frame = self.detector.detect_batch(detect_frames)
                        for f, dets in zip(detect_frames, per_frame):
                            results[f.frame_id] = filter_confidence(dets, cfg.conf_threshold)
                    except (ProtocolError, DeadlineError) as exc:
                        logger.warning("detector batch failed: %s", exc)
                        self.metrics.add("detector_failures")
                        failed = True
                    except BackendUnavailableError as exc:
                        self.metrics.add("detector_failures")
                        self._fail(f"detector: {exc}")
                        self._discard(batch)
                        break
                    else:
                        elapsed_ms = (time.perf_counter() - t0) * 1000.0
                        self.metrics.add("detector_batches")
                        for _ in detect_frames:
                            self.metrics.sample("detect", elapsed_ms / len(detect_frames))
                for rf in batch:
                    if rf.route is Route.DETECT:
                        if failed:
                            self.metrics.add("frames_dropped")
                            continue
                        payload = (rf.frame, results[rf.frame.frame_id])
                    else:
                        payload = (rf.frame, None)
                    if not self.result_q.offer(payload, OfferPolicy.BLOCK):
                        self.metrics.add("frames_dropped")
        except Exception as exc:  # noqa: BLE001
            self._fail(f"detect stage: {exc}")
        finally:
            self.result_q.close()
            self._drain_frame_queue()

    def _discard(self, batch: list) -> None:
        self.metrics.add("frames_dropped", len(batch))

    def _drain_frame_queue(self) -> None:
        self.frame_q.close()
        while True:
            item = self.frame_q.take(timeout=0)
            if item is END_OF_STREAM or item is TIMED_OUT:
                break
            self.metrics.add("frames_dropped")

    def _track_worker(self) -> None:
        try:
            while True:
                item = self.result_q.take()
                if item is END_OF_STREAM:
                    break
                frame, dets = item
                t0 = time.perf_counter()
                events = self.tracker.step(frame, dets)
                self.metrics.sample("track", (time.perf_counter() - t0) * 1000.0)
                self.metrics.add("frames_detected" if dets is not None else "frames_propagated")
                created = sum(1 for e in events if e.kind is EventKind.CREATED)
                if created:
                    self.metrics.add("tracks_created", created)
                for sink in self.sinks:
                    sink.on_frame(frame, dets)
                    sink.on_events(events)
        except Exception as exc:  # noqa: BLE001 - includes StorageError (fatal)
            self._fail(f"tracker: {exc}")
            self.result_q.close()
            self._drain_result_queue()
        finally:
            final_events = self.tracker.finalize()
            if final_events:
                for sink in self.sinks:
                    try:
                        sink.on_events(final_events)
                    except Exception as exc:  # noqa: BLE001
                        self._fail(f"sink: {exc}")

    def _drain_result_queue(self) -> None:
        while True:
            item = self.result_q.take(timeout=0)
            if item is END_OF_STREAM or item is TIMED_OUT:
                break
            self.metrics.add("frames_dropped")


def run_pipeline(cfg: PipelineConfig, source, detector, sinks=()) -> PipelineResult:
    """Run a full pipeline to completion and return final metrics and tracks."""
    return Pipeline(cfg, source, detector, sinks).run()

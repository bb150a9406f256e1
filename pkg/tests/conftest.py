"""Shared fixtures and corpus builders."""

from __future__ import annotations

import contextlib
import json
import threading
import time

import cv2
import numpy as np
import pytest

from reefpipe.boxes import BoundingBox
from reefpipe.frames import Frame
from reefpipe.ingest import write_annotations


def textured_pixels(seed: int, width: int, height: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, (height, width, 3), dtype=np.uint8)


def make_frame(frame_id: int = 0, width: int = 64, height: int = 48, seed: int = 0,
               pixels: np.ndarray | None = None, **kwargs) -> Frame:
    if pixels is None:
        pixels = textured_pixels(seed, width, height)
    return Frame(frame_id=frame_id, timestamp_ms=frame_id * 100, pixels=pixels, **kwargs)


def shifted_frame_pair(seed: int, dx: int, dy: int, width: int = 120, height: int = 100):
    """(prev, cur) where cur is prev translated by (dx, dy) with wraparound.

    Any window whose source stays in bounds sees an exact translation.
    """
    base = textured_pixels(seed, width, height)
    moved = np.roll(base, shift=(dy, dx), axis=(0, 1))
    prev = Frame(frame_id=0, timestamp_ms=0, pixels=base)
    cur = Frame(frame_id=1, timestamp_ms=100, pixels=moved)
    return prev, cur


def build_corpus(root, n_frames: int = 10, width: int = 64, height: int = 48,
                 seed: int = 0, truth: dict | None = None, with_geo: bool = True):
    """Write a directory corpus in the canonical layout; returns its root."""
    frames_dir = root / "frames"
    frames_dir.mkdir(parents=True)
    rng = np.random.default_rng(seed)
    with open(root / "metadata.jsonl", "w", encoding="utf-8") as meta:
        for fid in range(n_frames):
            pixels = rng.integers(0, 256, (height, width, 3), dtype=np.uint8)
            cv2.imwrite(str(frames_dir / f"frame_{fid:06d}.jpg"), pixels)
            record = {
                "frame_id": fid,
                "timestamp_ms": 1_000_000 + fid * 100,
                "lat": -16.8 + fid * 1e-5 if with_geo else None,
                "lon": 145.6 + fid * 1e-5 if with_geo else None,
                "source_ref": f"test://{fid}",
            }
            meta.write(json.dumps(record) + "\n")
    if truth is not None:
        write_annotations(root / "annotations.csv", truth)
    return root


@pytest.fixture
def corpus_dir(tmp_path):
    return build_corpus(tmp_path / "corpus")


def boxes_close(a: BoundingBox, b: BoundingBox, tol: int = 1) -> bool:
    return (
        abs(a.x - b.x) <= tol and abs(a.y - b.y) <= tol
        and abs(a.w - b.w) <= tol and abs(a.h - b.h) <= tol
    )


@contextlib.contextmanager
def run_server(app):
    """Serve an ASGI app on an ephemeral port; yields the base URL.

    The in-process TestClient buffers whole responses, so anything
    exercising the live SSE stream needs a real socket.
    """
    import uvicorn

    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("server failed to start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=10)

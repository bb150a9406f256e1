import numpy as np
import pytest

from reefpipe.boxes import BoundingBox, iou
from reefpipe.detector import (
    Detection,
    NoiseModel,
    OracleDetector,
    SimulatedCostDetector,
    filter_confidence,
    oracle_detect,
)

from conftest import make_frame


def dets(*confs):
    return [
        Detection(0, BoundingBox(i * 10, 0, 5, 5), c) for i, c in enumerate(confs)
    ]


# -- confidence filter ------------------------------------------------------

def test_filter_tau_zero_keeps_all():
    ds = dets(0.2, 0.5, 0.9)
    assert filter_confidence(ds, 0.0) == ds


def test_filter_tau_one_keeps_only_certain():
    ds = dets(0.2, 1.0, 0.999)
    assert [d.confidence for d in filter_confidence(ds, 1.0)] == [1.0]


def test_filter_threshold_inclusive():
    ds = dets(0.2, 0.5, 0.9)
    kept = filter_confidence(ds, 0.5)
    assert [d.confidence for d in kept] == [0.5, 0.9]


def test_filter_idempotent_and_monotone():
    rng = np.random.default_rng(0)
    ds = dets(*rng.random(30).tolist())
    for tau in (0.0, 0.3, 0.7, 1.0):
        once = filter_confidence(ds, tau)
        assert filter_confidence(once, tau) == once
    for lo, hi in ((0.1, 0.5), (0.4, 0.9)):
        assert set(filter_confidence(ds, hi)) <= set(filter_confidence(ds, lo))


def test_filter_rejects_bad_tau():
    with pytest.raises(ValueError):
        filter_confidence([], 1.5)


# -- oracle backend ---------------------------------------------------------

def test_zero_noise_returns_exact_annotations():
    boxes = [BoundingBox(5, 5, 12, 12), BoundingBox(30, 20, 10, 8)]
    frame = make_frame(frame_id=3)
    out = oracle_detect(frame, {3: boxes}, NoiseModel())
    assert [d.box for d in out] == boxes
    assert all(d.confidence == 1.0 for d in out)


def test_frame_without_annotations_yields_empty():
    frame = make_frame(frame_id=9)
    assert oracle_detect(frame, {}, NoiseModel()) == []


def test_oracle_deterministic_per_frame():
    truth = {3: [BoundingBox(5, 5, 12, 12)]}
    nm = NoiseModel(jitter_px=2, miss_rate=0.3, fp_rate=1.0, seed=42)
    frame = make_frame(frame_id=3)
    assert oracle_detect(frame, truth, nm) == oracle_detect(frame, truth, nm)


def test_oracle_independent_of_batch_composition():
    truth = {i: [BoundingBox(5, 5, 12, 12)] for i in range(6)}
    nm = NoiseModel(jitter_px=2, miss_rate=0.2, fp_rate=0.5, seed=1)
    det = OracleDetector(truth, nm)
    frames = [make_frame(frame_id=i) for i in range(6)]
    whole = det.detect_batch(frames)
    split = det.detect_batch(frames[:2]) + det.detect_batch(frames[2:])
    assert whole == split
    reversed_out = det.detect_batch(list(reversed(frames)))
    assert reversed_out == list(reversed(whole))


def test_miss_rate_binomial_bound():
    # 1000 annotated boxes at miss 0.5: kept count within the 99.99% band
    truth = {i: [BoundingBox(5, 5, 12, 12)] for i in range(1000)}
    det = OracleDetector(truth, NoiseModel(miss_rate=0.5, seed=7))
    frames = [make_frame(frame_id=i) for i in range(1000)]
    kept = sum(len(d) for d in det.detect_batch(frames))
    assert 420 <= kept <= 580


def test_jitter_bounded_iou_for_40px_boxes():
    # worst case for a +-2 px shift/resize on a 40x40 box is IoU ~0.75
    truth = {i: [BoundingBox(20, 20, 40, 40)] for i in range(300)}
    det = OracleDetector(truth, NoiseModel(jitter_px=2, seed=3))
    frames = [make_frame(frame_id=i, width=120, height=120) for i in range(300)]
    for frame, out in zip(frames, det.detect_batch(frames)):
        assert len(out) == 1
        assert iou(out[0].box, BoundingBox(20, 20, 40, 40)) >= 0.7


def test_oracle_scales_truth_onto_resized_frames():
    truth = {0: [BoundingBox(100, 100, 200, 100)]}
    frame = make_frame(frame_id=0, width=400, height=300, scale=0.5)
    out = oracle_detect(frame, truth, NoiseModel())
    assert out[0].box == BoundingBox(50, 50, 100, 50)


def test_poisson_false_positives():
    truth = {}
    det = OracleDetector(truth, NoiseModel(fp_rate=2.0, seed=9))
    frames = [make_frame(frame_id=i, width=200, height=160) for i in range(500)]
    counts = [len(d) for d in det.detect_batch(frames)]
    mean = np.mean(counts)
    assert 1.7 <= mean <= 2.3  # Poisson(2) sample mean over 500 frames
    for frame, out in zip(frames, det.detect_batch(frames)):
        for d in out:
            assert 0 <= d.box.x and d.box.x2 <= frame.width
            assert 0 <= d.box.y and d.box.y2 <= frame.height


def test_empty_batch_rejected():
    with pytest.raises(ValueError):
        OracleDetector({}).detect_batch([])


def test_simulated_cost_detector_sleeps_and_delegates():
    import time

    truth = {0: [BoundingBox(1, 1, 4, 4)]}
    inner = OracleDetector(truth)
    sim = SimulatedCostDetector(inner, overhead_ms=50, per_megapixel_ms=0)
    frame = make_frame(frame_id=0)
    t0 = time.perf_counter()
    out = sim.detect_batch([frame])
    elapsed = time.perf_counter() - t0
    assert elapsed >= 0.045
    assert out == inner.detect_batch([frame])

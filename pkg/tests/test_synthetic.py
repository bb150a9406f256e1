import numpy as np

from reefpipe.boxes import iou
from reefpipe.synthetic import SyntheticSource, SyntheticSpec


def test_truth_covers_every_frame():
    source = SyntheticSource(SyntheticSpec(seed=3, frames=20, objects=4))
    truth = source.truth()
    assert sorted(truth) == list(range(20))
    assert all(len(boxes) == 4 for boxes in truth.values())


def test_objects_never_overlap():
    source = SyntheticSource(SyntheticSpec(seed=5, frames=50, objects=5, max_speed=3))
    for boxes in source.truth().values():
        for i, a in enumerate(boxes):
            for b in boxes[i + 1 :]:
                assert iou(a, b) == 0.0


def test_motion_bounded_by_max_speed():
    spec = SyntheticSpec(seed=9, frames=40, objects=3, max_speed=2)
    truth = SyntheticSource(spec).truth()
    for fid in range(1, spec.frames):
        for prev, cur in zip(truth[fid - 1], truth[fid]):
            assert abs(cur.x - prev.x) <= spec.max_speed
            assert abs(cur.y - prev.y) <= spec.max_speed
            assert (cur.w, cur.h) == (prev.w, prev.h)


def test_boxes_match_rendered_pixels():
    spec = SyntheticSpec(seed=11, frames=5, objects=2)
    source = SyntheticSource(spec)
    truth = source.truth()
    for frame in source:
        for box, obj in zip(truth[frame.frame_id], source._objects):
            patch = frame.pixels[box.y : box.y2, box.x : box.x2]
            assert np.array_equal(patch, obj.texture)


def test_zero_objects_scene():
    source = SyntheticSource(SyntheticSpec(seed=1, frames=3, objects=0))
    assert all(boxes == [] for boxes in source.truth().values())
    assert len(list(source)) == 3


def test_frames_carry_interpolated_geo():
    source = SyntheticSource(SyntheticSpec(seed=2, frames=10))
    frames = list(source)
    lats = [f.geo.lat for f in frames]
    # transect geo drifts monotonically between the two endpoint fixes
    assert lats[0] != lats[-1]
    diffs = np.diff(lats)
    assert np.all(diffs <= 0) or np.all(diffs >= 0)

import io

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gesture_forge.depth import (
    Baseline,
    DepthMask,
    baseline_from,
    distance_to_background_sq,
    encode_frame,
    fit_skeleton,
    gravity_center,
    keypoint_confidence,
    match_regions,
    rasterize_hand,
    segment_prospects,
)
from gesture_forge.errors import EmptyMask, NoBackground, ZeroBaseline
from gesture_forge.kinematics import PALM_CENTER, REST_POSE
from gesture_forge.pgm import format_pgm, parse_pgm

from oracles import brute_gravity_center, flood_components


@given(arrays(bool, (9, 11)))
def test_gravity_center_matches_brute_force(fg):
    if not fg.any():
        return
    got = gravity_center(DepthMask(fg.astype(int)))
    assert tuple(int(v) for v in got) == brute_gravity_center(fg)


def test_single_cell_and_disk():
    m = np.zeros((7, 7), int)
    m[3, 3] = 5
    assert tuple(gravity_center(DepthMask(m))) == (3, 3)
    rr, cc = np.mgrid[:21, :21]
    disk = ((rr - 10) ** 2 + (cc - 12) ** 2 <= 36).astype(int)
    assert tuple(gravity_center(DepthMask(disk))) == (10, 12)


def test_full_mask_uses_border_as_background():
    d2 = distance_to_background_sq(DepthMask(np.ones((5, 5), int)))
    assert d2[2, 2] == 9 and d2[0, 0] == 1
    with pytest.raises(NoBackground):
        distance_to_background_sq(DepthMask(np.ones((5, 5), int)), pad_border=False)


def test_empty_mask():
    with pytest.raises(EmptyMask):
        gravity_center(DepthMask(np.zeros((4, 4), int)))


def test_confidence_formula():
    b = Baseline(np.zeros(2), 2.5)
    assert keypoint_confidence(0.0, b) == 1.0
    assert keypoint_confidence(4 * 2.5, b) == 0.0
    assert abs(keypoint_confidence(2 * 2.5, b) - 0.5) < 1e-12
    assert keypoint_confidence(100.0, b) == 0.0
    with pytest.raises(ValueError):
        keypoint_confidence(-1.0, b)


def test_baseline():
    b = baseline_from((3.0, 4.0), (0.0, 0.0))
    assert b.length == 5.0
    with pytest.raises(ZeroBaseline):
        baseline_from((1, 1), (1, 1))


@given(arrays(np.int64, (8, 10), elements=st.integers(0, 3)), st.integers(1, 3))
def test_prospect_segmentation_matches_flood_fill(depth, thr):
    regions = segment_prospects(DepthMask(depth), thr)
    got = sorted(sorted(map(tuple, r.cells.tolist())) for r in regions)
    assert got == sorted(flood_components(depth >= thr))
    for r in regions:
        assert np.allclose(r.centroid, r.cells.mean(axis=0))


def test_match_regions_greedy_nearest():
    class R:
        def __init__(self, c):
            self.centroid = np.array(c, float)
    skel = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    out = match_regions([R((9, 1)), R((1, 0))], skel)
    assert out == {0: 1, 1: 0}


def test_encode_synthetic_render_recovers_pose():
    pose = REST_POSE - PALM_CENTER
    img = rasterize_hand(pose, (100, 80), 40.0, (160, 160))
    mask = DepthMask(img)
    center = gravity_center(mask)
    base = baseline_from(center, (140, 80))
    skel = fit_skeleton(pose, base)
    frame, matched = encode_frame(segment_prospects(mask, 150), base, skel)
    assert len(matched) == 19
    assert np.all(frame.confidence[:19] == 1.0)
    # palm center found within two pixels of where it was drawn
    assert np.hypot(*(center - (100, 80))) <= 2.0


def test_occluded_keypoint_gets_distance_confidence():
    pose = REST_POSE - PALM_CENTER
    visible = np.ones(20, bool)
    visible[4] = False  # B0 hidden
    img = rasterize_hand(pose, (100, 80), 40.0, (160, 160), visible=visible)
    mask = DepthMask(img)
    base = baseline_from(gravity_center(mask), (140, 80))
    frame, matched = encode_frame(segment_prospects(mask, 150), base, fit_skeleton(pose, base))
    assert 0.0 < frame.confidence[4] < 1.0


@given(arrays(np.int64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.integers(0, 65535)),
       st.booleans())
def test_pgm_round_trip(img, binary):
    assert np.array_equal(parse_pgm(format_pgm(img, binary)), img)


def test_pgm_comments_and_ascii():
    data = b"P2\n# a comment\n3 2\n# another\n255\n0 1 2\n3 4 255\n"
    assert parse_pgm(data).tolist() == [[0, 1, 2], [3, 4, 255]]
    with pytest.raises(ValueError):
        parse_pgm(b"P6\n1 1\n255\n\x00\x00\x00")

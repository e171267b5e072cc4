import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gesture_forge.datagen import (
    CSV_HEADER,
    NoiseSpec,
    SampleSet,
    frames_from_csv,
    frames_to_csv,
    perturb,
    sampleset_from_csv,
    sampleset_to_csv,
    synth_dataset,
    synth_gesture,
    synth_poses,
    synth_transition,
    validate_dataset,
)
from gesture_forge.errors import EmptyClass, UnknownGesture
from gesture_forge.codec import encode_array
from gesture_forge.kinematics import GESTURE_NAMES, GESTURES


def test_registry():
    assert len(GESTURE_NAMES) == 11
    assert {"push", "pull", "hold", "swipe-left", "swipe-right", "swipe-up", "swipe-down",
            "rotate-left", "rotate-right", "click", "pick"} == set(GESTURE_NAMES)
    with pytest.raises(UnknownGesture):
        synth_gesture("wave", 0)


def test_templates_stay_below_top_bin():
    for g in GESTURE_NAMES:
        d = synth_dataset(1, 0, 0.0, gestures=[g]).values[0]
        assert np.abs(d[:, :57]).max() < 2.0
        assert np.abs(d[:, 57:]).max() < 200.0
        assert np.all(d[0] == 0)


def test_hold_is_static_and_determinism():
    d = synth_dataset(2, 5, 1.0, gestures=["hold"]).values
    assert np.allclose(d[:, :, :57], 0, atol=1e-12)
    a = synth_poses("push", 9, 1.0)
    b = synth_poses("push", 9, 1.0)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, synth_poses("push", 10, 1.0))


def test_jitter_zero_gives_canonical():
    a = synth_poses("swipe-up", 1, 0.0)
    b = synth_poses("swipe-up", 2, 0.0)
    assert np.array_equal(a, b)
    assert np.allclose(a[0], GESTURES["swipe-up"].pose(0.0))


def test_transition_ends_next_to_gesture_start():
    start = GESTURES["push"].pose(0.0)
    lead = synth_transition(start, 15, 3)
    assert lead.shape == (15, 20, 3)
    assert np.allclose(lead[-1], start)
    # constant velocity: every step moves the palm by the same amount
    steps = np.linalg.norm(np.diff(lead, axis=0), axis=-1).max(axis=1)
    assert np.all(steps > 1.0) and np.allclose(steps, steps[0])


@given(st.floats(0.01, 10), st.integers(0, 1000))
def test_perturb_bounded(a, seed):
    x = np.zeros((5, 7))
    y = perturb(x, NoiseSpec(a, "vector"), seed)
    assert np.all(np.abs(y) <= a)
    assert np.array_equal(y, perturb(x, NoiseSpec(a, "vector"), seed))


def test_noise_defaults():
    assert NoiseSpec.default("vector").amplitude == 1.0
    assert NoiseSpec.default("angle").amplitude == 5.0
    with pytest.raises(ValueError):
        NoiseSpec(-1.0, "vector")


def test_csv_round_trip_exact():
    d = synth_dataset(1, 3, 1.0, gestures=["pick", "click"])
    text = sampleset_to_csv(d)
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert len(text.splitlines()) == 1 + 2 * 30
    back = sampleset_from_csv(io.StringIO(text))
    assert back.labels == d.labels
    assert np.array_equal(back.values, d.values) and np.array_equal(back.confidence, d.confidence)
    with pytest.raises(ValueError):
        sampleset_from_csv(io.StringIO("a,b\n"))


def test_frames_csv_round_trip():
    frames = synth_gesture("click", 0, 1.0)
    fh = io.StringIO()
    frames_to_csv(frames, fh)
    back = frames_from_csv(io.StringIO(fh.getvalue()))
    assert len(back) == 30
    assert all(np.array_equal(a.channels(), b.channels()) for a, b in zip(frames, back))


def _centers_set(copies=3):
    base = synth_dataset(1, 0, 0.0)
    return SampleSet([l for l in base.labels for _ in range(copies)],
                     np.repeat(base.values, copies, axis=0), None)


def test_validate_clean_set_no_relabels():
    out, report = validate_dataset(_centers_set())
    assert sum(r["moved_out"] for r in report.values()) == 0


def test_validate_planted_sample_moves():
    d = _centers_set()
    labels = list(d.labels)
    labels[0] = "swipe-left"  # a push sample filed under swipe-left
    out, report = validate_dataset(SampleSet(labels, d.values, None))
    assert out.labels[0] == "push"
    assert report["swipe-left"]["moved_out"] == 1 and report["push"]["moved_in"] == 1
    assert np.array_equal(out.values, d.values)


def test_validate_needs_every_class():
    d = synth_dataset(1, 0, 0.0, gestures=["push", "pull"])
    with pytest.raises(EmptyClass):
        validate_dataset(d)


def test_perturb_mean_is_centered():
    a = 5.0
    y = perturb(np.zeros(100_000), NoiseSpec(a, "angle"), 0)
    assert abs(y.mean()) <= 0.05 * a

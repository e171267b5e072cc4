import numpy as np
import pytest
from hypothesis import given, strategies as st

from gesture_forge.errors import MissingSource
from gesture_forge.hand import KEYPOINTS
from gesture_forge.predictor import (
    CHANNEL_GROUPS,
    GruCell,
    InfluenceFactors,
    PredictorModel,
    TrainConfig,
    class_fuse,
    fuse_channels,
    gru_step,
    infill_missing,
    infill_stream,
    loss_and_grad,
    predict_next,
    sequence_loss,
    train_predictor,
)

from oracles import central_diff, gru_reference, rel_err


@given(st.integers(0, 10_000), st.floats(-3, 3))
def test_gru_step_matches_transcription(seed, x):
    rng = np.random.default_rng(seed)
    cell = GruCell.random(5, rng, scale=1.0)
    h = rng.uniform(-1, 1, 5)
    got, _ = gru_step(cell, h, x)
    ref = gru_reference(cell.w_z.tolist(), cell.w_r.tolist(), cell.w_h.tolist(), h.tolist(), x)
    assert np.max(np.abs(got - np.array(ref))) < 1e-12


def _params(rng, c=3, h=4):
    s = 0.6
    return {"w_z": rng.uniform(-s, s, (c, h, h + 1)), "w_r": rng.uniform(-s, s, (c, h, h + 1)),
            "w_h": rng.uniform(-s, s, (c, h, h + 1)), "w_o": rng.uniform(-s, s, (c, h)),
            "b_o": rng.uniform(-s, s, c)}


def test_batched_step_matches_single_cells():
    rng = np.random.default_rng(0)
    p = _params(rng)
    model = PredictorModel(mean=np.zeros(3), scale=np.ones(3), lo=-np.ones(3), hi=np.ones(3), **p)
    h = rng.uniform(-1, 1, (3, 2, 4))
    x = rng.normal(size=(3, 2))
    h2 = model.step(h, x)
    y = model.output(h2)
    for c in range(3):
        for b in range(2):
            hs, out = gru_step(model.cell(c), h[c, b], x[c, b])
            assert np.allclose(hs, h2[c, b], atol=1e-14)
            assert abs(out - y[c, b]) < 1e-12


def test_bptt_matches_central_differences():
    rng = np.random.default_rng(1)
    p = _params(rng)
    x = rng.normal(size=(6, 3, 2))
    loss, g = loss_and_grad(p, x)
    assert abs(loss - sequence_loss(p, x)) < 1e-12
    for k in p:
        num = central_diff(lambda: sequence_loss(p, x), p[k])
        assert rel_err(num, g[k]) < 1e-4, k


def test_influence_factors():
    f = InfluenceFactors.keypoints()
    b0 = f.sources(KEYPOINTS[3])
    assert b0[KEYPOINTS[3]] == 0.5
    assert sum(b0.values()) == pytest.approx(1.0)
    assert len(b0) == 4 and b0[KEYPOINTS[4]] == pytest.approx(0.5 / 3)
    assert f.sources(KEYPOINTS[-1]) == {KEYPOINTS[-1]: 1.0}
    assert all(abs(sum(b for _, b in g) - 1.0) < 1e-12 for g in CHANNEL_GROUPS)


def test_class_fuse():
    f = InfluenceFactors.from_classes({"X": ["a", "b", "c"], "Y": ["d"]})
    assert class_fuse(f, {"d": 0.3}, "d") == pytest.approx(0.3)
    same = {"a": 0.7, "b": 0.7, "c": 0.7}
    assert class_fuse(f, same, "a", lo=0.0, hi=1.0) == pytest.approx(0.7)
    mixed = class_fuse(f, {"a": 0.9, "b": 0.1, "c": 0.1}, "a")
    assert 0.1 < mixed < 0.9
    with pytest.raises(MissingSource):
        class_fuse(f, {"a": 0.1}, "a")


def _toy_data(n=24, t=12):
    rng = np.random.default_rng(4)
    phase = rng.uniform(0, 2 * np.pi, (n, 1, 1))
    time = np.arange(t)[None, :, None]
    base = np.sin(0.5 * time + phase + np.linspace(0, 1, 71)[None, None, :])
    return base * np.array([1.0] * 57 + [20.0] * 14)


def test_training_reduces_loss():
    data = _toy_data()
    losses = []
    train_predictor(data, TrainConfig(epochs=8, batch=8, lr=0.02), log=lambda e, l: losses.append(l))
    assert losses[-1] < 0.5 * losses[0]
    with pytest.raises(ValueError):
        train_predictor(data[:, :1])


def test_predict_next_shape_and_fuse_identity_for_agreeing_channels():
    data = _toy_data()
    model = train_predictor(data, TrainConfig(epochs=2, batch=8))
    pred = predict_next(model, data[:3])
    assert pred.shape == (3, 12, 71)
    mid = (model.lo + model.hi) / 2
    assert np.allclose(fuse_channels(model, mid), mid)


def test_infill_only_touches_missing_channels():
    data = _toy_data()
    model = train_predictor(data, TrainConfig(epochs=2, batch=8))
    vals = data[0].copy()
    conf = np.ones((12, 20))
    conf[7] = 0.0
    conf[9, 5] = 0.0
    out, oc = infill_stream(model, vals, conf)
    changed = np.any(out != vals, axis=1)
    assert changed[7] and changed[9]
    assert not changed[np.r_[0:7, 8, 10, 11]].any()
    assert np.all(oc[7] == 0.5) and oc[9, 5] == 0.5 and oc[9, 4] == 1.0
    # infilled values stay inside the training range
    assert np.all(out[7] >= model.lo - 1e-9) and np.all(out[7] <= model.hi + 1e-9)
    last, lc = infill_missing(model, vals[:8], conf[:8])
    assert np.allclose(last, out[7]) and np.all(lc == 0.5)


def test_constant_channel_learned_and_deterministic():
    data = np.full((4, 10, 71), 0.3)
    data[..., 5] = np.linspace(0, 1, 10)
    cfg = TrainConfig(epochs=200, batch=4, hidden=3)
    m1 = train_predictor(data, cfg)
    m2 = train_predictor(data, cfg)
    for k in m1.params():
        assert np.array_equal(m1.params()[k], m2.params()[k])
    pred = predict_next(m1, data)
    assert np.mean((pred[:, :-1, 0] - data[:, 1:, 0]) ** 2) < 1e-4


def test_hold_infill_stays_near_zero():
    from gesture_forge.datagen import synth_dataset
    data = synth_dataset(4, 0, 1.0)
    model = train_predictor(data, TrainConfig(epochs=6, batch=11))
    hold = data.values[data.labels.index("hold")]
    conf = np.ones((30, 20))
    conf[15, 6] = 0.0  # B3 hidden for one frame
    out, _ = infill_stream(model, hold, conf)
    assert np.all(np.abs(out[15, 3 * 6:3 * 6 + 3]) <= 0.1)
    assert np.array_equal(np.delete(out, 15, axis=0), np.delete(hold, 15, axis=0))


def test_zero_cell_examples():
    cell = GruCell.zeros(4)
    h, y = gru_step(cell, np.zeros(4), 0.7)
    assert np.all(h == 0) and y == 0
    v = np.array([1.0, -2.0, 0.5, 3.0])
    h, _ = gru_step(cell, v, -1.3)
    assert np.allclose(h, 0.5 * v, atol=1e-15)

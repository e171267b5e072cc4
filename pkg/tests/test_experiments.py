import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gesture_forge.experiments import (
    REFUSED,
    Pipeline,
    RunConfig,
    SweepReport,
    build_trial,
    canonical_templates,
    fully_occluded,
    inject_occlusion,
    retime_array,
    run_accuracy,
    run_trial,
    spearman,
    train_models,
)


def test_retime_ramp():
    assert np.allclose(retime_array([[0.0], [1.0]], 5)[:, 0], [0, 0.25, 0.5, 0.75, 1])


@given(arrays(float, st.tuples(st.integers(1, 12), st.just(3)), elements=st.floats(-5, 5)),
       st.integers(2, 40))
def test_retime_properties(x, n):
    out = retime_array(x, n)
    assert out.shape == (n, 3)
    assert np.array_equal(out[0], x[0]) and np.array_equal(out[-1], x[-1])
    assert np.all(out >= x.min(axis=0) - 1e-12) and np.all(out <= x.max(axis=0) + 1e-12)
    if len(x) >= 2:
        assert np.allclose(retime_array(x, len(x)), x)


def test_retime_constant_and_confidence():
    out, conf = retime_array(np.full((4, 2), 3.0), 7, np.arange(4.0)[:, None])
    assert np.all(out == 3.0)
    assert conf[:, 0].tolist() == [0, 0, 1, 1, 2, 2, 3]  # nearer frame; ties go to the earlier one
    with pytest.raises(ValueError):
        retime_array(np.zeros((3, 1)), 1)


@given(st.integers(0, 20), st.integers(0, 100))
def test_inject_occlusion_counts(k, seed):
    conf = np.ones((20, 20))
    out, idx = inject_occlusion(conf, k, rng_seed=seed)
    assert len(set(idx)) == k
    assert int(fully_occluded(out).sum()) == k
    assert np.all(out[[i for i in range(20) if i not in idx]] == 1)


def test_inject_occlusion_subset_and_window():
    conf = np.ones((45, 20))
    out, idx = inject_occlusion(conf, 5, affected=[0, 1], rng_seed=1, window=30)
    assert all(i >= 15 for i in idx)
    assert np.all(out[idx][:, :2] == 0) and np.all(out[idx][:, 2:] == 1)
    with pytest.raises(ValueError):
        inject_occlusion(conf, 31, window=30)


def test_run_config_invariants():
    with pytest.raises(ValueError):
        RunConfig(trials=0)
    with pytest.raises(ValueError):
        RunConfig(occlusion=16)


def test_trial_shapes_and_occlusion_values_untouched():
    cfg = RunConfig(occlusion=6)
    t = build_trial("pull", 2, cfg)
    clean = build_trial("pull", 2, RunConfig())
    assert t.values.shape == (45, 71) and t.confidence.shape == (45, 20)
    assert int(t.occluded.sum()) == 6 and not t.occluded[:15].any()
    assert np.array_equal(t.values, clean.values)
    long = build_trial("pull", 2, RunConfig(frames=35))
    assert long.values.shape == (50, 71)


def test_zero_noise_exact_trials_are_perfect():
    cfg = RunConfig(trials=2, vector_noise=0.0, angle_noise=0.0, jitter=0.0)
    rep = run_accuracy(cfg, Pipeline())
    assert all(acc == 1.0 for acc in (rep.accuracy(g)[""] for g in {r[1] for r in rep.rows}))


def test_refusal_label():
    assert run_trial(build_trial("push", 0, RunConfig(), occlusion=16), Pipeline()) == REFUSED


def test_sweep_report_csv():
    rep = SweepReport("frames")
    rep.add(30, "push", 4, 3, 1)
    rep.add(31, "push", 4, 4, 0)
    assert rep.to_csv().splitlines() == ["frames,gesture,trials,correct,refused,accuracy",
                                         "30,push,4,3,1,0.750000", "31,push,4,4,0,1.000000"]
    assert rep.accuracy("push") == {30: 0.75, 31: 1.0}


def test_spearman_direction():
    assert spearman([0, 1, 2, 3], [4, 3, 2, 1]) == pytest.approx(-1.0)


def test_train_models_pipeline_small():
    cfg = RunConfig(n_sample=2, gan_samples=60)
    msgs = []
    models = train_models(cfg, gan_epochs=1, log=msgs.append)
    assert len(models.dataset) == 60
    assert models.predictor.channels == 71
    assert any("relabeled" in m for m in msgs)
    assert len(canonical_templates()) == 11

import numpy as np
import pytest

from gesture_forge import weights
from gesture_forge.gan import GanModel
from gesture_forge.predictor import TrainConfig, train_predictor


def test_gan_round_trip(tmp_path):
    m = GanModel.init(6, 4, 5, np.random.default_rng(0), mean=np.arange(4.0) / 3, amplitude=5.0, mode="angle")
    path = tmp_path / "g.json"
    weights.save(path, m)
    back = weights.load(path)
    assert isinstance(back, GanModel) and back.mode == "angle" and back.amplitude == 5.0
    for k in ("w_ih", "w_hh", "b_h", "w_o", "b_o", "d_w", "mean"):
        assert np.array_equal(getattr(m, k), getattr(back, k))


def test_predictor_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    model = train_predictor(rng.normal(size=(4, 5, 71)), TrainConfig(epochs=1, hidden=3))
    path = tmp_path / "p.json"
    weights.save(path, model)
    back = weights.load(path)
    for k in model.params():
        assert np.array_equal(model.params()[k], back.params()[k])
    assert np.array_equal(model.lo, back.lo) and np.array_equal(model.scale, back.scale)
    assert weights.dumps(weights.predictor_to_dict(back)) == path.read_text()


def test_unknown_document(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"kind": "svm"}')
    with pytest.raises(ValueError):
        weights.load(p)

"""Per-channel GRU predictors, influence-factor fusion and occlusion infill.

Each of the 71 delta channels owns a small GRU with a scalar input that
predicts the channel's next value. The cells are stored stacked so a whole
batch of sequences runs through all channels as stacked matrix products.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Divergence, MissingSource
from .hand import (
    ANGLE_CLASSES,
    CLASS_SIZES,
    KEYPOINTS,
    N_CHANNELS,
    N_VECTOR_CHANNELS,
    VECTOR_KEYPOINTS,
    KeypointId,
    channel_confidence,
)

INFILL_CONFIDENCE = 0.5
_EPS = 1e-6


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def logit(p):
    return np.log(p) - np.log1p(-p)


@dataclass
class GruCell:
    """One cell; gate matrices act on the concatenation [h_prev, x]."""

    w_z: np.ndarray  # (H, H + 1)
    w_r: np.ndarray
    w_h: np.ndarray
    w_o: np.ndarray  # (H,)
    b_o: float = 0.0

    @property
    def hidden(self) -> int:
        return self.w_z.shape[0]

    @classmethod
    def zeros(cls, hidden: int) -> "GruCell":
        z = np.zeros((hidden, hidden + 1))
        return cls(z.copy(), z.copy(), z.copy(), np.zeros(hidden), 0.0)

    @classmethod
    def random(cls, hidden: int, rng, scale: float | None = None) -> "GruCell":
        s = 1.0 / np.sqrt(hidden + 1) if scale is None else scale
        w = lambda: rng.uniform(-s, s, (hidden, hidden + 1))  # noqa: E731
        return cls(w(), w(), w(), rng.uniform(-s, s, hidden), 0.0)


def gru_step(cell: GruCell, h_prev, x: float):
    h_prev = np.asarray(h_prev, dtype=float)
    a = np.append(h_prev, x)
    z = sigmoid(cell.w_z @ a)
    r = sigmoid(cell.w_r @ a)
    h_tilde = np.tanh(cell.w_h @ np.append(r * h_prev, x))
    h = (1.0 - z) * h_prev + z * h_tilde
    return h, float(cell.w_o @ h + cell.b_o)


# --- influence factors -----------------------------------------------------

@dataclass(frozen=True)
class InfluenceFactors:
    """Fusion weights: ``weights[target][source] = beta``."""

    weights: dict

    @classmethod
    def from_classes(cls, members_by_class: dict) -> "InfluenceFactors":
        out = {}
        for members in members_by_class.values():
            n = len(members)
            for t in members:
                if n == 1:
                    out[t] = {t: 1.0}
                else:
                    out[t] = {s: (0.5 if s == t else 0.5 / (n - 1)) for s in members}
        return cls(out)

    @classmethod
    def keypoints(cls) -> "InfluenceFactors":
        groups = {}
        for k in KEYPOINTS:
            groups.setdefault(k.cls, []).append(k)
        return cls.from_classes(groups)

    def sources(self, target):
        return self.weights[target]


def class_fuse(factors: InfluenceFactors, predictions: dict, target, w0: float = 1.0,
               lo: float = 0.0, hi: float = 1.0) -> float:
    """sigma(W0 * sum_i beta_i * y_i) mapped back onto the data range [lo, hi].

    Source predictions live in data units; each is taken to the logit scale
    of its position within [lo, hi] before weighting, so with W0 = 1 a single
    source (or agreeing sources) passes through unchanged inside the range.
    """
    betas = factors.sources(target)
    missing = [s for s in betas if s not in predictions]
    if missing:
        raise MissingSource(f"no prediction for {', '.join(map(str, missing))}")
    span = hi - lo
    if span <= 0:
        return float(lo)
    acc = 0.0
    for s, b in betas.items():
        p = np.clip((predictions[s] - lo) / span, _EPS, 1 - _EPS)
        acc += b * logit(p)
    return float(lo + span * sigmoid(w0 * acc))


def _channel_groups():
    """For every channel, the channels of its class that feed the fusion, with betas."""
    groups = []
    kf = InfluenceFactors.keypoints()
    vindex = {k: i for i, k in enumerate(VECTOR_KEYPOINTS)}
    for k in VECTOR_KEYPOINTS:
        for axis in range(3):
            srcs = [(3 * vindex[s] + axis, b) for s, b in kf.sources(k).items() if s in vindex]
            groups.append(srcs)
    by_finger = {}
    for i, c in enumerate(ANGLE_CLASSES):
        by_finger.setdefault(c, []).append(i)
    af = InfluenceFactors.from_classes(by_finger)
    for i in range(len(ANGLE_CLASSES)):
        groups.append([(N_VECTOR_CHANNELS + s, b) for s, b in af.sources(i).items()])
    return groups


CHANNEL_GROUPS = _channel_groups()
assert len(CHANNEL_GROUPS) == N_CHANNELS
# F0 carries no delta channel, so every vector class is complete without it
assert CLASS_SIZES["F"] == 1


# --- batched model ---------------------------------------------------------

@dataclass
class PredictorModel:
    """71 stacked cells plus per-channel standardization and data range."""

    w_z: np.ndarray  # (C, H, H + 1)
    w_r: np.ndarray
    w_h: np.ndarray
    w_o: np.ndarray  # (C, H)
    b_o: np.ndarray  # (C,)
    mean: np.ndarray
    scale: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    w0: np.ndarray = field(default=None)  # fusion weight per channel

    def __post_init__(self):
        if self.w0 is None:
            self.w0 = np.ones(len(self.b_o))

    @property
    def hidden(self) -> int:
        return self.w_z.shape[1]

    @property
    def channels(self) -> int:
        return self.w_z.shape[0]

    def cell(self, c: int) -> GruCell:
        return GruCell(self.w_z[c], self.w_r[c], self.w_h[c], self.w_o[c], float(self.b_o[c]))

    def params(self) -> dict:
        return {"w_z": self.w_z, "w_r": self.w_r, "w_h": self.w_h, "w_o": self.w_o, "b_o": self.b_o}

    def step(self, h, x):
        """One step for every channel: h (C, B, H), x (C, B) standardized."""
        return _forward_step(self.params(), h, x)[0]

    def output(self, h):
        """Per-channel predictions (C, B) from hidden states (C, B, H)."""
        return _readout(self.params(), h)


# Batched arrays are channel-major: hidden states are (C, B, H) and inputs
# (C, B), so every product is a stack of independent matmuls.

def _mm(w, a):
    """a (C, B, K) times w (C, H, K) transposed -> (C, B, H)."""
    return np.matmul(a, w.transpose(0, 2, 1))


def _readout(p, h):
    return np.matmul(h, p["w_o"][:, :, None])[..., 0] + p["b_o"][:, None]


def _forward_step(p, h, x):
    a = np.concatenate([h, x[..., None]], axis=-1)
    z = sigmoid(_mm(p["w_z"], a))
    r = sigmoid(_mm(p["w_r"], a))
    a2 = np.concatenate([r * h, x[..., None]], axis=-1)
    hh = np.tanh(_mm(p["w_h"], a2))
    h_new = (1.0 - z) * h + z * hh
    return h_new, (h, a, z, r, a2, hh)


def sequence_loss(p, x):
    """Summed per-channel MSE of next-step prediction; x is (T, C, B) standardized."""
    t_len, c, b = x.shape
    h = np.zeros((c, b, p["w_z"].shape[1]))
    loss = 0.0
    for t in range(t_len - 1):
        h, _ = _forward_step(p, h, x[t])
        loss += float(((_readout(p, h) - x[t + 1]) ** 2).sum())
    return loss / (b * (t_len - 1))


def loss_and_grad(p, x):
    """Loss of ``sequence_loss`` and its gradient by backpropagation through time."""
    t_len, c, b = x.shape
    hidden = p["w_z"].shape[1]
    h = np.zeros((c, b, hidden))
    caches, hs, dys = [], [], []
    norm = b * (t_len - 1)
    loss = 0.0
    for t in range(t_len - 1):
        h, cache = _forward_step(p, h, x[t])
        err = _readout(p, h) - x[t + 1]
        loss += float((err ** 2).sum())
        caches.append(cache)
        hs.append(h)
        dys.append(2.0 * err / norm)
    g = {k: np.zeros_like(v) for k, v in p.items()}
    dh_next = np.zeros((c, b, hidden))
    for t in reversed(range(t_len - 1)):
        h_prev, a, z, r, a2, hh = caches[t]
        dy = dys[t]
        g["w_o"] += np.matmul(dy[:, None, :], hs[t])[:, 0]
        g["b_o"] += dy.sum(axis=1)
        dh = dh_next + dy[..., None] * p["w_o"][:, None, :]
        dz = dh * (hh - h_prev)
        dhh = dh * z
        dh_prev = dh * (1.0 - z)
        dhh_pre = dhh * (1.0 - hh ** 2)
        g["w_h"] += np.matmul(dhh_pre.transpose(0, 2, 1), a2)
        drh = np.matmul(dhh_pre, p["w_h"])[..., :hidden]
        dr = drh * h_prev
        dh_prev += drh * r
        dz_pre = dz * z * (1.0 - z)
        dr_pre = dr * r * (1.0 - r)
        g["w_z"] += np.matmul(dz_pre.transpose(0, 2, 1), a)
        g["w_r"] += np.matmul(dr_pre.transpose(0, 2, 1), a)
        da = np.matmul(dz_pre, p["w_z"]) + np.matmul(dr_pre, p["w_r"])
        dh_prev += da[..., :hidden]
        dh_next = dh_prev
    return loss / norm, g


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    epochs: int = 30
    hidden: int = 16
    batch: int = 32
    rng_seed: int = 0


class Adam:
    def __init__(self, params: dict, lr: float, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def update(self, params: dict, grads: dict):
        self.t += 1
        for k in params:
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * grads[k]
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * grads[k] ** 2
            mh = self.m[k] / (1 - self.b1 ** self.t)
            vh = self.v[k] / (1 - self.b2 ** self.t)
            params[k] -= self.lr * mh / (np.sqrt(vh) + self.eps)


def train_predictor(values, config: TrainConfig = TrainConfig(), log=None) -> PredictorModel:
    """Fit the stacked cells to next-step regression on (N, T, C) sequences.

    ``values`` may also be a SampleSet. Channels are standardized by their
    mean and standard deviation before training.
    """
    values = np.asarray(getattr(values, "values", values), dtype=float)
    if values.ndim != 3 or len(values) == 0 or values.shape[1] < 2:
        raise ValueError("training data must be a non-empty (N, T, C) array with T >= 2")
    if config.epochs < 1 or config.lr <= 0:
        raise ValueError("epochs must be >= 1 and lr > 0")
    n, _, c = values.shape
    rng = np.random.default_rng(config.rng_seed)
    flat = values.reshape(-1, c)
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    scale = np.where(std > 1e-12, std, 1.0)
    lo, hi = flat.min(axis=0), flat.max(axis=0)
    hidden = config.hidden
    s = 1.0 / np.sqrt(hidden + 1)
    p = {
        "w_z": rng.uniform(-s, s, (c, hidden, hidden + 1)),
        "w_r": rng.uniform(-s, s, (c, hidden, hidden + 1)),
        "w_h": rng.uniform(-s, s, (c, hidden, hidden + 1)),
        "w_o": rng.uniform(-s, s, (c, hidden)),
        "b_o": np.zeros(c),
    }
    data = ((values - mean) / scale).transpose(1, 2, 0)  # (T, C, N)
    opt = Adam(p, config.lr)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch):
            idx = order[start:start + config.batch]
            loss, g = loss_and_grad(p, data[:, :, idx])
            if not np.isfinite(loss):
                raise Divergence(f"non-finite loss in epoch {epoch}")
            opt.update(p, g)
            total += loss * len(idx)
        if log is not None:
            log(epoch, total / n)
    return PredictorModel(mean=mean, scale=scale, lo=lo, hi=hi, **p)


def predict_next(model: PredictorModel, values) -> np.ndarray:
    """Teacher-forced next-step predictions in data units: (N, T, C) -> (N, T, C).

    Entry t is the prediction for frame t + 1 made after consuming frame t.
    """
    values = np.asarray(values, dtype=float)
    x = ((values - model.mean) / model.scale).transpose(1, 2, 0)  # (T, C, N)
    h = np.zeros((model.channels, x.shape[2], model.hidden))
    out = []
    for t in range(x.shape[0]):
        h = model.step(h, x[t])
        out.append(model.output(h))
    return np.array(out).transpose(2, 0, 1) * model.scale + model.mean


def fuse_channels(model: PredictorModel, raw_pred) -> np.ndarray:
    """Apply class fusion to a (C,) vector of per-channel predictions in data units."""
    span = model.hi - model.lo
    safe = np.where(span > 0, span, 1.0)
    u = np.clip((raw_pred - model.lo) / safe, _EPS, 1 - _EPS)
    lg = logit(u)
    out = np.empty(len(raw_pred))
    for c, srcs in enumerate(CHANNEL_GROUPS):
        acc = sum(b * lg[s] for s, b in srcs)
        out[c] = model.lo[c] + span[c] * sigmoid(model.w0[c] * acc) if span[c] > 0 else model.lo[c]
    return out


def infill_stream(model: PredictorModel, values, keypoint_conf):
    """Replace unobserved channels of a (T, 71) stream with fused predictions.

    Channels whose confidence is 0 are predicted from the running hidden state
    (which has consumed every earlier frame, infilled ones included) and fused
    across their class. Keypoints that were fully unobserved get confidence
    0.5 afterwards; everything observed passes through untouched.
    """
    values = np.array(values, dtype=float)
    kconf = np.array(keypoint_conf, dtype=float)
    missing = channel_confidence(kconf) == 0
    if not missing.any():
        return values, kconf
    h = np.zeros((model.channels, 1, model.hidden))
    for t in range(len(values)):
        if missing[t].any():
            pred = model.output(h)[:, 0] * model.scale + model.mean
            fused = fuse_channels(model, pred)
            values[t, missing[t]] = fused[missing[t]]
        x = (values[t] - model.mean) / model.scale
        h = model.step(h, x[:, None])
    kconf[kconf == 0] = INFILL_CONFIDENCE
    return values, kconf


def infill_missing(model: PredictorModel, history, history_conf, target: KeypointId | None = None):
    """Infill the last frame of ``history`` (T, 71) given keypoint confidences (T, 20).

    With ``target`` set, only that keypoint's channels are considered;
    otherwise every channel with confidence 0 is filled. Returns the
    completed last frame and its keypoint confidences.
    """
    values = np.asarray(history, dtype=float)
    kconf = np.array(history_conf, dtype=float)
    if len(values) < 1:
        raise ValueError("at least one frame of history is required")
    if target is not None:
        keep = np.ones(len(KEYPOINTS), bool)
        keep[KEYPOINTS.index(target)] = False
        last = kconf[-1].copy()
        last[keep & (last == 0)] = -1  # excluded from this call
        kconf[-1] = np.where(last == -1, 1.0, last)
        out_v, out_c = infill_stream(model, values, kconf)
        out_c[-1] = np.where(last == -1, 0.0, out_c[-1])
        return out_v[-1], out_c[-1]
    out_v, out_c = infill_stream(model, values, kconf)
    return out_v[-1], out_c[-1]

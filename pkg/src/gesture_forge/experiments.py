"""Synthetic recognition trials: stream construction, occlusion, retiming and sweeps."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .codec import GestureTemplate, normalize_numeric
from .datagen import (
    M_DEFAULT,
    NoiseSpec,
    SampleSet,
    _rng,
    gesture_index,
    perturb,
    poses_to_frames,
    sequence_to_arrays,
    synth_dataset,
    synth_poses,
    synth_transition,
    validate_dataset,
)
from .errors import RefusedTooOccluded
from .gan import GanModel, gan_sample, gan_train
from .hand import KEYPOINTS, N_VECTOR_CHANNELS, HandFrame, channel_confidence
from .kinematics import GESTURE_NAMES, GESTURES
from .predictor import PredictorModel, TrainConfig, infill_stream, train_predictor
from .recognizer import MAX_OCCLUDED, FrameBuffer, recognize

REFUSED = "refused"


def canonical_templates(m: int = M_DEFAULT, gestures=GESTURE_NAMES) -> list:
    """Noise-free, jitter-free reference performance of every gesture."""
    out = []
    for g in gestures:
        frames = poses_to_frames(synth_poses(g, 0, 0.0, m), reference=GESTURES[g].pose(0.0))
        values, _ = sequence_to_arrays(frames)
        out.append(GestureTemplate(g, values))
    return out


def templates_from_samples(data) -> list:
    """Per-label mean sequence of a SampleSet, in registry order."""
    groups = data.by_label()
    return [GestureTemplate(g, data.values[groups[g]].mean(axis=0)) for g in GESTURE_NAMES if g in groups]


# --- retiming ---------------------------------------------------------------

def retime_array(values, target_len: int, confidence=None):
    """Resample (T, D) rows onto ``target_len`` uniformly spaced time points.

    Values are linearly interpolated; confidences (T, C) take the value of
    the nearer source row, the earlier one on an exact tie.
    """
    values = np.asarray(values, dtype=float)
    if target_len < 2:
        raise ValueError("target_len must be at least 2")
    n = len(values)
    if n < 1:
        raise ValueError("cannot retime an empty sequence")
    pos = np.linspace(0.0, n - 1, target_len)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    frac = (pos - lo)[:, None]
    out = values[lo] * (1.0 - frac) + values[hi] * frac
    out[0], out[-1] = values[0], values[-1]
    if confidence is None:
        return out
    near = np.ceil(pos - 0.5).astype(int)
    return out, np.asarray(confidence, dtype=float)[near]


def retime_sequence(frames, target_len: int) -> list:
    """Retime HandFrames (vectors and angles interpolated) to ``target_len`` frames."""
    rows = np.array([f.channels() for f in frames])
    conf = np.array([f.confidence for f in frames])
    vals, conf = retime_array(rows, target_len, conf)
    return [HandFrame(v[:N_VECTOR_CHANNELS], v[N_VECTOR_CHANNELS:], c, t)
            for t, (v, c) in enumerate(zip(vals, conf))]


# --- occlusion --------------------------------------------------------------

def inject_occlusion(confidence, k: int, affected=None, rng_seed: int = 0, window=None):
    """Zero the confidences of ``affected`` keypoints (default: all) in ``k`` frames.

    ``confidence`` is (T, 20). Frames are drawn uniformly without replacement
    from the last ``window`` frames (default: all). Returns the new array and
    the sorted occluded frame indices.
    """
    conf = np.array(confidence, dtype=float)
    n = len(conf)
    window = n if window is None else min(window, n)
    if not 0 <= k <= window:
        raise ValueError(f"k must lie in [0, {window}]")
    rng = _rng(rng_seed, 41)
    idx = np.sort(n - window + rng.choice(window, size=k, replace=False))
    cols = list(range(len(KEYPOINTS))) if affected is None else \
        [KEYPOINTS.index(a) if not isinstance(a, int) else a for a in affected]
    for t in idx:
        conf[t, cols] = 0.0
    return conf, [int(t) for t in idx]


def fully_occluded(confidence) -> np.ndarray:
    return ~np.asarray(confidence).any(axis=-1)


# --- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    m: int = M_DEFAULT
    n_sample: int = 50
    gan_samples: int = 5000
    vector_noise: float = 1.0
    angle_noise: float = 5.0
    jitter: float = 1.0
    trials: int = 100
    occlusion: int = 0
    frames: int = M_DEFAULT
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.m, self.n_sample, self.gan_samples, self.trials, self.frames) < 1:
            raise ValueError("counts must be >= 1")
        if not 0 <= self.occlusion <= min(MAX_OCCLUDED, self.m):
            raise ValueError(f"occlusion frames must lie in [0, {MAX_OCCLUDED}]")


@dataclass
class Pipeline:
    normalize: bool = False
    predictor: PredictorModel | None = None
    fusion: str = "min"
    templates: list = field(default=None)

    def templates_for(self, m: int) -> list:
        if self.templates is None:
            self.templates = canonical_templates(m)
        return self.templates


@dataclass
class TrainedModels:
    vector_gan: GanModel
    angle_gan: GanModel
    predictor: PredictorModel
    dataset: SampleSet
    validation: dict


def train_models(config: RunConfig, gan_epochs: int = 5, gru: TrainConfig = TrainConfig(),
                 log=None) -> TrainedModels:
    """Seeds -> one GAN per channel block -> amplified set -> relabeling -> predictor.

    The two generators see the same seed pick for every amplified sample, so
    the vector and angle halves of a sample stay consistent.
    """
    seeds = synth_dataset(config.n_sample, config.rng_seed, config.jitter, config.m)
    vg = gan_train(seeds, NoiseSpec(config.vector_noise, "vector"), gan_epochs, rng_seed=config.rng_seed)
    ag = gan_train(seeds, NoiseSpec(config.angle_noise, "angle"), gan_epochs, rng_seed=config.rng_seed + 1)
    data = gan_sample(vg, seeds, n=config.gan_samples, rng_seed=config.rng_seed, partner=ag)
    data, report = validate_dataset(data)
    if log is not None:
        moved = sum(r["moved_out"] for r in report.values())
        log(f"amplified {len(data)} samples, {moved} relabeled")
    predictor = train_predictor(data, replace(gru, rng_seed=config.rng_seed),
                                None if log is None else (lambda e, l: log(f"gru epoch {e} loss {l:.6f}")))
    return TrainedModels(vg, ag, predictor, data, report)


@dataclass
class Trial:
    gesture: str
    values: np.ndarray      # (T, 71) noisy deltas
    confidence: np.ndarray  # (T, 20)
    gesture_frames: int     # the last ``gesture_frames`` rows are the gesture
    occluded: np.ndarray    # (T,) frames that were fully unobserved


def trial_seed(rng_seed: int, gesture: str, trial: int) -> int:
    return int(_rng(rng_seed, 31, gesture_index(gesture), trial).integers(2 ** 31))


def trial_frames(gesture: str, trial: int, config: RunConfig) -> list:
    """Noise-free HandFrames of one stream: a moving lead-in, then the gesture.

    The gesture is performed with ``config.jitter`` and retimed to
    ``config.frames`` frames; the whole stream shares the coordinate frame of
    the gesture's start pose and fills exactly ceil(1.5 M) frames when the
    gesture is no longer than M.
    """
    seed = trial_seed(config.rng_seed, gesture, trial)
    m = config.m
    length = config.frames
    reference = GESTURES[gesture].pose(0.0)
    poses = synth_poses(gesture, seed, config.jitter, m)
    gesture_frames = poses_to_frames(poses, reference)
    if length != m:
        gesture_frames = retime_sequence(gesture_frames, length)
    n_lead = math.ceil(1.5 * m) - min(length, m)
    lead = poses_to_frames(synth_transition(poses[0], n_lead, seed), reference)
    return lead + gesture_frames


def build_trial(gesture: str, trial: int, config: RunConfig, occlusion: int | None = None) -> Trial:
    """One recognition stream, delta-encoded, perturbed and occluded.

    Uniform noise goes onto the deltas (vector and angle blocks separately);
    ``occlusion`` frames (default ``config.occlusion``) among the newest M
    lose every keypoint.
    """
    seed = trial_seed(config.rng_seed, gesture, trial)
    m = config.m
    k = config.occlusion if occlusion is None else occlusion
    values, conf = sequence_to_arrays(trial_frames(gesture, trial, config))
    values = values.copy()
    values[:, :N_VECTOR_CHANNELS] = perturb(values[:, :N_VECTOR_CHANNELS],
                                            NoiseSpec(config.vector_noise, "vector"), seed)
    values[:, N_VECTOR_CHANNELS:] = perturb(values[:, N_VECTOR_CHANNELS:],
                                            NoiseSpec(config.angle_noise, "angle"), seed + 1)
    conf, _ = inject_occlusion(conf, k, rng_seed=seed, window=min(m, len(conf)))
    return Trial(gesture, values, conf, config.frames, fully_occluded(conf))


def _buffer(values, conf, occluded, m):
    buf = FrameBuffer(m)
    buf.extend(values, conf, occluded)
    return buf


def match_trial(trial: Trial, pipeline: Pipeline, m: int = M_DEFAULT):
    """Refusal check, infill, optional length normalization and matching.

    Returns the MatchResult; raises RefusedTooOccluded when more than
    MAX_OCCLUDED of the newest M frames were unobserved.
    """
    n_occ = int(trial.occluded[-m:].sum())
    if n_occ > MAX_OCCLUDED:
        raise RefusedTooOccluded(n_occ, MAX_OCCLUDED)
    capacity = math.ceil(1.5 * m)
    values, conf, occluded = trial.values, trial.confidence, trial.occluded
    if pipeline.predictor is not None:
        values, conf = infill_stream(pipeline.predictor, values, conf)
    templates = pipeline.templates_for(m)
    length = min(trial.gesture_frames, len(values))
    if not pipeline.normalize or length == m:
        # the ring buffer keeps only the newest ceil(1.5 M) frames
        buffer = _buffer(values, conf, occluded, m)
    else:
        # each template gets the stream with the gesture stretched onto its own symbols
        head = slice(max(0, len(values) - length - (capacity - m)), len(values) - length)
        tail = slice(len(values) - length, len(values))
        lead_conf = channel_confidence(conf[head])
        buffer = {}
        for t in templates:
            nv, nc = normalize_numeric(values[tail], channel_confidence(conf[tail]), t.numeric)
            buffer[t.label] = _buffer(np.concatenate([values[head], nv]),
                                      np.concatenate([lead_conf, nc]),
                                      np.concatenate([occluded[head], np.zeros(m, bool)]), m)
    return recognize(buffer, templates, pipeline.fusion)


def run_trial(trial: Trial, pipeline: Pipeline, m: int = M_DEFAULT) -> str:
    """Recognized label for one trial, or ``REFUSED``."""
    try:
        return match_trial(trial, pipeline, m).gesture
    except RefusedTooOccluded:
        return REFUSED


# --- sweeps ----------------------------------------------------------------

@dataclass
class SweepReport:
    condition_name: str
    rows: list = field(default_factory=list)  # (condition, gesture, trials, correct, refused)

    def add(self, condition, gesture, trials, correct, refused):
        self.rows.append((condition, gesture, trials, correct, refused))

    def accuracy(self, gesture=None) -> dict:
        """condition -> accuracy (pooled over gestures unless one is named)."""
        agg = {}
        for cond, g, n, ok, _ in self.rows:
            if gesture is not None and g != gesture:
                continue
            a = agg.setdefault(cond, [0, 0])
            a[0] += ok
            a[1] += n
        return {c: ok / n for c, (ok, n) in agg.items()}

    def to_csv(self) -> str:
        fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([self.condition_name, "gesture", "trials", "correct", "refused", "accuracy"])
        for cond, g, n, ok, ref in self.rows:
            w.writerow([cond, g, n, ok, ref, f"{ok / n:.6f}"])
        return fh.getvalue()


def run_accuracy(config: RunConfig, pipeline: Pipeline, gestures=GESTURE_NAMES,
                 condition=None, report: SweepReport | None = None) -> SweepReport:
    """Tally recognition correctness for every gesture under one condition."""
    report = report or SweepReport("condition")
    for g in gestures:
        ok = refused = 0
        for i in range(config.trials):
            got = run_trial(build_trial(g, i, config), pipeline, config.m)
            ok += got == g
            refused += got == REFUSED
        report.add(condition if condition is not None else "", g, config.trials, ok, refused)
    return report


def sweep_frames(config: RunConfig, pipeline: Pipeline, gestures, lengths=range(21, 36)) -> SweepReport:
    report = SweepReport("frames")
    for n in lengths:
        run_accuracy(replace(config, frames=n), pipeline, gestures, n, report)
    return report


def sweep_occlusion(config: RunConfig, pipeline: Pipeline, gestures, counts=range(0, 16)) -> SweepReport:
    report = SweepReport("occluded")
    for k in counts:
        run_accuracy(replace(config, occlusion=k), pipeline, gestures, k, report)
    return report


def spearman(x, y) -> float:
    return float(stats.spearmanr(x, y)[0])

"""Synthetic gesture sequences, uniform perturbation and nearest-center dataset validation."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyClass, UnknownGesture
from .hand import (
    ANGLE_CHANNEL_NAMES,
    KEYPOINT_INDEX,
    KEYPOINTS,
    N_CHANNELS,
    N_VECTOR_CHANNELS,
    F0,
    VECTOR_CHANNEL_NAMES,
    HandFrame,
    KeypointId,
    build_coordinate_frame,
    hand_frames_from_positions,
    sequence_deltas,
    stack_deltas,
)
from .kinematics import GESTURE_NAMES, GESTURES, PALM_CENTER, hand_pose

M_DEFAULT = 30
MODES = ("vector", "angle")


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform noise on [-amplitude, +amplitude]."""

    amplitude: float
    mode: str = "vector"

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError("noise amplitude must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    @classmethod
    def default(cls, mode: str) -> "NoiseSpec":
        return cls(5.0 if mode == "angle" else 1.0, mode)


def mode_slice(mode: str) -> slice:
    if mode == "vector":
        return slice(0, N_VECTOR_CHANNELS)
    if mode == "angle":
        return slice(N_VECTOR_CHANNELS, N_CHANNELS)
    raise ValueError(f"unknown mode {mode!r}")


def _rng(seed, *salt):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *salt]))


def gesture_index(label: str) -> int:
    try:
        return GESTURE_NAMES.index(label)
    except ValueError:
        raise UnknownGesture(f"unknown gesture {label!r}") from None


def _anchor(pose):
    """Coordinate frame of a pose plus its baseline length (F0 to palm center)."""
    f0 = pose[KEYPOINT_INDEX[KeypointId("F", 0)]]
    frame = build_coordinate_frame(f0, pose[KEYPOINT_INDEX[KeypointId("C", 3)]],
                                   pose[KEYPOINT_INDEX[KeypointId("B", 3)]])
    return frame, float(np.linalg.norm(PALM_CENTER - f0))


def synth_poses(label: str, seed: int, jitter: NoiseSpec | float = 0.0, m: int = M_DEFAULT,
                times=None) -> np.ndarray:
    """(m, 20, 3) raw keypoint positions of one performance of ``label``.

    A jitter amplitude ``a`` scales the motion by 1 + 0.1*a*U and bends the
    time axis by 0.2*a*U, with U uniform on [-1, 1].
    ``times`` overrides the progress values (default: m points over [0, 1]).
    """
    idx = gesture_index(label)
    motion = GESTURES[label]
    a = jitter.amplitude if isinstance(jitter, NoiseSpec) else float(jitter)
    rng = _rng(seed, idx, 1)
    scale = 1.0 + 0.1 * a * rng.uniform(-1, 1)
    warp = 0.2 * a * rng.uniform(-1, 1)
    us = np.linspace(0.0, 1.0, m) if times is None else np.asarray(times, dtype=float)
    return np.array([motion.pose(u, scale=scale, warp=warp) for u in us])


def poses_to_frames(poses, reference=None) -> list:
    """HandFrames expressed in the coordinate frame of ``reference`` (default: the first pose)."""
    frame, gamma = _anchor(poses[0] if reference is None else reference)
    return hand_frames_from_positions(poses, frame, gamma)


def synth_gesture(label: str, seed: int, jitter: NoiseSpec | float = 0.0, m: int = M_DEFAULT) -> list:
    """Deterministic sequence of ``m`` HandFrames for one gesture performance."""
    poses = synth_poses(label, seed, jitter, m)
    return poses_to_frames(poses, reference=GESTURES[label].pose(0.0))


def synth_transition(end_pose, n: int, seed: int, amplitude: float = 1.0) -> np.ndarray:
    """(n, 20, 3) poses of the hand arriving at ``end_pose`` from a random posture.

    The hand travels at constant speed along a random direction, so every
    lead-in frame carries motion. Used ahead of a gesture in recognition
    streams.
    """
    rng = _rng(seed, 97)
    start_flex = {c: tuple(rng.uniform(0, 45, 3)) for c in "BCDE"}
    start_thumb = tuple(rng.uniform(0, 40, 2))
    start = hand_pose(start_flex, start_thumb)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    offset = amplitude * rng.uniform(1.5, 2.5) * n * direction
    out = []
    for v in np.arange(1, n + 1) / n:
        w = 1.0 - v
        out.append(w * (start + offset) + (1.0 - w) * end_pose)
    return np.array(out)


def sequence_to_arrays(frames, previous=None):
    """(T, 71) deltas and (T, 20) confidences from HandFrames."""
    return stack_deltas(sequence_deltas(frames, previous))


@dataclass
class SampleSet:
    labels: list
    values: np.ndarray      # (N, M, 71) delta channels
    confidence: np.ndarray  # (N, M, 20) keypoint confidences
    mode: str = "vector"
    sample_ids: list = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[2] != N_CHANNELS:
            raise ValueError("values must have shape (N, M, 71)")
        if self.confidence is None:
            self.confidence = np.ones(self.values.shape[:2] + (len(KEYPOINTS),))
        self.confidence = np.asarray(self.confidence, dtype=float)
        self.labels = list(self.labels)
        if len(self.labels) != len(self.values):
            raise ValueError("one label per sample required")
        for lab in self.labels:
            gesture_index(lab)
        if self.sample_ids is None:
            self.sample_ids = list(range(len(self.labels)))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def __len__(self):
        return len(self.labels)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def block(self, mode: str | None = None) -> np.ndarray:
        return self.values[:, :, mode_slice(mode or self.mode)]

    def subset(self, idx) -> "SampleSet":
        idx = list(idx)
        return SampleSet([self.labels[i] for i in idx], self.values[idx], self.confidence[idx],
                         self.mode, [self.sample_ids[i] for i in idx])

    def by_label(self) -> dict:
        out = {}
        for i, lab in enumerate(self.labels):
            out.setdefault(lab, []).append(i)
        return out


def synth_dataset(n_per_gesture: int, seed: int, jitter: float = 1.0, m: int = M_DEFAULT,
                  gestures=GESTURE_NAMES, mode: str = "vector") -> SampleSet:
    labels, values, conf = [], [], []
    for g in gestures:
        for j in range(n_per_gesture):
            frames = synth_gesture(g, seed * 100003 + j, jitter, m)
            v, c = sequence_to_arrays(frames)
            labels.append(g)
            values.append(v)
            conf.append(c)
    return SampleSet(labels, np.array(values), np.array(conf), mode)


def perturb(sample, spec: NoiseSpec, seed: int) -> np.ndarray:
    """Add independent U(-a, a) draws to every element of ``sample``."""
    sample = np.asarray(sample, dtype=float)
    if spec.amplitude == 0:
        return sample.copy()
    rng = _rng(seed, 211)
    return sample + rng.uniform(-spec.amplitude, spec.amplitude, size=sample.shape)


def validate_dataset(data: SampleSet, mode: str | None = None):
    """Single pass nearest-center relabeling.

    Centers start as per-label means of the flattened sequences. Each sample
    in stored order is moved to the label of its nearest center when that
    differs from its current label, and the two affected centers are updated
    as running means. Sequence values are never altered.

    Returns the relabeled SampleSet and a report mapping each gesture to
    ``{"moved_out": n, "moved_in": n}``.
    """
    x = data.block(mode).reshape(len(data), -1)
    labels = list(data.labels)
    centers, counts = {}, {}
    for g in GESTURE_NAMES:
        idx = [i for i, lab in enumerate(labels) if lab == g]
        if not idx:
            raise EmptyClass(f"gesture {g!r} has no samples")
        centers[g] = x[idx].mean(axis=0)
        counts[g] = len(idx)
    report = {g: {"moved_out": 0, "moved_in": 0} for g in GESTURE_NAMES}
    names = list(GESTURE_NAMES)
    for i in range(len(labels)):
        cur = labels[i]
        d = np.array([np.linalg.norm(x[i] - centers[g]) for g in names])
        best = names[int(np.argmin(d))]
        if best == cur or d[names.index(best)] >= d[names.index(cur)]:
            continue
        # running means: remove the sample from its old class, add it to the new one
        if counts[cur] > 1:
            centers[cur] = (centers[cur] * counts[cur] - x[i]) / (counts[cur] - 1)
        counts[cur] -= 1
        centers[best] = (centers[best] * counts[best] + x[i]) / (counts[best] + 1)
        counts[best] += 1
        labels[i] = best
        report[cur]["moved_out"] += 1
        report[best]["moved_in"] += 1
    out = SampleSet(labels, data.values, data.confidence, data.mode, list(data.sample_ids))
    return out, report


# --- CSV persistence -------------------------------------------------------

CONF_NAMES = tuple(f"conf.{k}" for k in KEYPOINTS)
CSV_HEADER = ("label", "sample_id", "frame_idx") + tuple(f"d.{n}" for n in VECTOR_CHANNEL_NAMES) \
    + tuple(f"d.ang.{n}" for n in ANGLE_CHANNEL_NAMES) + CONF_NAMES


def _fmt(x: float) -> str:
    return repr(float(x))


def sampleset_to_csv(data: SampleSet, fh=None) -> str | None:
    own = fh is None
    fh = io.StringIO() if own else fh
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for lab, sid, seq, conf in zip(data.labels, data.sample_ids, data.values, data.confidence):
        for t in range(seq.shape[0]):
            w.writerow([lab, sid, t] + [_fmt(v) for v in seq[t]] + [_fmt(c) for c in conf[t]])
    return fh.getvalue() if own else None


def sampleset_from_csv(fh, mode: str = "vector") -> SampleSet:
    reader = csv.reader(fh)
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ValueError("unexpected SampleSet CSV header")
    groups = {}
    order = []
    for row in reader:
        if not row:
            continue
        key = (row[0], row[1])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append((int(row[2]), [float(v) for v in row[3:]]))
    labels, values, conf, ids = [], [], [], []
    for key in order:
        rows = sorted(groups[key])
        arr = np.array([r[1] for r in rows])
        labels.append(key[0])
        ids.append(int(key[1]) if key[1].lstrip("-").isdigit() else key[1])
        values.append(arr[:, :N_CHANNELS])
        conf.append(arr[:, N_CHANNELS:])
    lengths = {len(v) for v in values}
    if len(lengths) > 1:
        raise ValueError("all samples must have the same number of frames")
    return SampleSet(labels, np.array(values), np.array(conf), mode, ids)


def frames_to_csv(frames, fh) -> None:
    """HandFrame rows: frame_idx, 57 vector components, 14 angles, 20 confidences."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("frame_idx",) + tuple(f"v.{n}" for n in VECTOR_CHANNEL_NAMES)
               + tuple(f"ang.{n}" for n in ANGLE_CHANNEL_NAMES) + CONF_NAMES)
    for f in frames:
        w.writerow([f.timestamp] + [_fmt(v) for v in f.channels()] + [_fmt(c) for c in f.confidence])


def frames_from_csv(fh) -> list:
    reader = csv.reader(fh)
    header = next(reader)
    if not header or header[0] != "frame_idx":
        raise ValueError("unexpected frame CSV header")
    out = []
    for row in reader:
        if not row:
            continue
        vals = np.array([float(v) for v in row[1:]])
        out.append(HandFrame(vals[:N_VECTOR_CHANNELS], vals[N_VECTOR_CHANNELS:N_CHANNELS],
                             vals[N_CHANNELS:], int(row[0])))
    return out

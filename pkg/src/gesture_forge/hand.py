"""Hand keypoints, the hand-attached coordinate frame, joint angles and frame deltas.

The hand has 20 keypoints in six classes. Fingers B..E carry four keypoints
numbered 0 (tip) to 3 (knuckle), the thumb A carries three, and class F holds
the single anchor keypoint F0 that serves as the coordinate origin.

Per-keypoint data is stored as numpy arrays in the canonical order given by
``KEYPOINTS``; vectors skip F0 and follow ``VECTOR_KEYPOINTS``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateAngle, DegenerateFrame, KeyMismatch

CLASSES = ("A", "B", "C", "D", "E", "F")
CLASS_SIZES = {"A": 3, "B": 4, "C": 4, "D": 4, "E": 4, "F": 1}


@dataclass(frozen=True, order=True)
class KeypointId:
    cls: str
    index: int

    def __post_init__(self):
        if self.cls not in CLASS_SIZES:
            raise ValueError(f"unknown keypoint class {self.cls!r}")
        if not 0 <= self.index < CLASS_SIZES[self.cls]:
            raise ValueError(f"class {self.cls} has no keypoint {self.index}")

    def __str__(self):
        return f"{self.cls}{self.index}"

    @classmethod
    def parse(cls, text: str) -> "KeypointId":
        return cls(text[0].upper(), int(text[1:]))


KEYPOINTS = tuple(KeypointId(c, i) for c in CLASSES for i in range(CLASS_SIZES[c]))
F0 = KeypointId("F", 0)
VECTOR_KEYPOINTS = tuple(k for k in KEYPOINTS if k != F0)
KEYPOINT_INDEX = {k: i for i, k in enumerate(KEYPOINTS)}
VECTOR_INDEX = {k: i for i, k in enumerate(VECTOR_KEYPOINTS)}


def _k(name):
    return KeypointId.parse(name)


def _angle_triples():
    triples = [(_k("A0"), _k("A1"), _k("A2")), (_k("A1"), _k("A2"), F0)]
    for c in "BCDE":
        triples += [
            (_k(f"{c}0"), _k(f"{c}1"), _k(f"{c}2")),
            (_k(f"{c}1"), _k(f"{c}2"), _k(f"{c}3")),
            (_k(f"{c}2"), _k(f"{c}3"), F0),
        ]
    return tuple(triples)


# Joint angle i is measured at the middle keypoint of ANGLE_TRIPLES[i].
ANGLE_TRIPLES = _angle_triples()
ANGLE_CLASSES = tuple(t[0].cls for t in ANGLE_TRIPLES)
N_ANGLES = len(ANGLE_TRIPLES)
N_VECTOR_CHANNELS = 3 * len(VECTOR_KEYPOINTS)
N_CHANNELS = N_VECTOR_CHANNELS + N_ANGLES

VECTOR_CHANNEL_NAMES = tuple(f"{k}.{ax}" for k in VECTOR_KEYPOINTS for ax in "xyz")
ANGLE_CHANNEL_NAMES = tuple(f"{a}{b}{c}".replace("F0", "F") for a, b, c in ANGLE_TRIPLES)
CHANNEL_NAMES = VECTOR_CHANNEL_NAMES + tuple(f"ang.{n}" for n in ANGLE_CHANNEL_NAMES)

assert len(KEYPOINTS) == 20 and len(VECTOR_KEYPOINTS) == 19 and N_ANGLES == 14


@dataclass(frozen=True)
class CoordinateFrame:
    origin: np.ndarray
    axis_x: np.ndarray
    axis_y: np.ndarray
    axis_z: np.ndarray

    @property
    def rotation(self) -> np.ndarray:
        """Rows are the frame axes, so ``rotation @ (p - origin)`` gives local coordinates."""
        return np.stack([self.axis_x, self.axis_y, self.axis_z])

    def to_local(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return (points - self.origin) @ self.rotation.T


def build_coordinate_frame(f0, c3, b3) -> CoordinateFrame:
    """Orthonormal frame anchored at ``f0``.

    ``axis_y`` points from f0 to c3, ``axis_z`` is the normal of the plane
    through the three points (oriented along (c3-f0) x (b3-f0)), and
    ``axis_x = axis_y x axis_z`` so the triad is right-handed.
    """
    f0, c3, b3 = (np.asarray(p, dtype=float) for p in (f0, c3, b3))
    u = c3 - f0
    v = b3 - f0
    normal = np.cross(u, v)
    area = 0.5 * np.linalg.norm(normal)
    if area <= 1e-12 or np.linalg.norm(u) <= 1e-12:
        raise DegenerateFrame("anchor keypoints are collinear or coincident")
    axis_y = u / np.linalg.norm(u)
    axis_z = normal / np.linalg.norm(normal)
    axis_x = np.cross(axis_y, axis_z)
    return CoordinateFrame(f0.copy(), axis_x, axis_y, axis_z)


@dataclass(frozen=True)
class HandFrame:
    """One time step: 19 relative vectors, 14 angles (degrees), 20 confidences."""

    vectors: np.ndarray
    angles: np.ndarray
    confidence: np.ndarray = field(default_factory=lambda: np.ones(len(KEYPOINTS)))
    timestamp: int = 0
    keys: tuple = VECTOR_KEYPOINTS

    def __post_init__(self):
        object.__setattr__(self, "vectors", np.asarray(self.vectors, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "angles", np.asarray(self.angles, dtype=float).ravel())
        object.__setattr__(self, "confidence", np.asarray(self.confidence, dtype=float).ravel())
        if len(self.vectors) != len(self.keys):
            raise KeyMismatch(f"{len(self.vectors)} vectors for {len(self.keys)} keys")

    def channels(self) -> np.ndarray:
        return np.concatenate([self.vectors.ravel(), self.angles])


@dataclass(frozen=True)
class DeltaFrame:
    dvectors: np.ndarray
    dangles: np.ndarray
    confidence: np.ndarray = field(default_factory=lambda: np.ones(len(KEYPOINTS)))
    keys: tuple = VECTOR_KEYPOINTS

    def __post_init__(self):
        object.__setattr__(self, "dvectors", np.asarray(self.dvectors, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "dangles", np.asarray(self.dangles, dtype=float).ravel())
        object.__setattr__(self, "confidence", np.asarray(self.confidence, dtype=float).ravel())

    def channels(self) -> np.ndarray:
        return np.concatenate([self.dvectors.ravel(), self.dangles])

    @classmethod
    def from_channels(cls, values, confidence=None) -> "DeltaFrame":
        values = np.asarray(values, dtype=float)
        conf = np.ones(len(KEYPOINTS)) if confidence is None else confidence
        return cls(values[:N_VECTOR_CHANNELS], values[N_VECTOR_CHANNELS:], conf)


def wrap_degrees(d):
    """Map angle differences into (-180, 180]."""
    d = np.asarray(d, dtype=float)
    w = np.mod(d + 180.0, 360.0) - 180.0
    return np.where(w == -180.0, 180.0, w)


def frame_delta(curr: HandFrame, prev: HandFrame) -> DeltaFrame:
    if tuple(curr.keys) != tuple(prev.keys) or curr.angles.shape != prev.angles.shape:
        raise KeyMismatch("frames carry different keypoint sets")
    return DeltaFrame(
        curr.vectors - prev.vectors,
        wrap_degrees(curr.angles - prev.angles),
        curr.confidence.copy(),
        curr.keys,
    )


def joint_angle(a, b, c) -> float:
    """Angle at ``b`` between the arms b->a and b->c, in degrees within [0, 180]."""
    a, b, c = (np.asarray(p, dtype=float) for p in (a, b, c))
    u = a - b
    v = c - b
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu <= 1e-12 or nv <= 1e-12:
        raise DegenerateAngle("joint angle arm has zero length")
    # atan2 stays accurate near 0 and 180 degrees where arccos loses digits
    return float(np.degrees(np.arctan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v))))


def positions_array(positions) -> np.ndarray:
    """Accept either a (20, 3) array in canonical order or a KeypointId mapping."""
    if isinstance(positions, Mapping):
        missing = [str(k) for k in KEYPOINTS if k not in positions]
        if missing:
            raise KeyMismatch(f"missing keypoints: {', '.join(missing)}")
        return np.array([np.asarray(positions[k], dtype=float) for k in KEYPOINTS])
    arr = np.asarray(positions, dtype=float)
    if arr.shape[0] != len(KEYPOINTS):
        raise KeyMismatch(f"expected {len(KEYPOINTS)} keypoint positions, got {arr.shape[0]}")
    return arr


_TRIPLE_INDEX = np.array([[KEYPOINT_INDEX[k] for k in t] for t in ANGLE_TRIPLES])


def angle_sets(positions) -> np.ndarray:
    """Joint angles for a stack of poses: (..., 20, 3) -> (..., 14) degrees."""
    pos = np.asarray(positions, dtype=float)
    u = pos[..., _TRIPLE_INDEX[:, 0], :] - pos[..., _TRIPLE_INDEX[:, 1], :]
    v = pos[..., _TRIPLE_INDEX[:, 2], :] - pos[..., _TRIPLE_INDEX[:, 1], :]
    bad = (np.linalg.norm(u, axis=-1) <= 1e-12) | (np.linalg.norm(v, axis=-1) <= 1e-12)
    if bad.any():
        idx = sorted(set(np.nonzero(bad)[-1].tolist()))
        names = ", ".join(ANGLE_CHANNEL_NAMES[i] for i in idx)
        raise DegenerateAngle(f"degenerate joint angles: {names}", idx)
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    return np.degrees(np.arctan2(cross, np.einsum("...i,...i->...", u, v)))


def angle_set(positions) -> np.ndarray:
    return angle_sets(positions_array(positions))


def hand_frame_from_positions(positions, frame: CoordinateFrame, scale: float,
                              confidence=None, timestamp: int = 0) -> HandFrame:
    """Express 3-D keypoint positions in ``frame`` and divide by ``scale``."""
    pos = positions_array(positions)
    local = frame.to_local(pos) / scale
    vec = local[[KEYPOINT_INDEX[k] for k in VECTOR_KEYPOINTS]]
    conf = np.ones(len(KEYPOINTS)) if confidence is None else confidence
    return HandFrame(vec, angle_set(pos), conf, timestamp)


def hand_frames_from_positions(poses, frame: CoordinateFrame, scale: float) -> list:
    """Batch version of ``hand_frame_from_positions`` for a (T, 20, 3) stack."""
    poses = np.asarray(poses, dtype=float)
    local = frame.to_local(poses) / scale
    vec_idx = [KEYPOINT_INDEX[k] for k in VECTOR_KEYPOINTS]
    angles = angle_sets(poses)
    return [HandFrame(local[t, vec_idx], angles[t], np.ones(len(KEYPOINTS)), t)
            for t in range(len(poses))]


def channel_confidence(keypoint_conf) -> np.ndarray:
    """Per-channel confidences from per-keypoint ones.

    Works on a single (20,) vector or a stacked (T, 20) array. Vector channels
    inherit their keypoint's value; an angle takes the minimum over its three
    keypoints.
    """
    kc = np.asarray(keypoint_conf, dtype=float)
    vec_idx = [KEYPOINT_INDEX[k] for k in VECTOR_KEYPOINTS]
    vec = np.repeat(kc[..., vec_idx], 3, axis=-1)
    tri = np.array([[KEYPOINT_INDEX[k] for k in t] for t in ANGLE_TRIPLES])
    ang = kc[..., tri].min(axis=-1)
    return np.concatenate([vec, ang], axis=-1)


def stack_deltas(frames: Sequence[DeltaFrame]):
    """(T, 71) channel values and (T, 20) keypoint confidences."""
    values = np.array([f.channels() for f in frames])
    conf = np.array([f.confidence for f in frames])
    return values, conf


def sequence_deltas(frames: Sequence[HandFrame], previous: HandFrame | None = None):
    """Deltas between consecutive frames; the first is taken against ``previous``
    (or against itself, which makes it zero)."""
    out = []
    prev = frames[0] if previous is None else previous
    for f in frames:
        out.append(frame_delta(f, prev))
        prev = f
    return out

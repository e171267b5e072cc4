"""Synthetic 3-D hand poses and the parametric gesture registry.

Units are baseline lengths: F0 sits at the origin and the palm center at
(0, 1, 0). x points toward the thumb side, y along the fingers and z out of
the palm toward the camera.

Each gesture is a function of progress u in [0, 1] built from three pieces:
finger flexion, a rotation of the hand about a pivot (F0 stays put, so the
joint angles involving F0 change) and a rigid motion of the whole arm.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hand import KEYPOINT_INDEX, KEYPOINTS, KeypointId

PALM_CENTER = np.array([0.0, 1.0, 0.0])
WRIST = np.array([0.0, 0.35, 0.0])

_FINGERS = {
    # knuckle position, direction in the palm plane, segment lengths k3->k2->k1->k0
    "B": ((0.42, 1.65), (0.14, 1.0), (0.50, 0.30, 0.24)),
    "C": ((0.12, 1.72), (0.03, 1.0), (0.55, 0.34, 0.26)),
    "D": ((-0.17, 1.67), (-0.08, 1.0), (0.52, 0.32, 0.25)),
    "E": ((-0.42, 1.55), (-0.20, 1.0), (0.40, 0.25, 0.21)),
}
_THUMB = ((0.50, 0.80), (0.75, 0.66), (0.40, 0.32))
REST_FLEX = 12.0


def _cross(a, b):
    # plain 3-vector cross product; np.cross is slow for single vectors
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def _rot(axis, deg):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.sqrt(axis @ axis)
    t = np.radians(deg)
    x, y, z = axis
    c, s = np.cos(t), np.sin(t)
    C = 1 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def _chain(base, direction, lengths, flex, curl_axis):
    """Walk a finger from its base, bending by ``flex[j]`` degrees at each joint."""
    pts = [np.asarray(base, dtype=float)]
    d = np.asarray(direction, dtype=float)
    d = d / np.sqrt(d @ d)
    for length, theta in zip(lengths, flex):
        d = _rot(curl_axis(d), theta) @ d
        pts.append(pts[-1] + length * d)
    return pts


def hand_pose(flex=None, thumb_flex=None) -> np.ndarray:
    """(20, 3) keypoint positions for the given joint flexion (degrees).

    ``flex`` maps finger letter to three angles (knuckle, middle, distal);
    ``thumb_flex`` holds two angles for the thumb.
    """
    flex = flex or {}
    pos = np.zeros((len(KEYPOINTS), 3))
    z = np.array([0.0, 0.0, 1.0])
    # curling a finger turns it toward +z (out of the palm)
    finger_axis = lambda d: _cross(z, d)  # noqa: E731
    for c, (base, direction, lengths) in _FINGERS.items():
        f = flex.get(c, (REST_FLEX,) * 3)
        d3 = np.array([direction[0], direction[1], 0.0])
        pts = _chain((base[0], base[1], 0.0), d3, lengths, f, finger_axis)
        for i, p in enumerate(pts):
            pos[KEYPOINT_INDEX[KeypointId(c, 3 - i)]] = p
    tf = thumb_flex if thumb_flex is not None else (REST_FLEX, REST_FLEX)
    base, direction, lengths = _THUMB
    d3 = np.array([direction[0], direction[1], 0.25])
    # the thumb folds across the palm, around an axis tilted out of the plane
    tilt = np.array([0.3, -0.2, 1.0])
    thumb_axis = lambda d: _cross(tilt, d)  # noqa: E731
    pts = _chain((base[0], base[1], 0.15), d3, lengths, tf, thumb_axis)
    for i, p in enumerate(pts):
        pos[KEYPOINT_INDEX[KeypointId("A", 2 - i)]] = p
    return pos


REST_POSE = hand_pose()


def min_jerk(u):
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10 - 15 * u + 6 * u * u)


def bump(u):
    """Out-and-back profile: 0 at both ends, 1 at the midpoint."""
    return np.sin(np.pi * np.clip(u, 0.0, 1.0)) ** 2


@dataclass(frozen=True)
class Motion:
    """Parametric description of one gesture.

    Flexion values are offsets in degrees from ``start_flex``; the twist
    rotates every keypoint except F0 about ``twist_pivot``; the swing moves
    the whole arm (F0 included) about ``swing_pivot``; ``shift`` is a
    translation of the whole arm. Each component follows its own profile.
    """

    start_flex: dict = field(default_factory=dict)
    flex: dict = field(default_factory=dict)
    flex_profile: str = "ramp"
    start_thumb: tuple = (REST_FLEX, REST_FLEX)
    thumb: tuple = (0.0, 0.0)
    twist_axis: tuple = (0.0, 0.0, 1.0)
    twist_deg: float = 0.0
    twist_pivot: tuple = tuple(WRIST)
    swing_deg: float = 0.0
    swing_pivot: tuple = (0.0, -8.0, 0.0)
    shift: tuple = (0.0, 0.0, 0.0)
    shift_profile: str = "ramp"

    def pose(self, u: float, scale: float = 1.0, warp: float = 0.0) -> np.ndarray:
        """Keypoints at progress ``u``; ``scale`` multiplies every amplitude and
        ``warp`` bends the time axis (positive values start late and end fast)."""
        if warp:
            u = float(np.clip(u, 0.0, 1.0)) ** np.exp(warp)
        s = float(min_jerk(u))
        fp = float(bump(u)) if self.flex_profile == "bump" else s
        flex = {}
        for c in "BCDE":
            base = np.asarray(self.start_flex.get(c, (REST_FLEX,) * 3), dtype=float)
            extra = np.asarray(self.flex.get(c, (0.0, 0.0, 0.0)), dtype=float)
            flex[c] = tuple(base + scale * fp * extra)
        thumb = tuple(np.asarray(self.start_thumb) + scale * fp * np.asarray(self.thumb))
        pos = hand_pose(flex, thumb)
        if self.twist_deg:
            R = _rot(self.twist_axis, scale * s * self.twist_deg)
            piv = np.asarray(self.twist_pivot)
            f0 = KEYPOINT_INDEX[KeypointId("F", 0)]
            keep = pos[f0].copy()
            pos = (pos - piv) @ R.T + piv
            pos[f0] = keep
        if self.swing_deg:
            R = _rot((0.0, 0.0, 1.0), scale * s * self.swing_deg)
            piv = np.asarray(self.swing_pivot)
            pos = (pos - piv) @ R.T + piv
        sp = float(bump(u)) if self.shift_profile == "bump" else s
        pos = pos + scale * sp * np.asarray(self.shift)
        return pos


TRAVEL = 22.0

GESTURES = {
    "push": Motion(start_flex={c: (35.0, 35.0, 25.0) for c in "BCDE"},
                   flex={c: (-35.0, -35.0, -25.0) for c in "BCDE"},
                   shift=(0.0, 0.0, TRAVEL)),
    "pull": Motion(flex={c: (45.0, 50.0, 30.0) for c in "BCDE"},
                   shift=(0.0, 0.0, -TRAVEL)),
    "hold": Motion(),
    "swipe-left": Motion(twist_deg=-30.0, shift=(-TRAVEL, 0.0, 0.0)),
    "swipe-right": Motion(twist_deg=30.0, shift=(TRAVEL, 0.0, 0.0)),
    "swipe-up": Motion(twist_axis=(1.0, 0.0, 0.0), twist_deg=-35.0, shift=(0.0, TRAVEL, 0.0)),
    "swipe-down": Motion(twist_axis=(1.0, 0.0, 0.0), twist_deg=35.0, shift=(0.0, -TRAVEL, 0.0)),
    "rotate-left": Motion(twist_deg=70.0, twist_pivot=tuple(PALM_CENTER), swing_deg=80.0),
    "rotate-right": Motion(twist_deg=-70.0, twist_pivot=tuple(PALM_CENTER), swing_deg=-80.0),
    "click": Motion(flex={"B": (60.0, 70.0, 40.0)}, flex_profile="bump",
                    shift=(0.0, 0.0, 0.6 * TRAVEL), shift_profile="bump"),
    "pick": Motion(flex={"B": (40.0, 45.0, 30.0)}, thumb=(45.0, 40.0),
                   shift=(0.0, -0.6 * TRAVEL, 0.0), shift_profile="bump"),
}
GESTURE_NAMES = tuple(GESTURES)

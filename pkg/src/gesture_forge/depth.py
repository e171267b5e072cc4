"""Depth-mask encoding: palm center, baseline length, prospect regions, confidences.

Pixel coordinates are (row, col). Encoded vectors use x to the right,
y up the image and z out of the image, all divided by the baseline length.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyMask, NoBackground, ZeroBaseline
from .hand import F0, KEYPOINT_INDEX, KEYPOINTS, VECTOR_KEYPOINTS, HandFrame, KeypointId, angle_set

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class DepthMask:
    depth: np.ndarray  # (height, width); 0 is background

    def __post_init__(self):
        d = np.asarray(self.depth)
        if d.ndim != 2 or min(d.shape) < 1:
            raise ValueError("depth mask must be a non-empty 2-D grid")
        object.__setattr__(self, "depth", d)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def foreground(self) -> np.ndarray:
        return self.depth > 0

    @classmethod
    def from_binary(cls, cells) -> "DepthMask":
        return cls(np.asarray(cells, dtype=bool).astype(np.int64))


@dataclass(frozen=True)
class ProspectRegion:
    cells: np.ndarray  # (n, 2) row/col pairs
    centroid: np.ndarray
    depth: float = 0.0
    class_hint: KeypointId | None = None


@dataclass(frozen=True)
class Baseline:
    center: np.ndarray
    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise ZeroBaseline("baseline length must be positive")


def distance_to_background_sq(mask: DepthMask, pad_border: bool = True) -> np.ndarray:
    """Exact squared Euclidean distance from every cell to the nearest background cell."""
    fg = mask.foreground
    if pad_border:
        fg = np.pad(fg, 1, constant_values=False)
    if fg.all():
        raise NoBackground("mask has no background cell")
    _, (ri, ci) = ndimage.distance_transform_edt(fg, return_indices=True)
    rows, cols = np.indices(fg.shape)
    d2 = (rows - ri) ** 2 + (cols - ci) ** 2
    return d2[1:-1, 1:-1] if pad_border else d2


def gravity_center(mask: DepthMask, pad_border: bool = True) -> np.ndarray:
    """Foreground cell farthest from the background; first in row-major order on ties."""
    if not mask.foreground.any():
        raise EmptyMask("mask has no foreground cell")
    d2 = np.where(mask.foreground, distance_to_background_sq(mask, pad_border), -1)
    flat = int(np.argmax(d2))
    return np.array(np.unravel_index(flat, d2.shape), dtype=float)


def baseline_from(center, elbow) -> Baseline:
    center = np.asarray(center, dtype=float)
    length = float(np.linalg.norm(center - np.asarray(elbow, dtype=float)))
    if length <= 0:
        raise ZeroBaseline("palm center coincides with the elbow")
    return Baseline(center, length)


def keypoint_confidence(d_euc: float, baseline: Baseline) -> float:
    if d_euc < 0:
        raise ValueError("distance must be non-negative")
    return float(min(max(1.0 - d_euc / (4.0 * baseline.length), 0.0), 1.0))


def segment_prospects(mask: DepthMask, depth_threshold: float) -> list:
    """4-connected components of cells whose depth reaches ``depth_threshold``."""
    prospect = mask.depth >= depth_threshold
    prospect &= mask.foreground
    labels, n = ndimage.label(prospect, structure=FOUR_CONNECTED)
    regions = []
    for lab in range(1, n + 1):
        cells = np.argwhere(labels == lab)
        regions.append(ProspectRegion(
            cells=cells,
            centroid=cells.mean(axis=0),
            depth=float(mask.depth[labels == lab].mean()),
        ))
    return regions


def match_regions(regions, skeleton: np.ndarray) -> dict:
    """Greedy nearest pairing of regions to skeleton keypoints (each used once).

    Returns keypoint index -> region index.
    """
    if not regions:
        return {}
    cent = np.array([r.centroid for r in regions])
    d = np.linalg.norm(cent[:, None, :] - skeleton[None, :, :], axis=-1)
    order = np.argsort(d, axis=None, kind="stable")
    used_r, used_k, out = set(), set(), {}
    for flat in order:
        r, k = np.unravel_index(flat, d.shape)
        if r in used_r or k in used_k:
            continue
        used_r.add(r)
        used_k.add(k)
        out[int(k)] = int(r)
        if len(used_r) == len(regions):
            break
    return out


def _to_hand_xy(pixel, center, gamma):
    return np.array([(pixel[1] - center[1]) / gamma, -(pixel[0] - center[0]) / gamma])


def encode_frame(regions, baseline: Baseline, skeleton, timestamp: int = 0,
                 depth_scale: float = 0.0) -> tuple:
    """Turn matched prospect regions into a HandFrame.

    ``skeleton`` maps every keypoint to a reference pixel position (or is a
    (20, 2) array in canonical order). Matched keypoints take their region's
    centroid with confidence 1; an unmatched keypoint keeps its skeleton
    position and gets a distance-based confidence against the nearest region
    already assigned to its class, or 0 when its class has none.

    ``depth_scale`` converts region depth levels into pixels for the z
    component; the default of 0 keeps encoded vectors planar.

    Returns ``(frame, matched)`` where ``matched`` maps keypoint -> region.
    """
    if isinstance(skeleton, dict):
        skel = np.array([np.asarray(skeleton[k], dtype=float) for k in KEYPOINTS])
    else:
        skel = np.asarray(skeleton, dtype=float)
    gamma = baseline.length
    center = baseline.center
    assignment = match_regions(regions, skel)

    pos = np.zeros((len(KEYPOINTS), 3))
    conf = np.zeros(len(KEYPOINTS))
    for k in range(len(KEYPOINTS)):
        if k in assignment:
            reg = regions[assignment[k]]
            pos[k, :2] = _to_hand_xy(reg.centroid, center, gamma)
            pos[k, 2] = depth_scale * reg.depth / gamma
            conf[k] = keypoint_confidence(0.0, baseline)
        else:
            pos[k, :2] = _to_hand_xy(skel[k], center, gamma)

    by_class = {}
    for k, r in assignment.items():
        by_class.setdefault(KEYPOINTS[k].cls, []).append(regions[r])
    for k in range(len(KEYPOINTS)):
        if k in assignment:
            continue
        same = by_class.get(KEYPOINTS[k].cls)
        if same:
            cells = np.concatenate([r.cells for r in same])
            d = float(np.min(np.linalg.norm(cells - skel[k], axis=1)))
            conf[k] = keypoint_confidence(d, baseline)

    vec = pos[[KEYPOINT_INDEX[k] for k in VECTOR_KEYPOINTS]]
    frame = HandFrame(vec, angle_set(pos), conf, timestamp)
    matched = {KEYPOINTS[k]: r for k, r in assignment.items()}
    return frame, matched


def fit_skeleton(pose_xy, baseline: Baseline) -> np.ndarray:
    """Place a pose given in baseline units (x right, y up, origin at the palm
    center) into pixel coordinates around ``baseline.center``."""
    pose_xy = np.asarray(pose_xy, dtype=float)[:, :2]
    rows = baseline.center[0] - pose_xy[:, 1] * baseline.length
    cols = baseline.center[1] + pose_xy[:, 0] * baseline.length
    return np.stack([rows, cols], axis=1)


def _paint_disk(img, center, radius, value):
    h, w = img.shape
    r0, c0 = center
    rr, cc = np.ogrid[:h, :w]
    inside = (rr - r0) ** 2 + (cc - c0) ** 2 <= radius ** 2
    img[inside] = np.maximum(img[inside], value)


def _paint_capsule(img, a, b, radius, value):
    h, w = img.shape
    rr, cc = np.mgrid[:h, :w].astype(float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = max(float(ab @ ab), 1e-12)
    t = np.clip(((rr - a[0]) * ab[0] + (cc - a[1]) * ab[1]) / denom, 0, 1)
    d2 = (rr - a[0] - t * ab[0]) ** 2 + (cc - a[1] - t * ab[1]) ** 2
    inside = d2 <= radius ** 2
    img[inside] = np.maximum(img[inside], value)


def rasterize_hand(pose, palm_center, gamma_px: float, shape, visible=None,
                   body_depth: int = 100, prospect_depth: int = 200) -> np.ndarray:
    """Render a synthetic depth image of a hand pose.

    ``pose`` holds 20 keypoints (canonical order) in baseline units relative to
    the palm center with y up. Visible keypoints get a small raised blob that
    ``segment_prospects`` picks up as a prospect region.
    """
    pose = np.asarray(pose, dtype=float)
    palm_center = np.asarray(palm_center, dtype=float)
    pix = fit_skeleton(pose, Baseline(palm_center, gamma_px))
    img = np.zeros(shape, dtype=np.int64)
    visible = np.ones(len(KEYPOINTS), bool) if visible is None else np.asarray(visible, bool)
    g = gamma_px
    idx = KEYPOINT_INDEX
    _paint_capsule(img, pix[idx[F0]], palm_center, 0.35 * g, body_depth)
    _paint_disk(img, palm_center, 0.8 * g, body_depth)
    for c, n in (("A", 3), ("B", 4), ("C", 4), ("D", 4), ("E", 4)):
        chain = [idx[KeypointId(c, i)] for i in range(n - 1, -1, -1)]
        _paint_capsule(img, palm_center, pix[chain[0]], 0.14 * g, body_depth)
        for a, b in zip(chain, chain[1:]):
            _paint_capsule(img, pix[a], pix[b], 0.12 * g, body_depth)
    for k in range(len(KEYPOINTS)):
        if visible[k] and KEYPOINTS[k] != F0:
            _paint_disk(img, pix[k], 0.07 * g, prospect_depth)
    return img

"""Ring buffer of delta frames and the recursive sliding-window template matcher."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientFrames, RefusedTooOccluded
from .hand import KEYPOINTS, N_CHANNELS, N_VECTOR_CHANNELS, DeltaFrame, channel_confidence

STRATEGIES = ("coordinate", "angle")
MAX_OCCLUDED = 15


def strategy_slice(strategy: str) -> slice:
    if strategy == "coordinate":
        return slice(0, N_VECTOR_CHANNELS)
    if strategy == "angle":
        return slice(N_VECTOR_CHANNELS, N_CHANNELS)
    raise ValueError(f"unknown strategy {strategy!r}")


def window_length(cursor: int, m: int) -> int:
    """K for a cursor in [-M, 0]: 1.5M + cursor up to -0.5M, M afterwards."""
    if not -m <= cursor <= 0:
        raise ValueError(f"cursor {cursor} outside [-{m}, 0]")
    if cursor <= -0.5 * m:
        return int(round(1.5 * m + cursor))
    return m


class FrameBuffer:
    """Holds the newest ceil(1.5 M) frames, oldest first.

    Each entry keeps the 71 delta channels, their 71 confidences and an
    ``occluded`` flag recording whether the frame was unobserved when it was
    captured (infilling upstream does not clear the flag). Confidences may be
    pushed per keypoint (20 values) or per channel (71 values).
    """

    def __init__(self, m: int = 30):
        if m < 2:
            raise ValueError("M must be at least 2")
        self.m = m
        self.capacity = math.ceil(1.5 * m)
        self._values = deque(maxlen=self.capacity)
        self._conf = deque(maxlen=self.capacity)
        self._occluded = deque(maxlen=self.capacity)

    def __len__(self):
        return len(self._values)

    @property
    def fill(self) -> int:
        return len(self._values)

    @property
    def min_fill(self) -> int:
        return math.ceil(0.5 * self.m)

    def push(self, values, confidence=None, occluded: bool | None = None):
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (N_CHANNELS,):
            raise ValueError(f"frame must have {N_CHANNELS} channels")
        if confidence is None:
            conf = np.ones(N_CHANNELS)
        else:
            conf = np.asarray(confidence, dtype=float).ravel()
            if conf.shape == (len(KEYPOINTS),):
                conf = channel_confidence(conf)
            elif conf.shape != (N_CHANNELS,):
                raise ValueError("confidence must have 20 (keypoint) or 71 (channel) entries")
        if occluded is None:
            occluded = not conf.any()
        self._values.append(values)
        self._conf.append(conf)
        self._occluded.append(bool(occluded))

    def push_frame(self, frame: DeltaFrame, occluded: bool | None = None):
        self.push(frame.channels(), frame.confidence, occluded)

    def extend(self, values, confidence=None, occluded=None):
        for t in range(len(values)):
            self.push(values[t], None if confidence is None else confidence[t],
                      None if occluded is None else occluded[t])

    def values(self) -> np.ndarray:
        return np.array(self._values).reshape(-1, N_CHANNELS)

    def channel_confidence(self) -> np.ndarray:
        return np.array(self._conf).reshape(-1, N_CHANNELS)

    def occluded_count(self, newest: int | None = None) -> int:
        n = self.m if newest is None else newest
        flags = list(self._occluded)[-n:] if n else []
        return int(sum(flags))


def mean_error(candidate, reference, confidence):
    """E and ME of (K, N_dim) arrays: E = sum Conf * |Candi - Tmpl|, ME = E / (K * N_dim)."""
    cand = np.atleast_2d(np.asarray(candidate, dtype=float))
    ref = np.atleast_2d(np.asarray(reference, dtype=float))
    conf = np.broadcast_to(np.asarray(confidence, dtype=float), cand.shape)
    if cand.shape != ref.shape:
        raise ValueError("candidate and template windows differ in shape")
    e = float(np.sum(conf * np.abs(cand - ref)))
    return e, e / cand.size


def window_error(buffer: FrameBuffer, template, cursor: int, strategy: str):
    """Confidence-weighted absolute error of one window against a template tail.

    The window is the K frames ending ``-cursor`` frames before the newest one,
    compared with the template's last K frames. When the buffer is not yet
    full, frames that would precede the oldest stored one are dropped together
    with their template counterparts; at least ceil(0.5 M) must remain.

    Returns ``(E, ME, K)`` with ME = E / (K * N_dim) and K the frames used.
    """
    m = buffer.m
    k = window_length(cursor, m)
    if buffer.fill < buffer.min_fill:
        raise InsufficientFrames(f"buffer holds {buffer.fill} frames, need {buffer.min_fill}")
    tmpl = np.asarray(getattr(template, "numeric", template), dtype=float)
    if len(tmpl) < k:
        raise ValueError("template shorter than the window")
    end = buffer.fill + cursor  # exclusive
    start = end - k
    drop = max(0, -start)
    k_eff = k - drop
    if k_eff < buffer.min_fill:
        raise InsufficientFrames(f"window at cursor {cursor} has only {max(k_eff, 0)} frames")
    sl = strategy_slice(strategy)
    cand = buffer.values()[start + drop:end, sl]
    conf = buffer.channel_confidence()[start + drop:end, sl]
    ref = tmpl[len(tmpl) - k_eff:, sl]
    e, me = mean_error(cand, ref, conf)
    return e, me, k_eff


@dataclass
class CandidateMap:
    strategy: str
    entries: list = field(default_factory=list)  # (cursor, gesture, ME)

    def relative_errors(self) -> np.ndarray:
        me = np.array([e[2] for e in self.entries], dtype=float)
        total = me.sum()
        if total == 0:
            # every candidate matched exactly; RE is 0/0, so all count as perfect
            return np.zeros_like(me)
        return me / total


@dataclass
class MatchResult:
    gesture: str
    relative_error: float
    strategy: str
    table: list  # [{"gesture", "re_coord", "re_angle"}]
    cursor: int = 0

    def to_dict(self) -> dict:
        return {"gesture": self.gesture, "relative_error": self.relative_error,
                "strategy": self.strategy, "table": self.table}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _me_grid(buffer: FrameBuffer, templates, strategy: str) -> np.ndarray:
    """ME for every (cursor, template); NaN where the window is incomplete.

    Same arithmetic as ``window_error``, vectorized over templates.
    """
    m = buffer.m
    sl = strategy_slice(strategy)
    vals = buffer.values()[:, sl]
    conf = buffer.channel_confidence()[:, sl]
    stack = np.array([np.asarray(t.numeric, dtype=float)[-m:, sl] for t in templates])
    n_dim = vals.shape[1]
    grid = np.full((m + 1, len(templates)), np.nan)
    for i, cursor in enumerate(range(-m, 1)):
        k = window_length(cursor, m)
        end = buffer.fill + cursor
        k_eff = min(k, end)
        if k_eff < buffer.min_fill:
            continue
        diff = np.abs(vals[end - k_eff:end][None] - stack[:, m - k_eff:])
        grid[i] = (diff * conf[end - k_eff:end][None]).sum(axis=(1, 2)) / (k_eff * n_dim)
    return grid


def candidate_map(buffer, templates, strategy: str) -> CandidateMap:
    """Best template (lowest ME) at every cursor from -M to 0.

    ``buffer`` is one FrameBuffer shared by all templates, or a mapping from
    template label to the buffer that template is matched against.
    """
    templates = list(templates)
    if isinstance(buffer, FrameBuffer):
        grid = _me_grid(buffer, templates, strategy)
        m = buffer.m
    else:
        cols = [_me_grid(buffer[t.label], [t], strategy)[:, 0] for t in templates]
        grid = np.stack(cols, axis=1)
        m = len(grid) - 1
    cmap = CandidateMap(strategy)
    for i, cursor in enumerate(range(-m, 1)):
        row = grid[i]
        if np.isnan(row).any():
            continue
        best = int(np.argmin(row))
        cmap.entries.append((cursor, templates[best].label, float(row[best])))
    return cmap


def check_occlusion(buffer: FrameBuffer):
    n = buffer.occluded_count()
    if n > MAX_OCCLUDED:
        raise RefusedTooOccluded(n, MAX_OCCLUDED)


def recognize(buffer, templates, fusion: str = "min") -> MatchResult:
    """Run the matcher for both strategies and fuse their relative errors.

    ``buffer`` is a FrameBuffer or a label -> FrameBuffer mapping (one
    buffer per template, as produced by length normalization).

    ``fusion="min"`` picks the entry with the lowest RE across both maps (ties:
    coordinate first, then registry order). ``fusion="sum"`` picks the gesture
    whose best coordinate RE plus best angle RE is lowest; a gesture missing
    from a map counts as RE 1 there.
    """
    buffers = [buffer] if isinstance(buffer, FrameBuffer) else list(buffer.values())
    for b in buffers:
        if b.fill < b.min_fill:
            raise InsufficientFrames(f"buffer holds {b.fill} frames, need {b.min_fill}")
        check_occlusion(b)
    templates = list(templates)
    order = {t.label: i for i, t in enumerate(templates)}
    maps = {s: candidate_map(buffer, templates, s) for s in STRATEGIES}
    if not any(maps[s].entries for s in STRATEGIES):
        raise InsufficientFrames("no cursor position has a complete window")

    per_gesture = {t.label: {"re_coord": 1.0, "re_angle": 1.0} for t in templates}
    ranked = []
    for si, s in enumerate(STRATEGIES):
        key = "re_coord" if s == "coordinate" else "re_angle"
        for (cursor, g, _), re in zip(maps[s].entries, maps[s].relative_errors()):
            per_gesture[g][key] = min(per_gesture[g][key], float(re))
            ranked.append((float(re), si, order[g], cursor, g, s))
    table = [{"gesture": t.label, **per_gesture[t.label]} for t in templates]

    if fusion == "min":
        re, _, _, cursor, g, s = min(ranked)
        return MatchResult(g, re, s, table, cursor)
    if fusion == "sum":
        best = min(table, key=lambda row: (row["re_coord"] + row["re_angle"], order[row["gesture"]]))
        s = "coordinate" if best["re_coord"] <= best["re_angle"] else "angle"
        return MatchResult(best["gesture"], min(best["re_coord"], best["re_angle"]), s, table)
    raise ValueError(f"unknown fusion {fusion!r}")

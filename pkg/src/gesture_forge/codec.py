"""Letter encoding of deltas and greedy template-guided length normalization."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .hand import N_ANGLES, N_CHANNELS, N_VECTOR_CHANNELS, DeltaFrame, stack_deltas

LETTERS = "ABCDEFGHIJ"
STEP = {"vector": 0.2, "angle": 20.0}
CHANNEL_KINDS = ("vector",) * N_VECTOR_CHANNELS + ("angle",) * N_ANGLES


@dataclass(frozen=True)
class EncodedSymbol:
    letter: str
    kind: str

    def __str__(self):
        return self.letter


def letter_index(v: float, kind: str) -> int:
    if kind not in STEP:
        raise ValueError(f"unknown symbol kind {kind!r}")
    v = abs(float(v))
    # small epsilon keeps exact bin edges such as 0.2/0.2 on the upper side
    idx = math.floor(v / STEP[kind] + 1e-9)
    return min(idx, len(LETTERS) - 1)


def encode_value(v: float, kind: str) -> EncodedSymbol:
    """Bins of width 0.2 (vectors) or 20 degrees (angles), half-open, top bin J absorbs overflow.

    Vector components are binned by magnitude. Angles must be non-negative;
    signed angle deltas are binned by magnitude by ``encode_sequence``.
    """
    if kind == "angle" and v < 0:
        raise ValueError("angle values must be non-negative")
    return EncodedSymbol(LETTERS[letter_index(v, kind)], kind)


def encode_array(values: np.ndarray) -> np.ndarray:
    """Vectorised encoding of a (T, 71) array into letter indices (T, 71)."""
    values = np.abs(np.asarray(values, dtype=float))
    steps = np.array([STEP[k] for k in CHANNEL_KINDS])
    idx = np.floor(values / steps + 1e-9).astype(int)
    return np.minimum(idx, len(LETTERS) - 1)


@dataclass(frozen=True)
class SymbolSequence:
    frames: tuple  # each a 71-character string

    def __post_init__(self):
        for f in self.frames:
            if len(f) != N_CHANNELS:
                raise ValueError(f"frame has {len(f)} symbols, expected {N_CHANNELS}")

    def __len__(self):
        return len(self.frames)

    def to_text(self) -> str:
        return "".join(" ".join(f) + "\n" for f in self.frames)

    @classmethod
    def from_text(cls, text: str) -> "SymbolSequence":
        return cls(tuple("".join(line.split()) for line in text.splitlines() if line.strip()))

    @classmethod
    def from_indices(cls, idx: np.ndarray) -> "SymbolSequence":
        letters = np.array(list(LETTERS))
        return cls(tuple("".join(row) for row in letters[np.asarray(idx)]))


def encode_sequence(frames: Sequence[DeltaFrame]) -> SymbolSequence:
    if not len(frames):
        return SymbolSequence(())
    values, _ = stack_deltas(frames)
    return SymbolSequence.from_indices(encode_array(values))


def normalize_indices(actual: Sequence, template: Sequence) -> list:
    """Source positions chosen by the greedy normalizer.

    Returns one entry per template position: an index into ``actual`` or
    ``None`` where the template symbol itself is emitted (a miss before any hit).
    """
    if isinstance(actual, str) and isinstance(template, str):
        find = actual.find
    else:
        seq = list(actual)

        def find(sym, start):
            for j in range(start, len(seq)):
                if seq[j] == sym:
                    return j
            return -1
    n = len(actual)
    cursor = -1
    out = []
    for i, sym in enumerate(template):
        if i < n and actual[i] == sym:
            cursor = i
        else:
            hit = find(sym, max(cursor, 0))
            if hit >= 0:
                cursor = hit
            elif cursor < 0:
                out.append(None)
                continue
        out.append(cursor)
    return out


def normalize_sequence(actual: Sequence, template: Sequence) -> list:
    """Stretch or squeeze one symbol channel to the template's length."""
    if len(template) < 1 or len(actual) < 1:
        raise ValueError("normalize_sequence needs non-empty actual and template")
    return [template[i] if j is None else actual[j]
            for i, j in enumerate(normalize_indices(actual, template))]


def decode_sequence_to_channels(seq: SymbolSequence) -> list:
    """Split frame-major symbols into 71 per-channel lists."""
    return [[f[c] for f in seq.frames] for c in range(N_CHANNELS)]


def channels_to_sequence(channels: Sequence[Sequence[str]]) -> SymbolSequence:
    if len(channels) != N_CHANNELS:
        raise ValueError(f"expected {N_CHANNELS} channels")
    length = len(channels[0])
    return SymbolSequence(tuple("".join(ch[t] for ch in channels) for t in range(length)))


def normalize_symbol_sequence(actual: SymbolSequence, template: SymbolSequence) -> SymbolSequence:
    a = decode_sequence_to_channels(actual)
    t = decode_sequence_to_channels(template)
    return channels_to_sequence([normalize_sequence(x, y) for x, y in zip(a, t)])


def _channel_strings(idx) -> list:
    """Letter indices (T, C) -> one string of T letters per channel."""
    t = idx.shape[0]
    raw = (np.ascontiguousarray(idx.T) + ord(LETTERS[0])).astype(np.uint8).tobytes().decode("ascii")
    return [raw[c * t:(c + 1) * t] for c in range(idx.shape[1])]


def normalize_numeric(values, conf, template_values, template_symbols=None,
                      fallback_conf: float = 0.5):
    """Apply per-channel symbol normalization to numeric data.

    ``values``/``conf`` are (L, 71) arrays of the captured gesture; the symbol
    alignment of each channel against the template picks which captured frame
    feeds each of the template's M positions. A cold-start miss copies the
    template value and marks it with ``fallback_conf``.
    """
    values = np.asarray(values, dtype=float)
    conf = np.asarray(conf, dtype=float)
    template_values = np.asarray(template_values, dtype=float)
    m = len(template_values)
    act = encode_array(values)
    tmpl = encode_array(template_values) if template_symbols is None else template_symbols
    out_v = np.empty((m, values.shape[1]))
    out_c = np.empty((m, values.shape[1]))
    act_s = _channel_strings(act)
    tmpl_s = _channel_strings(np.asarray(tmpl))
    rows = np.empty((m, values.shape[1]), dtype=int)
    for c in range(values.shape[1]):
        rows[:, c] = [-1 if j is None else j for j in normalize_indices(act_s[c], tmpl_s[c])]
    cols = np.arange(values.shape[1])
    safe = np.maximum(rows, 0)
    cold = rows < 0
    out_v = np.where(cold, template_values, values[safe, cols])
    out_c = np.where(cold, fallback_conf, conf[safe, cols])
    return out_v, out_c


@dataclass(frozen=True)
class GestureTemplate:
    label: str
    numeric: np.ndarray  # (M, 71) delta channels
    symbolic: SymbolSequence | None = None

    def __post_init__(self):
        numeric = np.asarray(self.numeric, dtype=float)
        object.__setattr__(self, "numeric", numeric)
        if self.symbolic is None:
            object.__setattr__(self, "symbolic", SymbolSequence.from_indices(encode_array(numeric)))
        if len(self.symbolic) != len(numeric):
            raise ValueError("numeric and symbolic template lengths differ")

    @property
    def length(self) -> int:
        return len(self.numeric)

    @property
    def symbol_indices(self) -> np.ndarray:
        return np.array([[LETTERS.index(s) for s in f] for f in self.symbolic.frames])

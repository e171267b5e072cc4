"""Minimal PGM (P2 ASCII / P5 binary) reader and writer."""
from __future__ import annotations

import numpy as np


def _tokens(data: bytes, count: int, pos: int = 0):
    """Read ``count`` whitespace separated header tokens, skipping ``#`` comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise ValueError("truncated PGM header")
        if data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        out.append(data[start:pos])
    return out, pos


def parse_pgm(data: bytes) -> np.ndarray:
    (magic, w, h, maxval), pos = _tokens(data, 4)
    width, height, maxval = int(w), int(h), int(maxval)
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ValueError("invalid PGM dimensions or maxval")
    if magic == b"P2":
        vals, _ = _tokens(data, width * height, pos)
        img = np.array([int(v) for v in vals], dtype=np.int64)
    elif magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = width * height * dtype.itemsize
        raw = data[pos:pos + need]
        if len(raw) != need:
            raise ValueError("truncated PGM raster")
        img = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    else:
        raise ValueError(f"unsupported PGM magic {magic!r}")
    return img.reshape(height, width)


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def format_pgm(img, binary: bool = True, maxval: int | None = None) -> bytes:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("PGM images are 2-D")
    img = img.astype(np.int64)
    if img.min(initial=0) < 0:
        raise ValueError("PGM values must be non-negative")
    maxval = int(max(img.max(initial=0), 1)) if maxval is None else maxval
    h, w = img.shape
    if binary:
        header = f"P5\n{w} {h}\n{maxval}\n".encode()
        dtype = ">u2" if maxval > 255 else "u1"
        return header + img.astype(dtype).tobytes()
    lines = [f"P2\n{w} {h}\n{maxval}"]
    lines += [" ".join(str(v) for v in row) for row in img]
    return ("\n".join(lines) + "\n").encode()


def write_pgm(path, img, binary: bool = True, maxval: int | None = None):
    with open(path, "wb") as fh:
        fh.write(format_pgm(img, binary, maxval))

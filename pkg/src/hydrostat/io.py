"""File formats: PGM rasters, CSV tables, JSON documents and frame directories."""
from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from .errors import InputError
from .stiv import FrameSequence

FRAME_PATTERN = "frame_{:06d}.pgm"
MANIFEST = "manifest.json"


# ---------------------------------------------------------------------------
# PGM


def _pgm_tokens(data: bytes, count: int, start: int = 0):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    pos = start
    while len(tokens) < count:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*").match(data, pos)
        pos = m.end()
        m = re.compile(rb"\S+").match(data, pos)
        if m is None:
            raise InputError("truncated PGM header")
        tokens.append(m.group())
        pos = m.end()
    return tokens, pos


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) or ASCII (P2) greymap as a float array."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise InputError(f"{path}: not a PGM file")
    try:
        (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise InputError(f"{path}: bad PGM header") from exc
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise InputError(f"{path}: bad PGM dimensions")
    if magic == b"P5":
        pos += 1  # single whitespace byte before the raster
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        n = w * h * dtype.itemsize
        raw = data[pos:pos + n]
        if len(raw) != n:
            raise InputError(f"{path}: truncated PGM raster")
        img = np.frombuffer(raw, dtype=dtype).reshape(h, w)
    else:
        vals = data[pos:].split()
        if len(vals) < w * h:
            raise InputError(f"{path}: truncated PGM raster")
        img = np.array([int(v) for v in vals[: w * h]]).reshape(h, w)
    return img.astype(float)


def write_pgm(path, img, binary: bool = True) -> None:
    a = np.clip(np.rint(np.asarray(img, dtype=float)), 0, 255).astype(np.uint8)
    h, w = a.shape
    with open(path, "wb") as f:
        if binary:
            f.write(f"P5\n{w} {h}\n255\n".encode())
            f.write(a.tobytes())
        else:
            f.write(f"P2\n{w} {h}\n255\n".encode())
            for row in a:
                f.write((" ".join(map(str, row)) + "\n").encode())


# ---------------------------------------------------------------------------
# masks


def read_mask(path) -> np.ndarray:
    """PGM (values > 127 are water) or CSV of 0/1."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    if path.suffix.lower() == ".csv":
        try:
            m = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise InputError(f"{path}: malformed mask CSV") from exc
        if not np.all((m == 0) | (m == 1)):
            raise InputError(f"{path}: mask CSV must contain only 0 and 1")
        return m.astype(np.uint8)
    return (read_pgm(path) > 127).astype(np.uint8)


def write_mask(path, mask) -> None:
    path = Path(path)
    m = np.asarray(mask).astype(np.uint8)
    if path.suffix.lower() == ".csv":
        np.savetxt(path, m, fmt="%d", delimiter=",")
    else:
        write_pgm(path, m * 255)


# ---------------------------------------------------------------------------
# frames


def write_frames(directory, seq: FrameSequence) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(seq.frames):
        write_pgm(d / FRAME_PATTERN.format(t), frame)
    write_json(d / MANIFEST, {"fps": seq.fps, "resolution": seq.resolution, "count": len(seq.frames)})


def read_frames(directory) -> FrameSequence:
    d = Path(directory)
    manifest = d / MANIFEST
    if not manifest.exists():
        raise InputError(f"{d}: missing {MANIFEST}")
    meta = read_json(manifest)
    try:
        fps = float(meta["fps"])
        resolution = float(meta["resolution"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{manifest}: needs numeric fps and resolution") from exc
    files = sorted(d.glob("frame_*.pgm"))
    if len(files) < 2:
        raise InputError(f"{d}: need at least 2 frame_%06d.pgm files")
    frames = [read_pgm(f) for f in files]
    if len({f.shape for f in frames}) != 1:
        raise InputError(f"{d}: frames differ in size")
    try:
        return FrameSequence(np.stack(frames), fps, resolution)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


# ---------------------------------------------------------------------------
# tables


def read_table(path) -> tuple[list[str], np.ndarray]:
    """CSV with a header row and numeric body."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    with open(path, newline="") as f:
        rows = [r for r in csv.reader(f) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty CSV")
    header = [c.strip() for c in rows[0]]
    try:
        body = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric CSV body") from exc
    if body.size and body.shape[1] != len(header):
        raise InputError(f"{path}: ragged CSV")
    return header, body.reshape(-1, len(header))


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    return repr(float(x))


def read_flow_matrix(path) -> tuple[list[str], np.ndarray]:
    names, body = read_table(path)
    if len(names) < 2:
        raise InputError(f"{path}: a flow matrix needs at least 2 segment columns")
    if np.any(body < 0):
        raise InputError(f"{path}: velocities must be >= 0 (0 = missing)")
    return names, body


def write_flow_matrix(path, names, matrix) -> None:
    write_table(path, names, np.atleast_2d(matrix))


def read_pairs(path):
    """Stage-discharge CSV with columns h, q and optional t."""
    header, body = read_table(path)
    cols = {name.lower(): i for i, name in enumerate(header)}
    if "h" not in cols or "q" not in cols:
        raise InputError(f"{path}: needs h and q columns")
    return body[:, cols["h"]], body[:, cols["q"]]


# ---------------------------------------------------------------------------
# JSON


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, default=_default) + "\n")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=_default)


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc

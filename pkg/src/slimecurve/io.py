"""Binary PGM frames and CSV tables."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Write an 8-bit binary (P5) greymap. ``image`` is [y, x] uint8."""
    image = np.ascontiguousarray(image, dtype=np.uint8)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    # header: magic, width, height, maxval, with '#' comments allowed
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise ValueError(f"{path}: 16-bit PGM not supported")
    pos += 1
    return np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w).copy()


def field_frame(values: np.ndarray, occupancy: np.ndarray | None = None, vmax: float | None = None):
    """Scale a field to 0..254 by ``vmax`` (default: its max) and paint occupied cells 255.

    Returns the image and the scale used (field units per grey level).
    """
    vmax = float(values.max()) if vmax is None else float(vmax)
    scale = vmax / 254.0 if vmax > 0 else 1.0
    img = np.clip(np.floor(values / scale), 0, 254).astype(np.uint8)
    if occupancy is not None:
        img[occupancy] = 255
    return img, scale


def write_csv(path: str | Path | TextIO, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a header and rows; floats use their shortest round-trip repr. ``path`` may be an open stream."""
    if hasattr(path, "write"):
        _write_rows(path, header, rows)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, header, rows)


def _write_rows(fh, header, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_csv_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def read_numeric_csv(path: str | Path, ncols: int | None = None) -> np.ndarray:
    """Numeric rows; a non-numeric first row is treated as a header. Errors carry the row number."""
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                if lineno == 1:
                    continue
                raise ValueError(f"{path}: row {lineno}: non-numeric value") from None
            if ncols is not None and len(vals) != ncols:
                raise ValueError(f"{path}: row {lineno}: expected {ncols} columns, got {len(vals)}")
            out.append(vals)
    if not out:
        raise ValueError(f"{path}: no data rows")
    return np.array(out, dtype=float)

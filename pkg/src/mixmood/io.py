"""On-disk containers: FMAT feature matrices, IMGB image stacks, CSV.

Both binary formats are little-endian and bit-exact:

* FMAT: magic ``FMAT``, u32 version=1, u64 rows, u32 cols, then
  rows*cols float32 values row-major.
* IMGB: magic ``IMGB``, u32 version=1, u64 n, u16 h, u16 w, u8 c, then
  n*h*w*c raw bytes.

CSV matrices use a comma separator and ``.`` decimal point, with an
optional single header line.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .validation import check_feature_matrix, check_image_set

FMAT_MAGIC = b"FMAT"
IMGB_MAGIC = b"IMGB"
_FMAT_HEADER = struct.Struct("<4sIQI")
_IMGB_HEADER = struct.Struct("<4sIQHHB")


def save_fmat(matrix, path) -> None:
    """Write a feature matrix to ``path`` in the FMAT format."""
    arr = check_feature_matrix(matrix)
    rows, cols = arr.shape
    header = _FMAT_HEADER.pack(FMAT_MAGIC, 1, rows, cols)
    payload = arr.astype("<f4", copy=False).tobytes(order="C")
    Path(path).write_bytes(header + payload)


def load_fmat(path) -> np.ndarray:
    """Read an FMAT file back into a float32 matrix."""
    data = Path(path).read_bytes()
    if len(data) < _FMAT_HEADER.size:
        raise FormatError(f"{path}: file too short for an FMAT header")
    magic, version, rows, cols = _FMAT_HEADER.unpack_from(data)
    if magic != FMAT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {FMAT_MAGIC!r}")
    if version != 1:
        raise FormatError(f"{path}: unsupported FMAT version {version}")
    if rows < 1 or cols < 1:
        raise FormatError(f"{path}: header claims empty matrix {rows}x{cols}")
    expected = rows * cols * 4
    payload = data[_FMAT_HEADER.size :]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, "
            f"header claims {rows}x{cols} ({expected} bytes)"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{path}: payload contains NaN or Inf values")
    return np.ascontiguousarray(arr.astype(np.float32))


def save_imgb(images, path) -> None:
    """Write a uint8 image stack to ``path`` in the IMGB format."""
    arr = check_image_set(images)
    n, h, w, c = arr.shape
    header = _IMGB_HEADER.pack(IMGB_MAGIC, 1, n, h, w, c)
    Path(path).write_bytes(header + arr.tobytes(order="C"))


def load_imgb(path) -> np.ndarray:
    """Read an IMGB file back into an (n, h, w, c) uint8 stack."""
    data = Path(path).read_bytes()
    if len(data) < _IMGB_HEADER.size:
        raise FormatError(f"{path}: file too short for an IMGB header")
    magic, version, n, h, w, c = _IMGB_HEADER.unpack_from(data)
    if magic != IMGB_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {IMGB_MAGIC!r}")
    if version != 1:
        raise FormatError(f"{path}: unsupported IMGB version {version}")
    if c not in (1, 3):
        raise FormatError(f"{path}: channel count must be 1 or 3, got {c}")
    if n < 1 or h < 1 or w < 1:
        raise FormatError(f"{path}: header claims empty stack {n}x{h}x{w}x{c}")
    expected = n * h * w * c
    payload = data[_IMGB_HEADER.size :]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, header claims {expected}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(n, h, w, c).copy()


def load_csv_matrix(path, skip_header: bool = False) -> np.ndarray:
    """Read a rectangular numeric CSV into a float32 feature matrix."""
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, record in enumerate(reader, start=1):
            if skip_header and lineno == 1:
                continue
            if not record:
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise FormatError(
                    f"{path}: ragged row at line {lineno}: "
                    f"got {len(record)} cells, expected {width}"
                )
            parsed = []
            for col, cell in enumerate(record, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise FormatError(
                        f"{path}: non-numeric cell {cell!r} "
                        f"at line {lineno}, column {col}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return check_feature_matrix(np.array(rows, dtype=np.float64), name=str(path))


def load_png_dir(path) -> np.ndarray:
    """Load a directory of 8-bit gray or RGB PNGs as one image stack.

    Files are taken in sorted name order; every image must share the
    same size and channel count.
    """
    from PIL import Image

    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise FormatError(f"{path}: no .png files found")
    frames = []
    shape = None
    for f in files:
        with Image.open(f) as img:
            if img.mode not in ("L", "RGB"):
                raise FormatError(
                    f"{f}: unsupported PNG mode {img.mode!r} (need 8-bit L or RGB)"
                )
            arr = np.asarray(img, dtype=np.uint8)
        if arr.ndim == 2:
            arr = arr[..., np.newaxis]
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise FormatError(
                f"{f}: image shape {arr.shape} differs from first image {shape}"
            )
        frames.append(arr)
    return check_image_set(np.stack(frames))

"""Light-field file I/O.

Two interchange formats:

* view directory: one image per view named ``view_<row>_<col>.png``
  (8- or 16-bit, grayscale or RGB), rows/cols zero-based from the top left;
* array container: ``.npz`` with a ``data`` array and an ``axes`` vector of
  axis names (any permutation of ``angular_row, angular_col, y, x, channel``).

The container round-trips bit-exactly; image directories are quantized to
the file bit depth.
"""

from __future__ import annotations

import re
from pathlib import Path

import cv2
import numpy as np

from .errors import DataError
from .lightfield import AXIS_NAMES, LightField

_VIEW_RE = re.compile(r"^view_(\d+)_(\d+)\.(png|bmp|tif|tiff|jpg|jpeg)$", re.I)


def load_lightfield(path: str | Path, format_hint: str | None = None) -> LightField:
    """Load a light field from a view directory or an ``.npz`` container.

    ``format_hint`` may be ``"dir"`` or ``"npz"``; when omitted the format is
    inferred from the path.
    """
    p = Path(path)
    fmt = format_hint
    if fmt is None:
        if p.is_dir():
            fmt = "dir"
        elif p.suffix == ".npz":
            fmt = "npz"
        else:
            raise DataError(f"cannot infer light-field format of {p}")
    if fmt == "dir":
        if not p.is_dir():
            raise DataError(f"{p} is not a view directory")
        return _load_view_directory(p)
    if fmt == "npz":
        if not p.is_file():
            raise DataError(f"{p} is not a container file")
        return _load_container(p)
    raise DataError(f"unknown light-field format {fmt!r}")


def _scale_image(img: np.ndarray) -> np.ndarray:
    if img.dtype == np.uint8:
        return img.astype(np.float32) / 255.0
    if img.dtype == np.uint16:
        return img.astype(np.float32) / 65535.0
    if np.issubdtype(img.dtype, np.floating):
        return img.astype(np.float32)
    raise DataError(f"unsupported image dtype {img.dtype}")


def _load_view_directory(p: Path) -> LightField:
    files: dict[tuple[int, int], Path] = {}
    for f in p.iterdir():
        m = _VIEW_RE.match(f.name)
        if m:
            files[(int(m.group(1)), int(m.group(2)))] = f
    if not files:
        raise DataError(f"no view_<row>_<col> images in {p}")
    n = max(max(r, c) for r, c in files) + 1
    missing = [(r, c) for r in range(n) for c in range(n) if (r, c) not in files]
    if missing:
        raise DataError(f"missing view {missing[0]} in {p}")

    views = []
    shape = None
    for r in range(n):
        row = []
        for c in range(n):
            img = cv2.imread(str(files[(r, c)]), cv2.IMREAD_UNCHANGED)
            if img is None:
                raise DataError(f"unreadable view image {files[(r, c)]}")
            if img.ndim == 2:
                img = img[:, :, None]
            elif img.ndim == 3 and img.shape[2] == 3:
                img = img[:, :, ::-1]  # BGR -> RGB
            else:
                raise DataError(
                    f"view {files[(r, c)]} has unsupported channel count"
                )
            if shape is None:
                shape = img.shape
            elif img.shape != shape:
                raise DataError(
                    f"inconsistent view dimensions: {img.shape} vs {shape}"
                )
            row.append(_scale_image(img))
        views.append(row)
    return LightField.from_array(np.asarray(views), clamp=True)


def _load_container(p: Path) -> LightField:
    with np.load(p, allow_pickle=False) as npz:
        if "data" not in npz or "axes" not in npz:
            raise DataError(f"{p} is not a light-field container (data/axes)")
        data = npz["data"]
        axes = [str(a) for a in npz["axes"]]
    if sorted(axes) != sorted(AXIS_NAMES):
        raise DataError(f"container {p} has unknown axes {axes}")
    perm = [axes.index(name) for name in AXIS_NAMES]
    return LightField(np.transpose(data, perm))


def save_lightfield(
    lf: LightField,
    path: str | Path,
    format: str = "npz",
    bit_depth: int = 8,
) -> None:
    """Write a light field as an ``.npz`` container or a view directory.

    Directory output quantizes to ``bit_depth`` (8 or 16); 16-bit is written
    for single-channel fields only.
    """
    p = Path(path)
    if format == "npz":
        if p.suffix != ".npz":
            p = p.with_suffix(".npz")
        p.parent.mkdir(parents=True, exist_ok=True)
        np.savez(p, data=lf.data, axes=np.asarray(AXIS_NAMES))
        return
    if format != "dir":
        raise DataError(f"unknown light-field format {format!r}")
    if bit_depth not in (8, 16):
        raise DataError(f"bit depth must be 8 or 16, got {bit_depth}")
    if bit_depth == 16 and lf.channels != 1:
        raise DataError("16-bit view directories support single-channel fields only")
    p.mkdir(parents=True, exist_ok=True)
    peak = 255 if bit_depth == 8 else 65535
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    for r in range(lf.angular):
        for c in range(lf.angular):
            img = np.round(lf.view(r, c).astype(np.float64) * peak).astype(dtype)
            if img.shape[2] == 1:
                img = img[:, :, 0]
            else:
                img = img[:, :, ::-1]  # RGB -> BGR
            ok = cv2.imwrite(str(p / f"view_{r}_{c}.png"), img)
            if not ok:
                raise DataError(f"failed to write view ({r},{c}) under {p}")

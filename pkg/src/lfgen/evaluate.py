"""Reconstruction quality metrics and report emission."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .lightfield import GRAY_WEIGHTS, LightField
from .operators import AngularMask

# PSNR of bit-identical inputs is reported as this sentinel instead of inf.
PSNR_CAP_DB = 100.0

PSNR_MODES = ("per_channel_mean", "luminance")


def _as_array(x) -> np.ndarray:
    if isinstance(x, LightField):
        return x.data
    return np.asarray(x, dtype=np.float64)


def _luminance(arr: np.ndarray) -> np.ndarray:
    if arr.shape[-1] == 3:
        return arr @ np.asarray(GRAY_WEIGHTS)
    return arr[..., 0] if arr.ndim >= 1 and arr.shape[-1] == 1 else arr


def psnr(ref, est, mode: str = "per_channel_mean") -> float:
    """Peak signal-to-noise ratio in dB for [0, 1]-scaled data (peak 1).

    ``per_channel_mean`` averages per-channel PSNR values (a plain PSNR for
    single-channel data); ``luminance`` converts 3-channel data to gray
    first. Exact matches return the 100 dB sentinel.
    """
    if mode not in PSNR_MODES:
        raise ValueError(f"mode must be one of {PSNR_MODES}, got {mode!r}")
    a = _as_array(ref).astype(np.float64)
    b = _as_array(est).astype(np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if mode == "luminance":
        a, b = _luminance(a), _luminance(b)
        channels = [(a, b)]
    elif a.ndim >= 2 and a.shape[-1] in (1, 3) and a.ndim >= 3:
        channels = [(a[..., c], b[..., c]) for c in range(a.shape[-1])]
    else:
        channels = [(a, b)]
    vals = []
    for ca, cb in channels:
        mse = float(np.mean((ca - cb) ** 2))
        if mse <= 0.0:
            vals.append(PSNR_CAP_DB)
        else:
            vals.append(min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB))
    return float(np.mean(vals))


def novel_view_psnr(
    ref_lf: LightField,
    est_lf: LightField,
    known_mask: AngularMask,
    mode: str = "per_channel_mean",
) -> tuple[np.ndarray, float]:
    """Per-view PSNR grid plus the mean over novel (unknown) views only."""
    if ref_lf.data.shape != est_lf.data.shape:
        raise ValueError("reference and estimate shapes differ")
    n = ref_lf.angular
    if known_mask.n != n:
        raise ValueError(f"mask size {known_mask.n} does not match field {n}")
    novel = np.argwhere(known_mask.grid == 0.0)
    if len(novel) == 0:
        raise ValueError("all views are known; the novel-view set is empty")
    grid = np.zeros((n, n))
    for r in range(n):
        for c in range(n):
            grid[r, c] = psnr(ref_lf.view(r, c), est_lf.view(r, c), mode)
    mean = float(np.mean([grid[r, c] for r, c in novel]))
    return grid, mean


def error_map(ref_view: np.ndarray, est_view: np.ndarray, gain: float = 10.0) -> np.ndarray:
    """Pixelwise |ref - est| * gain, clamped to [0, 1]."""
    a = np.asarray(ref_view, dtype=np.float64)
    b = np.asarray(est_view, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return np.clip(np.abs(a - b) * gain, 0.0, 1.0)


def save_error_map(path: str | Path, emap: np.ndarray) -> None:
    """Write an error map as an 8-bit PNG."""
    import cv2

    img = np.round(np.clip(emap, 0.0, 1.0) * 255.0).astype(np.uint8)
    if img.ndim == 3 and img.shape[2] == 3:
        img = img[:, :, ::-1]
    elif img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if not cv2.imwrite(str(path), img):
        raise OSError(f"failed to write error map {path}")


@dataclass(frozen=True)
class EvalRecord:
    lf: str
    task: str
    mask: str
    stride: int
    loss: str
    mean_psnr_db: float
    runtime_s: float


_REPORT_FIELDS = ("lf", "task", "mask", "stride", "loss", "mean_psnr_db", "runtime_s")


def emit_report(results: Sequence[EvalRecord], path: str | Path) -> None:
    """Write results as CSV plus an aligned text table (``<path>.txt``),
    sorted lexicographically for reproducible bytes."""
    if not results:
        raise ValueError("emit_report needs at least one result")
    rows = sorted(results, key=lambda r: (r.lf, r.task, r.mask, r.stride, r.loss))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_REPORT_FIELDS)
        for r in rows:
            writer.writerow(
                [r.lf, r.task, r.mask, r.stride, r.loss,
                 f"{r.mean_psnr_db:.2f}", f"{r.runtime_s:.2f}"]
            )
    cells = [list(_REPORT_FIELDS)] + [
        [r.lf, r.task, r.mask, str(r.stride), r.loss,
         f"{r.mean_psnr_db:.2f}", f"{r.runtime_s:.2f}"]
        for r in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(len(_REPORT_FIELDS))]
    lines = [
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in cells
    ]
    lines.insert(1, "  ".join("-" * w for w in widths))
    path.with_suffix(path.suffix + ".txt").write_text("\n".join(lines) + "\n")

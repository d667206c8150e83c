"""Patch extraction and overlap-averaged stitching.

Grayscale light fields are tiled into 4D patches of fixed 25x25 spatial
extent on a regular stride grid; the last row/column of origins is clamped
so every patch is a real in-bounds crop. Stitching averages all patches
covering a pixel, so extract -> stitch is the identity for any stride.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lightfield import LightField

PATCH_SIZE = 25


def _origins_1d(extent: int, stride: int, size: int) -> list[int]:
    if extent < size:
        raise ValueError(f"field extent {extent} smaller than patch size {size}")
    count = math.ceil((extent - size) / stride) + 1
    return [min(i * stride, extent - size) for i in range(count)]


@dataclass(frozen=True)
class PatchGrid:
    """Tiling geometry: patch origins plus the field dimensions."""

    origins: tuple[tuple[int, int], ...]
    stride: int
    patch_size: int
    angular: int
    height: int
    width: int

    @cached_property
    def weight_map(self) -> np.ndarray:
        """Per-pixel patch coverage counts, shape (height, width)."""
        w = np.zeros((self.height, self.width), dtype=np.float32)
        s = self.patch_size
        for oy, ox in self.origins:
            w[oy : oy + s, ox : ox + s] += 1.0
        return w


def build_grid(
    angular: int, height: int, width: int, stride: int, patch_size: int = PATCH_SIZE
) -> PatchGrid:
    if not 1 <= stride <= patch_size:
        raise ValueError(f"stride must be in [1, {patch_size}], got {stride}")
    ys = _origins_1d(height, stride, patch_size)
    xs = _origins_1d(width, stride, patch_size)
    origins = tuple((y, x) for y in ys for x in xs)
    return PatchGrid(origins, stride, patch_size, angular, height, width)


def extract_patches(
    lf: LightField, stride: int, patch_size: int = PATCH_SIZE
) -> tuple[np.ndarray, PatchGrid]:
    """Tile a grayscale field into patches.

    Returns a stacked (num_patches, n, n, patch_size, patch_size) float32
    array and the grid used to produce it.
    """
    if lf.channels != 1:
        raise ValueError("extract_patches expects a grayscale light field")
    grid = build_grid(lf.angular, lf.height, lf.width, stride, patch_size)
    vol = lf.channel(0)
    s = patch_size
    patches = np.stack(
        [vol[:, :, oy : oy + s, ox : ox + s] for oy, ox in grid.origins]
    )
    return patches, grid


def stitch_patches(patches: np.ndarray, grid: PatchGrid) -> LightField:
    """Overlap-average patches back into a grayscale light field."""
    patches = np.asarray(patches)
    if len(patches) != len(grid.origins):
        raise ValueError(
            f"{len(patches)} patches for {len(grid.origins)} grid origins"
        )
    n, s = grid.angular, grid.patch_size
    if patches.shape[1:] != (n, n, s, s):
        raise ValueError(f"patch shape {patches.shape[1:]} does not match grid")
    acc = np.zeros((n, n, grid.height, grid.width), dtype=np.float64)
    for patch, (oy, ox) in zip(patches, grid.origins):
        acc[:, :, oy : oy + s, ox : ox + s] += patch
    acc /= grid.weight_map
    return LightField.from_array(acc[..., None], clamp=True)

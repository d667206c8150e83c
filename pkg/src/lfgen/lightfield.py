"""Light-field data model and per-view image operations.

A light field is stored as a five-axis float32 array with axes
``(angular_row, angular_col, y, x, channel)``, values in [0, 1]. The angular
grid is square (typically 5x5 or 7x7) and the central view sits at
``(n//2, n//2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# ITU-R BT.601 luma coefficients.
GRAY_WEIGHTS = (0.299, 0.587, 0.114)

AXIS_NAMES = ("angular_row", "angular_col", "y", "x", "channel")


@dataclass(frozen=True)
class LightField:
    """Immutable 4D light field (plus a channel axis).

    The backing array is copied, cast to float32, and made read-only at
    construction. Use :meth:`from_array` with ``clamp=True`` to accept data
    with small out-of-range excursions.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 5:
            raise ValueError(
                f"light field needs 5 axes {AXIS_NAMES}, got {arr.ndim}"
            )
        n_row, n_col, height, width, channels = arr.shape
        if n_row != n_col:
            raise ValueError(f"angular grid must be square, got {n_row}x{n_col}")
        if n_row < 1 or height < 1 or width < 1:
            raise ValueError(f"empty light field shape {arr.shape}")
        if channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {channels}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("light field contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                "light field values outside [0, 1]; pass clamp=True to "
                "LightField.from_array to clip"
            )
        arr = arr.astype(np.float32, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, data: np.ndarray, clamp: bool = False) -> "LightField":
        arr = np.asarray(data, dtype=np.float32)
        if clamp:
            arr = np.clip(arr, 0.0, 1.0)
        return cls(arr)

    @property
    def angular(self) -> int:
        """Angular resolution per axis (N_v)."""
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[2]

    @property
    def width(self) -> int:
        return self.data.shape[3]

    @property
    def channels(self) -> int:
        return self.data.shape[4]

    @property
    def center_index(self) -> tuple[int, int]:
        """Angular index of the central view."""
        return self.angular // 2, self.angular // 2

    def view(self, row: int, col: int) -> np.ndarray:
        """One sub-aperture image, shape (height, width, channels)."""
        return self.data[row, col]

    def central_view(self) -> np.ndarray:
        r, c = self.center_index
        return self.data[r, c]

    def channel(self, c: int) -> np.ndarray:
        """Single color channel as a 4-axis (row, col, y, x) array."""
        return self.data[..., c]


def to_grayscale(lf: LightField) -> LightField:
    """Convert to single-channel luminance (BT.601 weights). Idempotent."""
    if lf.channels == 1:
        return lf
    w = np.asarray(GRAY_WEIGHTS, dtype=np.float64)
    gray = lf.data.astype(np.float64) @ w
    gray = np.clip(gray, 0.0, 1.0)
    return LightField(gray[..., None].astype(np.float32))


def _linear_resample_axis(arr: np.ndarray, axis: int, n_out: int) -> np.ndarray:
    """Bilinear 1D resample along one axis (half-pixel centers, edge clamp)."""
    n_in = arr.shape[axis]
    if n_out == n_in:
        return arr
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1.0)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = (pos - lo).astype(np.float64)
    a = np.take(arr, lo, axis=axis)
    b = np.take(arr, hi, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = n_out
    frac = frac.reshape(shape)
    return a * (1.0 - frac) + b * frac


def spatial_downscale(lf: LightField, factor: float, min_size: int = 25) -> LightField:
    """Resample every view spatially by ``factor`` (>= 1) with separable
    bilinear interpolation. ``factor == 1`` is the identity."""
    if factor < 1.0:
        raise ValueError(f"downscale factor must be >= 1, got {factor}")
    if factor == 1.0:
        return lf
    new_h = int(np.floor(lf.height / factor + 0.5))
    new_w = int(np.floor(lf.width / factor + 0.5))
    if new_h < min_size or new_w < min_size:
        raise ValueError(
            f"downscaled size {new_h}x{new_w} below minimum {min_size}"
        )
    data = lf.data.astype(np.float64)
    data = _linear_resample_axis(data, axis=2, n_out=new_h)
    data = _linear_resample_axis(data, axis=3, n_out=new_w)
    return LightField.from_array(data, clamp=True)

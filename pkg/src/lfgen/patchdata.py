"""Binary patch store and random-crop dataset construction.

Store layout (little-endian): magic ``LFPATCH1``, then a fixed header
(angular resolution, patch size, patch count, build seed) followed by raw
float32 patch records of shape (n, n, patch_size, patch_size).
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .io import load_lightfield
from .lightfield import LightField, spatial_downscale, to_grayscale
from .patches import PATCH_SIZE

MAGIC = b"LFPATCH1"
_HEADER = struct.Struct("<8sIIQQ")  # magic, n_v, patch_size, count, seed


class PatchStore:
    """Read-only view of a patch store file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            with open(self.path, "rb") as fh:
                header = fh.read(_HEADER.size)
        except OSError as exc:
            raise DataError(f"cannot open patch store {path}: {exc}") from exc
        if len(header) < _HEADER.size:
            raise DataError(f"{path} is too short to be a patch store")
        magic, n_v, patch_size, count, seed = _HEADER.unpack(header)
        if magic != MAGIC:
            raise DataError(f"{path} is not a patch store (bad magic {magic!r})")
        self.n_v = n_v
        self.patch_size = patch_size
        self.count = count
        self.seed = seed
        record = n_v * n_v * patch_size * patch_size * 4
        expected = _HEADER.size + count * record
        actual = self.path.stat().st_size
        if actual != expected:
            raise DataError(
                f"{path} truncated: {actual} bytes, expected {expected}"
            )
        self._mmap: np.memmap | None = None

    def _records(self) -> np.memmap:
        if self._mmap is None:
            shape = (self.count, self.n_v, self.n_v, self.patch_size, self.patch_size)
            self._mmap = np.memmap(
                self.path, dtype="<f4", mode="r", offset=_HEADER.size, shape=shape
            )
        return self._mmap

    def __len__(self) -> int:
        return self.count

    def read(self, index: int) -> np.ndarray:
        return np.array(self._records()[index])

    def read_batch(self, indices: Sequence[int] | np.ndarray) -> np.ndarray:
        return np.array(self._records()[np.asarray(indices)])

    def read_all(self) -> np.ndarray:
        return np.array(self._records())


def write_patch_store(
    path: str | Path,
    patches,
    n_v: int,
    count: int,
    seed: int,
    patch_size: int = PATCH_SIZE,
) -> PatchStore:
    """Stream ``count`` patches from an iterable into a new store file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n_v, patch_size, count, seed))
        for patch in patches:
            arr = np.ascontiguousarray(patch, dtype="<f4")
            if arr.shape != (n_v, n_v, patch_size, patch_size):
                raise ValueError(f"bad patch shape {arr.shape}")
            fh.write(arr.tobytes())
            written += 1
            if written > count:
                raise ValueError("more patches than declared count")
    if written != count:
        raise ValueError(f"wrote {written} patches, declared {count}")
    return PatchStore(path)


def build_patch_dataset(
    sources: Sequence[str | Path],
    count: int,
    seed: int,
    out_path: str | Path,
    per_source_downscale: Mapping[str, float] | None = None,
) -> PatchStore:
    """Randomly crop ``count`` grayscale patches from the source light fields.

    Sources are picked uniformly at random and crops uniformly over valid
    spatial origins, all driven by ``seed``. ``per_source_downscale`` maps a
    source path (as given) to a spatial downscale factor applied before
    cropping, for sources whose disparity is too large at native scale.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not sources:
        raise ValueError("at least one source is required")
    scales = dict(per_source_downscale or {})
    volumes: list[np.ndarray] = []
    n_v: int | None = None
    for src in sources:
        lf = to_grayscale(load_lightfield(src))
        factor = float(scales.pop(str(src), 1.0))
        if factor != 1.0:
            lf = spatial_downscale(lf, factor)
        if lf.height < PATCH_SIZE or lf.width < PATCH_SIZE:
            raise DataError(
                f"source {src} is {lf.height}x{lf.width} after downscale, "
                f"smaller than patch size {PATCH_SIZE}"
            )
        if n_v is None:
            n_v = lf.angular
        elif lf.angular != n_v:
            raise DataError(
                f"source {src} has angular size {lf.angular}, expected {n_v}"
            )
        volumes.append(lf.channel(0))
    if scales:
        raise ValueError(f"downscale entries for unknown sources: {sorted(scales)}")

    rng = np.random.default_rng(seed)

    def crops():
        for _ in range(count):
            k = int(rng.integers(len(volumes)))
            vol = volumes[k]
            oy = int(rng.integers(vol.shape[2] - PATCH_SIZE + 1))
            ox = int(rng.integers(vol.shape[3] - PATCH_SIZE + 1))
            yield vol[:, :, oy : oy + PATCH_SIZE, ox : ox + PATCH_SIZE]

    return write_patch_store(out_path, crops(), n_v, count, seed)


def patch_to_lightfield(patch: np.ndarray) -> LightField:
    """Wrap a single (n, n, s, s) patch as a grayscale LightField."""
    return LightField.from_array(np.asarray(patch)[..., None], clamp=True)

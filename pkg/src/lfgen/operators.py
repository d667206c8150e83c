"""Linear measurement operators for light-field observations.

Three observation models over a single-channel 4-axis volume
``(angular_row, angular_col, y, x)``:

* view masking: known views pass through, unknown views are zeroed;
* spatial-angular sampling: known views are decimated by per-view integer
  strides, with the central view kept at full resolution;
* coded aperture: each of K aperture masks weights the angular views and
  sums them into one 2D image (pure summation, no 1/N^2 normalization).

All operators are linear, expose an adjoint satisfying the dot-product
identity, accept numpy arrays or torch tensors (preserving autograd), and
restrict exactly to spatial patches for patch-wise solvers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
import torch

from .errors import DataError


def _is_torch(x) -> bool:
    return torch.is_tensor(x)


def _cat(parts):
    if _is_torch(parts[0]):
        return torch.cat(parts)
    return np.concatenate(parts)


def _zeros(shape, ref):
    if _is_torch(ref):
        return torch.zeros(shape, dtype=ref.dtype, device=ref.device)
    return np.zeros(shape, dtype=ref.dtype)


# ---------------------------------------------------------------------------
# mask parameter types


@dataclass(frozen=True)
class AngularMask:
    """Binary N_v x N_v grid; 1 marks a known view."""

    grid: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.grid, dtype=np.float32)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"angular mask must be square, got {g.shape}")
        if not np.all((g == 0.0) | (g == 1.0)):
            raise ValueError("angular mask entries must be 0 or 1")
        if g.sum() < 1:
            raise ValueError("angular mask needs at least one known view")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)

    @property
    def n(self) -> int:
        return self.grid.shape[0]

    @property
    def known_views(self) -> list[tuple[int, int]]:
        return [tuple(rc) for rc in np.argwhere(self.grid == 1.0)]

    @classmethod
    def full(cls, n: int) -> "AngularMask":
        return cls(np.ones((n, n)))

    @classmethod
    def from_views(cls, n: int, views) -> "AngularMask":
        g = np.zeros((n, n))
        for r, c in views:
            g[r, c] = 1.0
        return cls(g)


@dataclass(frozen=True)
class DownsampleSpec:
    """Per-known-view integer decimation factors; the central view must be
    present with factor 1."""

    factors: Mapping[tuple[int, int], int]

    def __post_init__(self) -> None:
        factors = {
            (int(r), int(c)): int(s) for (r, c), s in dict(self.factors).items()
        }
        for rc, s in factors.items():
            if s < 1:
                raise ValueError(f"downsample factor for view {rc} must be >= 1")
        object.__setattr__(self, "factors", factors)

    def factor(self, r: int, c: int) -> int:
        return self.factors[(r, c)]

    @classmethod
    def uniform(cls, mask: AngularMask, factor: int) -> "DownsampleSpec":
        center = mask.n // 2
        return cls(
            {
                (r, c): 1 if (r, c) == (center, center) else factor
                for r, c in mask.known_views
            }
        )


@dataclass(frozen=True)
class CodedMaskSet:
    """K aperture transmittance masks, entries in [0, 1]."""

    masks: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.masks, dtype=np.float32)
        if m.ndim != 3 or m.shape[1] != m.shape[2]:
            raise ValueError(f"coded masks must be (K, n, n), got {m.shape}")
        if m.shape[0] < 1:
            raise ValueError("coded mask set needs K >= 1 masks")
        if m.min() < 0.0 or m.max() > 1.0:
            raise ValueError("coded mask entries must lie in [0, 1]")
        m.setflags(write=False)
        object.__setattr__(self, "masks", m)

    @property
    def k(self) -> int:
        return self.masks.shape[0]

    @property
    def n(self) -> int:
        return self.masks.shape[1]

    @classmethod
    def random(cls, k: int, n: int, seed: int = 0) -> "CodedMaskSet":
        rng = np.random.default_rng(seed)
        return cls(rng.random((k, n, n)))


# ---------------------------------------------------------------------------
# operators


class MeasurementOperator:
    """Linear map from a (n, n, H, W) volume to an observation array."""

    kind: str = "abstract"

    def __init__(self, in_shape: tuple[int, ...], out_shape: tuple[int, ...]):
        self.in_shape = tuple(in_shape)
        self.out_shape = tuple(out_shape)
        self._tensor_cache: dict = {}

    def _param(self, name: str, arr: np.ndarray, ref):
        """Mask/weight array on the backend of ``ref`` (cached for torch)."""
        if not _is_torch(ref):
            return arr
        key = (name, ref.dtype, ref.device)
        if key not in self._tensor_cache:
            self._tensor_cache[key] = torch.tensor(
                np.array(arr), dtype=ref.dtype, device=ref.device
            )
        return self._tensor_cache[key]

    def apply(self, x):
        raise NotImplementedError

    def adjoint(self, y):
        raise NotImplementedError

    def restrict(
        self, oy: int, ox: int, size: int
    ) -> tuple["MeasurementOperator", Callable]:
        """Operator acting on the spatial patch at (oy, ox) plus a function
        extracting that patch's observation from the full observation."""
        raise NotImplementedError

    def _check_in(self, x) -> None:
        if tuple(x.shape) != self.in_shape:
            raise ValueError(f"operator input {tuple(x.shape)} != {self.in_shape}")

    def _check_out(self, y) -> None:
        if tuple(y.shape) != self.out_shape:
            raise ValueError(f"operator adjoint input {tuple(y.shape)} != {self.out_shape}")


class ViewMaskOperator(MeasurementOperator):
    """Zero unknown views; observation keeps the full light-field shape."""

    kind = "view_mask"

    def __init__(self, mask: AngularMask, lf_shape: tuple[int, ...]):
        n, n2 = lf_shape[0], lf_shape[1]
        if n != mask.n or n2 != mask.n:
            raise ValueError(
                f"angular mask {mask.n} does not match field {lf_shape}"
            )
        super().__init__(tuple(lf_shape), tuple(lf_shape))
        self.mask = mask

    def apply(self, x):
        self._check_in(x)
        m = self._param("grid", self.mask.grid, x)
        return x * m[:, :, None, None]

    def adjoint(self, y):
        self._check_out(y)
        m = self._param("grid", self.mask.grid, y)
        return y * m[:, :, None, None]

    def restrict(self, oy, ox, size):
        n = self.mask.n
        op = ViewMaskOperator(self.mask, (n, n, size, size))

        def extract(obs):
            return obs[:, :, oy : oy + size, ox : ox + size]

        return op, extract


class SpatialAngularOperator(MeasurementOperator):
    """Keep known views, decimating each by its integer factor.

    The observation is a flat vector of per-view sample grids concatenated
    in sorted view order; ``view_segment`` recovers per-view layout.
    Decimation takes every s-th pixel on the global pixel grid, so patch
    restriction only shifts the sampling offsets.
    """

    kind = "spatial_angular"

    def __init__(
        self,
        mask: AngularMask,
        spec: DownsampleSpec,
        lf_shape: tuple[int, ...],
        offsets: Mapping[tuple[int, int], tuple[int, int]] | None = None,
        require_central: bool = True,
    ):
        n, _, height, width = lf_shape
        if n != mask.n:
            raise ValueError(f"angular mask {mask.n} does not match field {lf_shape}")
        center = (n // 2, n // 2)
        if require_central:
            if mask.grid[center] != 1.0:
                raise ValueError("central view not in mask")
            if spec.factor(*center) != 1:
                raise ValueError("central view downsample factor must be 1")
        offsets = dict(offsets or {})
        self.mask = mask
        self.spec = spec
        self._views: list[tuple[tuple[int, int], int, tuple[int, int], int, int]] = []
        total = 0
        for r, c in mask.known_views:
            s = spec.factor(r, c)
            off_y, off_x = offsets.get((r, c), (0, 0))
            ny = len(range(off_y, height, s))
            nx = len(range(off_x, width, s))
            if ny == 0 or nx == 0:
                raise ValueError(f"view ({r},{c}) has no samples at factor {s}")
            self._views.append(((r, c), s, (off_y, off_x), ny, nx))
            total += ny * nx
        super().__init__(tuple(lf_shape), (total,))

    def apply(self, x):
        self._check_in(x)
        parts = []
        for (r, c), s, (oy, ox), ny, nx in self._views:
            parts.append(x[r, c, oy::s, ox::s].reshape(-1))
        return _cat(parts)

    def adjoint(self, y):
        self._check_out(y)
        z = _zeros(self.in_shape, y)
        start = 0
        for (r, c), s, (oy, ox), ny, nx in self._views:
            z[r, c, oy::s, ox::s] = y[start : start + ny * nx].reshape(ny, nx)
            start += ny * nx
        return z

    def view_segment(self, r: int, c: int) -> tuple[slice, tuple[int, int]]:
        """Offset slice and (ny, nx) grid shape of one view inside the
        observation vector."""
        start = 0
        for (vr, vc), s, _, ny, nx in self._views:
            if (vr, vc) == (r, c):
                return slice(start, start + ny * nx), (ny, nx)
            start += ny * nx
        raise KeyError(f"view ({r},{c}) is not observed")

    def extract_view(self, obs, r: int, c: int):
        seg, (ny, nx) = self.view_segment(r, c)
        return obs[seg].reshape(ny, nx)

    def restrict(self, oy, ox, size):
        height, width = self.in_shape[2], self.in_shape[3]
        new_offsets = {}
        segments = []  # (obs slice, row slice, col slice, patch grid shape)
        start = 0
        for (r, c), s, (g_oy, g_ox), ny, nx in self._views:
            p_oy = (g_oy - oy) % s
            p_ox = (g_ox - ox) % s
            new_offsets[(r, c)] = (p_oy, p_ox)
            # global sample indices covered by the patch rows
            iy0 = (oy + p_oy - g_oy) // s
            ix0 = (ox + p_ox - g_ox) // s
            ny_p = len(range(p_oy, size, s))
            nx_p = len(range(p_ox, size, s))
            segments.append(
                (
                    slice(start, start + ny * nx),
                    (ny, nx),
                    slice(iy0, iy0 + ny_p),
                    slice(ix0, ix0 + nx_p),
                )
            )
            start += ny * nx
        op = SpatialAngularOperator(
            self.mask,
            self.spec,
            (self.in_shape[0], self.in_shape[1], size, size),
            offsets=new_offsets,
            require_central=False,
        )

        def extract(obs):
            parts = []
            for seg, (ny, nx), ys, xs in segments:
                grid = obs[seg].reshape(ny, nx)
                parts.append(grid[ys, xs].reshape(-1))
            return _cat(parts)

        return op, extract


class CodedApertureOperator(MeasurementOperator):
    """K coded images; image k is the angular sum of views weighted by
    mask k (transmittance-weighted accumulation, values may exceed 1)."""

    kind = "coded_aperture"

    def __init__(self, maskset: CodedMaskSet, lf_shape: tuple[int, ...]):
        n, _, height, width = lf_shape
        if n != maskset.n:
            raise ValueError(
                f"coded masks for {maskset.n} views do not match field {lf_shape}"
            )
        super().__init__(tuple(lf_shape), (maskset.k, height, width))
        self.maskset = maskset

    def _einsum(self, eq, *args):
        if any(_is_torch(a) for a in args):
            return torch.einsum(eq, *args)
        return np.einsum(eq, *args)

    def apply(self, x):
        self._check_in(x)
        m = self._param("masks", self.maskset.masks, x)
        return self._einsum("uvyx,kuv->kyx", x, m)

    def adjoint(self, y):
        self._check_out(y)
        m = self._param("masks", self.maskset.masks, y)
        return self._einsum("kyx,kuv->uvyx", y, m)

    def restrict(self, oy, ox, size):
        n = self.maskset.n
        op = CodedApertureOperator(self.maskset, (n, n, size, size))

        def extract(obs):
            return obs[:, oy : oy + size, ox : ox + size]

        return op, extract


class PixelMaskedOperator(MeasurementOperator):
    """Compose an operator with a pointwise observation mask (1 = observed)."""

    kind = "pixel_masked"

    def __init__(self, base: MeasurementOperator, pixel_mask: np.ndarray):
        pm = np.asarray(pixel_mask, dtype=np.float32)
        if tuple(pm.shape) != base.out_shape:
            raise ValueError(
                f"pixel mask {pm.shape} does not match operator output "
                f"{base.out_shape}"
            )
        super().__init__(base.in_shape, base.out_shape)
        self.base = base
        self.pixel_mask = pm

    def apply(self, x):
        y = self.base.apply(x)
        return y * self._param("pixel_mask", self.pixel_mask, y)

    def adjoint(self, y):
        return self.base.adjoint(y * self._param("pixel_mask", self.pixel_mask, y))

    def restrict(self, oy, ox, size):
        base_op, extract = self.base.restrict(oy, ox, size)
        mask_patch = np.asarray(extract(self.pixel_mask))
        return PixelMaskedOperator(base_op, mask_patch), extract


def view_mask_op(mask: AngularMask, lf_shape) -> ViewMaskOperator:
    return ViewMaskOperator(mask, lf_shape)


def spatial_angular_op(
    mask: AngularMask, spec: DownsampleSpec, lf_shape
) -> SpatialAngularOperator:
    return SpatialAngularOperator(mask, spec, lf_shape)


def coded_aperture_op(maskset: CodedMaskSet, lf_shape) -> CodedApertureOperator:
    return CodedApertureOperator(maskset, lf_shape)


def with_pixel_mask(
    op: MeasurementOperator, pixel_mask: np.ndarray
) -> PixelMaskedOperator:
    return PixelMaskedOperator(op, pixel_mask)


# ---------------------------------------------------------------------------
# mask file format (JSON)


@dataclass(frozen=True)
class MaskFile:
    angular: AngularMask | None = None
    downsample: DownsampleSpec | None = None
    coded: CodedMaskSet | None = None


def save_masks(
    path: str | Path,
    angular: AngularMask | None = None,
    downsample: DownsampleSpec | None = None,
    coded: CodedMaskSet | None = None,
) -> None:
    doc: dict = {}
    if angular is not None:
        doc["angular"] = angular.grid.astype(int).tolist()
    if downsample is not None:
        doc["factors"] = {f"{r},{c}": s for (r, c), s in downsample.factors.items()}
    if coded is not None:
        doc["coded"] = coded.masks.astype(float).tolist()
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def load_masks(path: str | Path) -> MaskFile:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read mask file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError(f"mask file {path} must hold a JSON object")
    angular = downsample = coded = None
    try:
        if "angular" in doc:
            angular = AngularMask(np.asarray(doc["angular"]))
        if "factors" in doc:
            factors = {}
            for key, s in doc["factors"].items():
                r, c = (int(t) for t in key.split(","))
                factors[(r, c)] = int(s)
            downsample = DownsampleSpec(factors)
        if "coded" in doc:
            coded = CodedMaskSet(np.asarray(doc["coded"]))
    except (ValueError, KeyError) as exc:
        raise DataError(f"invalid mask file {path}: {exc}") from exc
    return MaskFile(angular=angular, downsample=downsample, coded=coded)

"""Synthetic observation corruptions: additive Gaussian noise, salt-and-pepper
noise, and random pixel drop, each optionally sparing the central view."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .lightfield import LightField

KINDS = ("gaussian", "salt_pepper", "pixel_drop")
TARGETS = ("all", "non_central")


@dataclass(frozen=True)
class CorruptionSpec:
    """One corruption: ``amount`` is sigma (gaussian), the occurrence
    probability (salt_pepper), or the dropped fraction (pixel_drop)."""

    kind: str
    amount: float
    target_views: str = "all"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.target_views not in TARGETS:
            raise ValueError(
                f"target_views must be one of {TARGETS}, got {self.target_views!r}"
            )
        if self.amount < 0.0:
            raise ValueError("amount must be >= 0")
        if self.kind in ("salt_pepper", "pixel_drop") and self.amount > 1.0:
            raise ValueError(f"{self.kind} amount must be in [0, 1]")


def _target_view_mask(lf: LightField, spec: CorruptionSpec) -> np.ndarray:
    views = np.ones((lf.angular, lf.angular), dtype=bool)
    if spec.target_views == "non_central":
        r, c = lf.center_index
        views[r, c] = False
    return views


def corrupt(lf: LightField, spec: CorruptionSpec) -> tuple[LightField, np.ndarray]:
    """Apply ``spec`` to a light field.

    Returns the corrupted field and a float32 observation mask of the same
    shape (1 = observed pixel, 0 = dropped). Only ``pixel_drop`` produces
    zeros in the mask. Deterministic under ``spec.seed``; untargeted views
    are returned bit-identical.
    """
    rng = np.random.default_rng(spec.seed)
    data = lf.data.copy()
    mask = np.ones_like(data, dtype=np.float32)
    targeted = _target_view_mask(lf, spec)
    t = targeted[:, :, None, None, None]

    if spec.kind == "gaussian":
        if spec.amount > 0.0:
            noise = rng.normal(0.0, spec.amount, size=data.shape).astype(np.float32)
            data = np.where(t, np.clip(data + noise, 0.0, 1.0), data)
    elif spec.kind == "salt_pepper":
        u = rng.random(size=data.shape)
        data = np.where(t & (u < spec.amount / 2.0), 0.0, data)
        data = np.where(t & (u >= 1.0 - spec.amount / 2.0), 1.0, data)
    else:  # pixel_drop; one draw per pixel, shared across channels
        u = rng.random(size=data.shape[:4])[..., None]
        dropped = t & (u < spec.amount)
        data = np.where(dropped, 0.0, data)
        mask = np.where(dropped, 0.0, mask).astype(np.float32)

    return LightField(data.astype(np.float32)), mask


def save_pixel_mask(path: str | Path, mask: np.ndarray) -> None:
    """Write an observation mask (1 = observed) as JSON."""
    doc = {"mask": np.asarray(mask).astype(int).tolist()}
    Path(path).write_text(json.dumps(doc, separators=(",", ":")))


def load_pixel_mask(path: str | Path) -> np.ndarray:
    try:
        doc = json.loads(Path(path).read_text())
        return np.asarray(doc["mask"], dtype=np.float32)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read pixel mask {path}: {exc}") from exc

"""Procedural small-baseline light fields for demos and desk-scale tests.

Scenes are a smooth textured background plus a few Gaussian blobs on a
foreground layer; each layer moves with its own per-view disparity, so the
fields exhibit genuine parallax and occlusion without any external data.
"""

from __future__ import annotations

import numpy as np

from .lightfield import LightField


def _background(ys: np.ndarray, xs: np.ndarray, rng_params: dict) -> np.ndarray:
    val = np.full_like(ys, 0.5, dtype=np.float64)
    for a, fy, fx, phase in rng_params["waves"]:
        val += a * np.sin(2.0 * np.pi * (fy * ys + fx * xs) + phase)
    return val


def synthetic_lightfield(
    angular: int = 5,
    height: int = 64,
    width: int = 64,
    channels: int = 1,
    disparity: float = 1.0,
    seed: int = 0,
    n_blobs: int = 4,
) -> LightField:
    """Render a synthetic light field with background disparity ~0 and
    foreground blob disparity ``disparity`` pixels per angular step."""
    rng = np.random.default_rng(seed)
    waves = [
        (
            float(rng.uniform(0.05, 0.16)),
            float(rng.uniform(-0.08, 0.08)),
            float(rng.uniform(-0.08, 0.08)),
            float(rng.uniform(0.0, 2.0 * np.pi)),
        )
        for _ in range(4)
    ]
    params = {"waves": waves}
    blobs = [
        (
            float(rng.uniform(0.15, 0.85) * height),
            float(rng.uniform(0.15, 0.85) * width),
            float(rng.uniform(0.05, 0.12) * min(height, width)),
            rng.uniform(0.1, 0.9, size=channels),
        )
        for _ in range(n_blobs)
    ]
    center = angular // 2
    yy, xx = np.meshgrid(
        np.arange(height, dtype=np.float64),
        np.arange(width, dtype=np.float64),
        indexing="ij",
    )
    data = np.zeros((angular, angular, height, width, channels), dtype=np.float64)
    for u in range(angular):
        for v in range(angular):
            du, dv = u - center, v - center
            # background at ~1/4 of the blob disparity
            bys = yy + du * disparity * 0.25
            bxs = xx + dv * disparity * 0.25
            bg = _background(bys, bxs, params)
            for ch in range(channels):
                tint = 1.0 if channels == 1 else 0.85 + 0.15 * np.sin(ch + bxs * 0.03)
                img = bg * tint
                for cy, cx, sigma, color in blobs:
                    fys = yy + du * disparity - cy
                    fxs = xx + dv * disparity - cx
                    g = np.exp(-(fys**2 + fxs**2) / (2.0 * sigma**2))
                    alpha = np.clip(g * 1.6, 0.0, 1.0)
                    img = alpha * color[ch] + (1.0 - alpha) * img
                data[u, v, :, :, ch] = img
    data = np.clip(data, 0.02, 0.98)
    return LightField.from_array(data, clamp=True)

#!/usr/bin/env python3
"""Generate synthetic small-baseline light fields for the desk-scale demos.

Writes training fields, held-out test fields, and ready-to-use mask files
(view-synthesis masks, a spatial-angular factor map, and a random coded
aperture pair) under the output directory.
"""

import argparse
from pathlib import Path

import numpy as np

from lfgen.io import save_lightfield
from lfgen.operators import AngularMask, CodedMaskSet, DownsampleSpec, save_masks
from lfgen.synthetic import synthetic_lightfield


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=str, default="demo_data")
    ap.add_argument("--angular", type=int, default=5)
    ap.add_argument("--size", type=int, default=64, help="spatial resolution")
    ap.add_argument("--train-fields", type=int, default=2)
    ap.add_argument("--test-fields", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = args.angular
    for i in range(args.train_fields):
        lf = synthetic_lightfield(
            n, args.size, args.size, seed=args.seed + i, disparity=0.8
        )
        save_lightfield(lf, out / f"train_{i}.npz")
    for i in range(args.test_fields):
        lf = synthetic_lightfield(
            n, args.size, args.size, seed=args.seed + 1000 + i, disparity=0.8
        )
        save_lightfield(lf, out / f"test_{i}.npz")

    center = n // 2
    corners = [(0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)]
    cross = AngularMask.from_views(n, [(center, center), *corners])
    save_masks(out / "mask_cross.json", angular=cross)
    edges = [(0, center), (center, 0), (center, n - 1), (n - 1, center)]
    save_masks(
        out / "mask_plus.json",
        angular=AngularMask.from_views(n, [(center, center), *edges]),
    )
    save_masks(
        out / "mask_spatial_angular.json",
        angular=cross,
        downsample=DownsampleSpec.uniform(cross, 3),
    )
    save_masks(out / "mask_coded.json", coded=CodedMaskSet.random(2, n, seed=args.seed))
    print(f"demo data in {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfgen.lightfield import LightField
from lfgen.patches import PatchGrid, build_grid, extract_patches, stitch_patches

from conftest import random_lightfield


def _clamped_origins_oracle(extent, stride, size=25):
    """Brute-force origin enumeration with boundary clamping."""
    origins = []
    pos = 0
    while True:
        origins.append(min(pos, extent - size))
        if pos >= extent - size:
            break
        pos += stride
    return sorted(set(origins))


class TestExtraction:
    def test_exact_fit_single_patch(self, rng):
        lf = random_lightfield(rng, height=25, width=25)
        patches, grid = extract_patches(lf, 25)
        assert len(patches) == 1 and grid.origins == ((0, 0),)
        np.testing.assert_array_equal(patches[0], lf.channel(0))

    def test_50x50_stride_25_tiles_without_overlap(self, rng):
        lf = random_lightfield(rng, height=50, width=50)
        patches, grid = extract_patches(lf, 25)
        assert len(patches) == 4
        assert np.all(grid.weight_map == 1.0)

    def test_60x60_stride_5_origin_grid(self, rng):
        lf = random_lightfield(rng, height=60, width=60)
        patches, grid = extract_patches(lf, 5)
        assert len(patches) == 64
        ys = sorted({oy for oy, _ in grid.origins})
        assert ys == _clamped_origins_oracle(60, 5)
        assert grid.origins[-1] == (35, 35)

    def test_too_small_field_rejected(self, rng):
        lf = random_lightfield(rng, height=20, width=30)
        with pytest.raises(ValueError):
            extract_patches(lf, 5)

    def test_rgb_field_rejected(self, rgb_field):
        with pytest.raises(ValueError):
            extract_patches(rgb_field, 25)

    def test_bad_stride_rejected(self, rng):
        lf = random_lightfield(rng, height=30, width=30)
        for stride in (0, 26):
            with pytest.raises(ValueError):
                extract_patches(lf, stride)


class TestStitching:
    @pytest.mark.parametrize("stride", [1, 5, 12, 25])
    def test_round_trip_identity(self, rng, stride):
        lf = random_lightfield(rng, height=40, width=40)
        patches, grid = extract_patches(lf, stride)
        back = stitch_patches(patches, grid)
        assert np.abs(back.data - lf.data).max() <= 1e-6

    def test_two_fully_overlapping_patches_average(self):
        grid = PatchGrid(
            origins=((0, 0), (0, 0)),
            stride=25,
            patch_size=25,
            angular=3,
            height=25,
            width=25,
        )
        patches = np.stack(
            [np.zeros((3, 3, 25, 25)), np.ones((3, 3, 25, 25))]
        )
        out = stitch_patches(patches, grid)
        np.testing.assert_allclose(out.data, 0.5)

    def test_patch_count_mismatch_rejected(self, rng):
        lf = random_lightfield(rng, height=30, width=30)
        patches, grid = extract_patches(lf, 5)
        with pytest.raises(ValueError):
            stitch_patches(patches[:-1], grid)


@settings(max_examples=25, deadline=None)
@given(
    height=st.integers(25, 45),
    width=st.integers(25, 45),
    stride=st.integers(1, 25),
)
def test_extract_stitch_identity_property(height, width, stride):
    rng = np.random.default_rng(height * 1000 + width * 10 + stride)
    lf = LightField.from_array(rng.random((3, 3, height, width, 1)))
    patches, grid = extract_patches(lf, stride)
    assert np.all(grid.weight_map > 0)
    back = stitch_patches(patches, grid)
    assert np.abs(back.data - lf.data).max() <= 1e-6


@settings(max_examples=25, deadline=None)
@given(
    height=st.integers(25, 60),
    width=st.integers(25, 60),
    stride=st.integers(1, 25),
)
def test_grid_counts_match_formula(height, width, stride):
    grid = build_grid(3, height, width, stride)
    expected = int(np.ceil((height - 25) / stride) + 1) * int(
        np.ceil((width - 25) / stride) + 1
    )
    assert len(grid.origins) == expected

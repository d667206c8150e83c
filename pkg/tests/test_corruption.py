import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfgen.corruption import (
    CorruptionSpec,
    corrupt,
    load_pixel_mask,
    save_pixel_mask,
)

from conftest import random_lightfield


class TestSpecValidation:
    def test_bad_kind(self):
        with pytest.raises(ValueError):
            CorruptionSpec("speckle", 0.1)

    def test_bad_probability(self):
        with pytest.raises(ValueError):
            CorruptionSpec("salt_pepper", 1.5)

    def test_negative_amount(self):
        with pytest.raises(ValueError):
            CorruptionSpec("gaussian", -0.1)


def test_zero_sigma_is_identity(rng):
    lf = random_lightfield(rng)
    out, mask = corrupt(lf, CorruptionSpec("gaussian", 0.0, seed=3))
    np.testing.assert_array_equal(out.data, lf.data)
    assert np.all(mask == 1.0)


@settings(max_examples=10, deadline=None)
@given(kind=st.sampled_from(["gaussian", "salt_pepper", "pixel_drop"]))
def test_zero_amount_is_identity_for_all_kinds(kind):
    rng = np.random.default_rng(1)
    lf = random_lightfield(rng, height=26, width=26)
    out, mask = corrupt(lf, CorruptionSpec(kind, 0.0, seed=1))
    np.testing.assert_array_equal(out.data, lf.data)
    assert np.all(mask == 1.0)


def test_pixel_drop_non_central(rng):
    lf = random_lightfield(rng, angular=5, height=20, width=20)
    out, mask = corrupt(
        lf, CorruptionSpec("pixel_drop", 0.5, target_views="non_central", seed=9)
    )
    # the central view stays bit-identical and fully observed
    np.testing.assert_array_equal(out.view(2, 2), lf.view(2, 2))
    assert np.all(mask[2, 2] == 1.0)
    dropped = int(np.sum(mask == 0.0))
    n_targeted = 24 * 400
    sigma = np.sqrt(n_targeted * 0.25)
    assert abs(dropped - 0.5 * n_targeted) <= 3 * sigma
    # dropped pixels read zero
    assert np.all(out.data[mask == 0.0] == 0.0)


def test_salt_pepper_hits_zero_and_one(rng):
    lf = random_lightfield(rng, height=30, width=30)
    clipped = np.clip(lf.data, 0.25, 0.75)
    from lfgen.lightfield import LightField

    src = LightField(clipped)
    out, mask = corrupt(src, CorruptionSpec("salt_pepper", 0.2, seed=2))
    changed = out.data != src.data
    assert np.all(np.isin(out.data[changed], (0.0, 1.0)))
    assert np.all(mask == 1.0)
    frac = changed.mean()
    assert 0.15 < frac < 0.25


@settings(max_examples=10, deadline=None)
@given(
    kind=st.sampled_from(["gaussian", "salt_pepper", "pixel_drop"]),
    seed=st.integers(0, 2**31 - 1),
)
def test_deterministic_under_seed(kind, seed):
    rng = np.random.default_rng(0)
    lf = random_lightfield(rng, height=25, width=25)
    spec = CorruptionSpec(kind, 0.3 if kind != "gaussian" else 0.1, seed=seed)
    out1, mask1 = corrupt(lf, spec)
    out2, mask2 = corrupt(lf, spec)
    np.testing.assert_array_equal(out1.data, out2.data)
    np.testing.assert_array_equal(mask1, mask2)


def test_gaussian_clamps_to_unit_interval(rng):
    lf = random_lightfield(rng, height=25, width=25)
    out, _ = corrupt(lf, CorruptionSpec("gaussian", 0.5, seed=0))
    assert out.data.min() >= 0.0 and out.data.max() <= 1.0


def test_pixel_mask_json_round_trip(tmp_path, rng):
    lf = random_lightfield(rng, height=20, width=20)
    _, mask = corrupt(lf, CorruptionSpec("pixel_drop", 0.4, seed=1))
    save_pixel_mask(tmp_path / "m.json", mask)
    back = load_pixel_mask(tmp_path / "m.json")
    np.testing.assert_array_equal(back, mask)

import numpy as np
import pytest

from lfgen.errors import DataError
from lfgen.io import save_lightfield
from lfgen.patchdata import MAGIC, PatchStore, build_patch_dataset, write_patch_store
from lfgen.synthetic import synthetic_lightfield

from conftest import random_lightfield


@pytest.fixture()
def two_sources(tmp_path):
    paths = []
    for i in range(2):
        lf = synthetic_lightfield(angular=5, height=40, width=40, seed=20 + i)
        p = tmp_path / f"src{i}.npz"
        save_lightfield(lf, p)
        paths.append(str(p))
    return paths


def test_header_round_trip(tmp_path, rng):
    patches = rng.random((7, 5, 5, 25, 25)).astype(np.float32)
    store = write_patch_store(tmp_path / "s.lfp", patches, 5, 7, seed=42)
    assert (store.n_v, store.patch_size, store.count, store.seed) == (5, 25, 7, 42)
    np.testing.assert_array_equal(store.read(3), patches[3])
    np.testing.assert_array_equal(store.read_all(), patches)
    assert open(store.path, "rb").read(8) == MAGIC


def test_determinism_byte_identical(tmp_path, two_sources):
    a = build_patch_dataset(two_sources, 10, seed=7, out_path=tmp_path / "a.lfp")
    b = build_patch_dataset(two_sources, 10, seed=7, out_path=tmp_path / "b.lfp")
    assert a.path.read_bytes() == b.path.read_bytes()


def test_single_minimal_source_yields_identical_patches(tmp_path, rng):
    lf = random_lightfield(rng, angular=5, height=25, width=25)
    src = tmp_path / "only.npz"
    save_lightfield(lf, src)
    store = build_patch_dataset([str(src)], 10, seed=0, out_path=tmp_path / "s.lfp")
    expected = lf.channel(0)
    for i in range(10):
        np.testing.assert_array_equal(store.read(i), expected)


def test_source_selection_is_uniform(tmp_path):
    # distinguishable constant sources; count per source within 3 sigma of
    # binomial(n, 1/2)
    from lfgen.lightfield import LightField

    paths = []
    for i, value in enumerate((0.25, 0.75)):
        lf = LightField(np.full((3, 3, 25, 25, 1), value))
        p = tmp_path / f"c{i}.npz"
        save_lightfield(lf, p)
        paths.append(str(p))
    n = 10000
    store = build_patch_dataset(paths, n, seed=5, out_path=tmp_path / "s.lfp")
    values = store.read_all()[:, 0, 0, 0, 0]
    count_a = int(np.sum(values < 0.5))
    sigma = np.sqrt(n * 0.25)
    assert abs(count_a - n / 2) <= 3 * sigma


def test_per_source_downscale_applies_to_named_source_only(tmp_path):
    lf_small = synthetic_lightfield(angular=3, height=36, width=36, seed=1)
    lf_big = synthetic_lightfield(angular=3, height=36, width=36, seed=2)
    p1, p2 = tmp_path / "a.npz", tmp_path / "b.npz"
    save_lightfield(lf_small, p1)
    save_lightfield(lf_big, p2)
    # 36 / 1.4 -> 26 >= patch size, so this must succeed; an unknown key must not
    build_patch_dataset(
        [str(p1), str(p2)],
        4,
        seed=0,
        out_path=tmp_path / "ok.lfp",
        per_source_downscale={str(p2): 1.4},
    )
    with pytest.raises(ValueError, match="unknown sources"):
        build_patch_dataset(
            [str(p1)],
            4,
            seed=0,
            out_path=tmp_path / "bad.lfp",
            per_source_downscale={"nope": 1.4},
        )


def test_source_too_small_after_downscale(tmp_path, rng):
    lf = random_lightfield(rng, angular=3, height=30, width=30)
    src = tmp_path / "small.npz"
    save_lightfield(lf, src)
    with pytest.raises((DataError, ValueError)):
        build_patch_dataset(
            [str(src)],
            4,
            seed=0,
            out_path=tmp_path / "s.lfp",
            per_source_downscale={str(src): 1.4},
        )


def test_open_rejects_truncated_and_foreign_files(tmp_path, rng):
    patches = rng.random((3, 3, 3, 25, 25)).astype(np.float32)
    store = write_patch_store(tmp_path / "s.lfp", patches, 3, 3, seed=0)
    blob = store.path.read_bytes()
    (tmp_path / "trunc.lfp").write_bytes(blob[:-10])
    with pytest.raises(DataError, match="truncated"):
        PatchStore(tmp_path / "trunc.lfp")
    (tmp_path / "foreign.lfp").write_bytes(b"NOTMAGIC" + blob[8:])
    with pytest.raises(DataError, match="magic"):
        PatchStore(tmp_path / "foreign.lfp")


def test_mixed_angular_sources_rejected(tmp_path):
    lf3 = synthetic_lightfield(angular=3, height=30, width=30, seed=0)
    lf5 = synthetic_lightfield(angular=5, height=30, width=30, seed=0)
    p3, p5 = tmp_path / "a3.npz", tmp_path / "a5.npz"
    save_lightfield(lf3, p3)
    save_lightfield(lf5, p5)
    with pytest.raises(DataError, match="angular"):
        build_patch_dataset([str(p3), str(p5)], 4, seed=0, out_path=tmp_path / "s.lfp")

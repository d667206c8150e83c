import numpy as np
import pytest

from lfgen.cli import main
from lfgen.io import load_lightfield, save_lightfield
from lfgen.operators import AngularMask, CodedMaskSet, DownsampleSpec, save_masks
from lfgen.synthetic import synthetic_lightfield
from lfgen.training import TrainConfig, lr_at


@pytest.fixture(scope="module")
def env(tmp_path_factory):
    """Tiny end-to-end workspace: fields, patch store, weights, masks."""
    root = tmp_path_factory.mktemp("cli")
    gt = synthetic_lightfield(angular=5, height=40, width=40, seed=31)
    save_lightfield(gt, root / "gt.npz")
    save_lightfield(
        synthetic_lightfield(angular=5, height=40, width=40, seed=32),
        root / "train_src.npz",
    )
    assert (
        main(
            [
                "prepare",
                "--sources",
                str(root / "train_src.npz"),
                "--count",
                "24",
                "--seed",
                "1",
                "--out",
                str(root / "train.lfp"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "train",
                "--patches",
                str(root / "train.lfp"),
                "--out",
                str(root / "weights.pt"),
                "--epochs",
                "2",
                "--batch-size",
                "8",
                "--seed",
                "0",
            ]
        )
        == 0
    )
    mask = AngularMask.from_views(5, [(2, 2), (0, 0), (4, 4), (0, 4), (4, 0)])
    save_masks(root / "views.json", angular=mask)
    save_masks(
        root / "sa.json", angular=mask, downsample=DownsampleSpec.uniform(mask, 3)
    )
    save_masks(root / "coded.json", coded=CodedMaskSet.random(2, 5, seed=2))
    return root


class TestPrepare:
    def test_deterministic_stores(self, env, tmp_path):
        argv = [
            "prepare",
            "--sources",
            str(env / "train_src.npz"),
            "--count",
            "10",
            "--seed",
            "7",
        ]
        assert main(argv + ["--out", str(tmp_path / "a.lfp")]) == 0
        assert main(argv + ["--out", str(tmp_path / "b.lfp")]) == 0
        assert (tmp_path / "a.lfp").read_bytes() == (tmp_path / "b.lfp").read_bytes()

    def test_missing_source_exits_3(self, env, tmp_path, capsys):
        code = main(
            [
                "prepare",
                "--sources",
                str(env / "nope.npz"),
                "--count",
                "4",
                "--out",
                str(tmp_path / "x.lfp"),
            ]
        )
        assert code == 3
        assert "error" in capsys.readouterr().err

    def test_downscale_applies_to_named_source_only(self, env, tmp_path):
        # downscaling the only source by 1.4 shrinks 40 -> 29, still croppable
        code = main(
            [
                "prepare",
                "--sources",
                str(env / "train_src.npz"),
                "--count",
                "4",
                "--out",
                str(tmp_path / "d.lfp"),
                "--downscale",
                f"{env / 'train_src.npz'}=1.4",
            ]
        )
        assert code == 0
        code = main(
            [
                "prepare",
                "--sources",
                str(env / "train_src.npz"),
                "--count",
                "4",
                "--out",
                str(tmp_path / "e.lfp"),
                "--downscale",
                "unknown.npz=1.4",
            ]
        )
        assert code == 2


class TestTrain:
    def test_weights_and_log_written(self, env):
        import csv

        assert (env / "weights.pt").is_file()
        log = env / "weights.pt.log.csv"
        assert log.is_file()
        with open(log) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2  # --epochs 2 halts after 2 epochs
        cfg = TrainConfig()
        for row in rows:
            assert float(row["lr"]) == pytest.approx(lr_at(cfg, int(row["epoch"])))

    def test_print_config_has_no_side_effects(self, env, tmp_path, capsys):
        out = tmp_path / "nothing.pt"
        code = main(
            [
                "train",
                "--patches",
                str(env / "train.lfp"),
                "--out",
                str(out),
                "--print-config",
            ]
        )
        assert code == 0
        assert not out.exists()
        text = capsys.readouterr().out
        assert "epochs = 150" in text and "batch_size = 128" in text


class TestReconstruct:
    def _argv(self, env, out, extra=()):
        return [
            "reconstruct",
            "--task",
            "views",
            "--mask",
            str(env / "views.json"),
            "--weights",
            str(env / "weights.pt"),
            "--obs",
            str(env / "gt.npz"),
            "--out",
            str(out),
            "--max-iters",
            "8",
            "--seed",
            "3",
            *extra,
        ]

    def test_views_task_emits_field_and_report(self, env, tmp_path, capsys):
        out = tmp_path / "rec.npz"
        report = tmp_path / "rep.csv"
        code = main(
            self._argv(
                env,
                out,
                ["--ref", str(env / "gt.npz"), "--report", str(report)],
            )
        )
        assert code == 0
        field = load_lightfield(out)
        assert field.data.shape == (5, 5, 40, 40, 1)
        assert report.is_file() and report.with_suffix(".csv.txt").is_file()
        assert "psnr" in capsys.readouterr().out

    def test_same_seed_reproduces_field(self, env, tmp_path):
        out1, out2 = tmp_path / "r1.npz", tmp_path / "r2.npz"
        assert main(self._argv(env, out1)) == 0
        assert main(self._argv(env, out2)) == 0
        a, b = load_lightfield(out1), load_lightfield(out2)
        np.testing.assert_array_equal(a.data, b.data)

    def test_pixel_mask_requires_noisy_flag(self, env, tmp_path, capsys):
        mask_json = tmp_path / "pm.json"
        from lfgen.corruption import save_pixel_mask

        save_pixel_mask(mask_json, np.ones((5, 5, 40, 40, 1)))
        code = main(
            self._argv(env, tmp_path / "x.npz", ["--pixel-mask", str(mask_json)])
        )
        assert code == 2
        assert "--noisy" in capsys.readouterr().err

    def test_coded_task_runs_joint_solver(self, env, tmp_path):
        code = main(
            [
                "reconstruct",
                "--task",
                "coded",
                "--mask",
                str(env / "coded.json"),
                "--weights",
                str(env / "weights.pt"),
                "--obs",
                str(env / "gt.npz"),
                "--out",
                str(tmp_path / "coded.npz"),
                "--max-iters",
                "6",
            ]
        )
        assert code == 0

    def test_spatial_angular_task(self, env, tmp_path):
        code = main(
            [
                "reconstruct",
                "--task",
                "spatial-angular",
                "--mask",
                str(env / "sa.json"),
                "--weights",
                str(env / "weights.pt"),
                "--obs",
                str(env / "gt.npz"),
                "--out",
                str(tmp_path / "sa.npz"),
                "--max-iters",
                "6",
            ]
        )
        assert code == 0

    def test_wrong_mask_contents_exit_2(self, env, tmp_path):
        code = main(
            [
                "reconstruct",
                "--task",
                "coded",
                "--mask",
                str(env / "views.json"),
                "--weights",
                str(env / "weights.pt"),
                "--obs",
                str(env / "gt.npz"),
                "--out",
                str(tmp_path / "x.npz"),
            ]
        )
        assert code == 2


class TestSample:
    def test_mosaic_shape_and_determinism(self, env, tmp_path):
        import cv2

        argv = [
            "sample",
            "--weights",
            str(env / "weights.pt"),
            "--input",
            str(env / "gt.npz"),
            "--out",
            str(tmp_path / "m1.png"),
        ]
        assert main(argv) == 0
        img = cv2.imread(str(tmp_path / "m1.png"), cv2.IMREAD_UNCHANGED)
        assert img.shape == (125, 125)
        argv[-1] = str(tmp_path / "m2.png")
        assert main(argv) == 0
        assert (tmp_path / "m1.png").read_bytes() == (tmp_path / "m2.png").read_bytes()

    def test_prior_sample_and_cv_swap(self, env, tmp_path):
        code = main(
            [
                "sample",
                "--weights",
                str(env / "weights.pt"),
                "--input",
                str(env / "gt.npz"),
                "--cv-from",
                str(env / "train_src.npz"),
                "--prior-sample",
                "--seed",
                "4",
                "--out",
                str(tmp_path / "m.png"),
            ]
        )
        assert code == 0


class TestCorrupt:
    def test_non_central_gaussian_preserves_central_view(self, env, tmp_path):
        out = tmp_path / "g.npz"
        code = main(
            [
                "corrupt",
                "--input",
                str(env / "gt.npz"),
                "--kind",
                "gaussian",
                "--sigma",
                "0.05",
                "--target",
                "non-central",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        gt = load_lightfield(env / "gt.npz")
        corrupted = load_lightfield(out)
        np.testing.assert_array_equal(corrupted.view(2, 2), gt.view(2, 2))
        assert np.any(corrupted.view(0, 0) != gt.view(0, 0))

    def test_drop_writes_mask_json(self, env, tmp_path):
        out = tmp_path / "d.npz"
        code = main(
            [
                "corrupt",
                "--input",
                str(env / "gt.npz"),
                "--kind",
                "drop",
                "--fraction",
                "0.5",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        from lfgen.corruption import load_pixel_mask

        mask = load_pixel_mask(str(out) + ".mask.json")
        assert mask.shape == (5, 5, 40, 40, 1)
        assert 0.4 < (mask == 0.0).mean() < 0.6

    def test_sigma_zero_is_identity(self, env, tmp_path):
        out = tmp_path / "z.npz"
        assert (
            main(
                [
                    "corrupt",
                    "--input",
                    str(env / "gt.npz"),
                    "--kind",
                    "gaussian",
                    "--sigma",
                    "0",
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        gt = load_lightfield(env / "gt.npz")
        np.testing.assert_array_equal(load_lightfield(out).data, gt.data)

    def test_missing_amount_exits_2(self, env, tmp_path):
        code = main(
            [
                "corrupt",
                "--input",
                str(env / "gt.npz"),
                "--kind",
                "drop",
                "--out",
                str(tmp_path / "x.npz"),
            ]
        )
        assert code == 2


class TestConfigFile:
    def test_config_applies_and_flags_win(self, env, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("count = 12\nseed = 9\n# comment\n")
        code = main(
            [
                "prepare",
                "--sources",
                str(env / "train_src.npz"),
                "--out",
                str(tmp_path / "c.lfp"),
                "--config",
                str(cfg),
                "--seed",
                "1",  # flag beats config
                "--print-config",
            ]
        )
        assert code == 0
        text = capsys.readouterr().out
        assert "count = 12" in text
        assert "seed = 1" in text

    def test_unknown_key_rejected(self, env, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("no_such_option = 3\n")
        code = main(
            [
                "prepare",
                "--sources",
                str(env / "train_src.npz"),
                "--out",
                str(tmp_path / "c.lfp"),
                "--config",
                str(cfg),
            ]
        )
        assert code == 2
        assert "unknown config key" in capsys.readouterr().err


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["reconstruct"])  # missing required flags
    assert exc.value.code == 2

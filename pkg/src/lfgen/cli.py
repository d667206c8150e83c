"""Command-line interface.

Subcommands: ``prepare`` (patch dataset), ``train``, ``reconstruct``,
``sample`` (decode a code against a swapped central view), and ``corrupt``.
Every subcommand accepts ``--config FILE`` (flat ``key = value`` lines;
explicit flags win) and ``--print-config`` (print resolved settings and exit
without side effects).

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np
import torch

from .corruption import CorruptionSpec, corrupt, load_pixel_mask, save_pixel_mask
from .errors import ConfigError, DataError, NumericError
from .evaluate import EvalRecord, emit_report, error_map, novel_view_psnr, psnr, save_error_map
from .io import load_lightfield, save_lightfield
from .lightfield import LightField, to_grayscale
from .model import CVAEConfig, load_weights, sample_prior, save_weights
from .operators import (
    load_masks,
    spatial_angular_op,
    view_mask_op,
    coded_aperture_op,
    with_pixel_mask,
)
from .patchdata import PatchStore, build_patch_dataset
from .patches import PATCH_SIZE
from .recon import ReconProblem, SolverSettings, observe, reconstruct
from .training import TrainConfig, autoencode_eval, train

_CORRUPT_KINDS = {"gaussian": "gaussian", "salt-pepper": "salt_pepper", "drop": "pixel_drop"}


# ---------------------------------------------------------------------------
# config file handling


def _read_flat_config(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


def _coerce(parser: argparse.ArgumentParser, values: dict[str, str]) -> dict:
    known = {a.dest: a for a in parser._actions}
    out = {}
    for key, raw in values.items():
        if key not in known or key in ("help", "config", "print_config"):
            raise ConfigError(f"unknown config key {key!r}")
        action = known[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigError(f"config key {key!r} expects a boolean, got {raw!r}")
            out[key] = low in ("true", "1", "yes")
        elif action.nargs in ("+", "*") or isinstance(action, argparse._AppendAction):
            items = raw.split()
            out[key] = [action.type(i) if action.type else i for i in items]
        else:
            out[key] = action.type(raw) if action.type else raw
        if action.choices is not None and out[key] not in action.choices:
            raise ConfigError(
                f"config key {key!r}: {out[key]!r} not in {sorted(action.choices)}"
            )
    return out


def _finalize_args(
    build_parser, argv: list[str]
) -> tuple[argparse.Namespace, argparse.ArgumentParser]:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        overrides = _coerce(parser, _read_flat_config(Path(args.config)))
        parser2 = build_parser()
        parser2.set_defaults(**overrides)
        args = parser2.parse_args(argv)
    return args, parser


def _maybe_print_config(args: argparse.Namespace) -> bool:
    if not getattr(args, "print_config", False):
        return False
    hidden = {"config", "print_config"}
    for key in sorted(vars(args)):
        if key in hidden:
            continue
        print(f"{key} = {getattr(args, key)}")
    return True


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="flat key = value config file")
    parser.add_argument(
        "--print-config", action="store_true", help="print resolved settings and exit"
    )
    parser.add_argument("--seed", type=int, default=0)


# ---------------------------------------------------------------------------
# subcommands


def _prepare_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfgen prepare", description="Build a patch store")
    p.add_argument("--sources", nargs="+", type=str, required=True)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--out", type=str, required=True)
    p.add_argument(
        "--downscale",
        action="append",
        type=str,
        default=[],
        metavar="SOURCE=FACTOR",
        help="pre-downscale one source, e.g. --downscale data/high_disp.npz=1.4",
    )
    _add_common(p)
    return p


def cmd_prepare(argv: list[str]) -> int:
    args, _ = _finalize_args(_prepare_parser, argv)
    if _maybe_print_config(args):
        return 0
    scales = {}
    for item in args.downscale:
        if "=" not in item:
            raise ConfigError(f"--downscale expects SOURCE=FACTOR, got {item!r}")
        src, factor = item.rsplit("=", 1)
        scales[src] = float(factor)
    store = build_patch_dataset(
        args.sources, args.count, args.seed, args.out, per_source_downscale=scales
    )
    print(f"wrote {store.count} patches (angular {store.n_v}) to {store.path}")
    return 0


def _train_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfgen train", description="Train the patch model")
    p.add_argument("--patches", type=str, required=True)
    p.add_argument("--out", type=str, required=True, help="weights output file")
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--latent-dim", type=int, default=160)
    p.add_argument("--checkpoint-interval", type=int, default=0)
    p.add_argument("--checkpoint-dir", type=str, default=None)
    p.add_argument("--resume-from", type=str, default=None)
    p.add_argument("--log", type=str, default=None, help="metrics CSV (default <out>.log.csv)")
    _add_common(p)
    return p


def cmd_train(argv: list[str]) -> int:
    args, _ = _finalize_args(_train_parser, argv)
    if _maybe_print_config(args):
        return 0
    store = PatchStore(args.patches)
    model_cfg = CVAEConfig(angular=store.n_v, latent_dim=args.latent_dim)
    train_cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr_initial=args.lr,
        seed=args.seed,
        checkpoint_interval=args.checkpoint_interval,
    )
    log_path = args.log or (args.out + ".log.csv")
    model, history = train(
        train_cfg,
        model_cfg,
        store,
        checkpoint_dir=args.checkpoint_dir,
        log_path=log_path,
        resume_from=args.resume_from,
    )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_weights(model, args.out)
    last = history[-1]
    print(
        f"trained {len(history)} epochs; final total {last.total:.6f} "
        f"(mse {last.mse:.6f}, mmd {last.mmd:.6f}); weights -> {args.out}"
    )
    return 0


def _reconstruct_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfgen reconstruct", description="Recover a light field")
    p.add_argument("--task", choices=("views", "spatial-angular", "coded"), required=True)
    p.add_argument("--mask", type=str, required=True, help="mask JSON file")
    p.add_argument("--weights", type=str, required=True)
    p.add_argument("--obs", type=str, required=True, help="observed light field (dir or .npz)")
    p.add_argument("--stride", type=int, choices=(5, 25), default=25)
    p.add_argument("--loss", choices=("l2", "l1"), default="l2")
    p.add_argument("--tv", type=float, default=0.0)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--out-format", choices=("npz", "dir"), default="npz")
    p.add_argument("--pixel-mask", type=str, default=None)
    p.add_argument("--noisy", action="store_true", help="observations are corrupted")
    p.add_argument(
        "--optimize-central",
        action="store_true",
        help="jointly optimize the central view (implied for --task coded)",
    )
    p.add_argument("--ref", type=str, default=None, help="ground truth for PSNR report")
    p.add_argument("--report", type=str, default=None, help="CSV report path")
    p.add_argument("--error-map-dir", type=str, default=None)
    p.add_argument("--psnr-views", choices=("all", "novel"), default=None)
    p.add_argument("--psnr-mode", choices=("per_channel_mean", "luminance"), default=None)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--solver-lr", type=float, default=1e-2)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--patch-batch", type=int, default=64)
    _add_common(p)
    return p


def _build_operator(args, masks, lf_shape4):
    if args.task == "views":
        if masks.angular is None:
            raise ConfigError("--task views needs an 'angular' grid in the mask file")
        return view_mask_op(masks.angular, lf_shape4)
    if args.task == "spatial-angular":
        if masks.angular is None or masks.downsample is None:
            raise ConfigError(
                "--task spatial-angular needs 'angular' and 'factors' in the mask file"
            )
        return spatial_angular_op(masks.angular, masks.downsample, lf_shape4)
    if masks.coded is None:
        raise ConfigError("--task coded needs a 'coded' mask list in the mask file")
    return coded_aperture_op(masks.coded, lf_shape4)


def cmd_reconstruct(argv: list[str]) -> int:
    args, _ = _finalize_args(_reconstruct_parser, argv)
    if _maybe_print_config(args):
        return 0
    if args.pixel_mask is not None and not args.noisy:
        raise ConfigError("--pixel-mask requires --noisy (corrupt observations)")
    model = load_weights(args.weights)
    obs_lf = load_lightfield(args.obs)
    if obs_lf.angular != model.config.angular:
        raise DataError(
            f"field has {obs_lf.angular}x{obs_lf.angular} views but the model "
            f"was trained for {model.config.angular}x{model.config.angular}"
        )
    shape4 = (obs_lf.angular, obs_lf.angular, obs_lf.height, obs_lf.width)
    masks = load_masks(args.mask)
    op = _build_operator(args, masks, shape4)
    if args.pixel_mask is not None:
        lf_mask = load_pixel_mask(args.pixel_mask)
        if lf_mask.ndim != 5:
            raise DataError("pixel mask must cover the full light field")
        obs_mask = np.asarray(op.apply(lf_mask[..., 0]))
        op = with_pixel_mask(op, obs_mask)
    observation = observe(op, obs_lf)

    central_available = args.task != "coded" and not args.optimize_central
    problem = ReconProblem(
        observation=observation,
        operator=op,
        central_view_available=central_available,
        data_loss=args.loss,
        tv_weight=args.tv,
        stride=args.stride,
        solver=SolverSettings(
            lr=args.solver_lr,
            max_iters=args.max_iters,
            tol=args.tol,
            patch_batch=args.patch_batch,
        ),
        noisy=args.noisy,
        seed=args.seed,
    )
    t0 = time.time()
    result = reconstruct(problem, model, obs_lf.data.shape)
    runtime = time.time() - t0
    save_lightfield(result.lightfield, args.out, format=args.out_format)
    print(
        f"reconstructed {obs_lf.angular}x{obs_lf.angular}x{obs_lf.height}"
        f"x{obs_lf.width} field in {runtime:.1f}s; "
        f"median residual {np.median(result.residuals):.3e}; -> {args.out}"
    )

    if args.ref is not None:
        ref = load_lightfield(args.ref)
        mode = args.psnr_mode or (
            "luminance" if obs_lf.angular == 7 else "per_channel_mean"
        )
        which = args.psnr_views or ("novel" if obs_lf.angular == 7 else "all")
        if which == "novel" and masks.angular is not None:
            _, mean_db = novel_view_psnr(ref, result.lightfield, masks.angular, mode)
        else:
            mean_db = psnr(ref, result.lightfield, mode)
        print(f"psnr ({which}, {mode}): {mean_db:.2f} dB")
        if args.report is not None:
            emit_report(
                [
                    EvalRecord(
                        lf=Path(args.obs).stem or str(args.obs),
                        task=args.task,
                        mask=Path(args.mask).name,
                        stride=args.stride,
                        loss=args.loss,
                        mean_psnr_db=mean_db,
                        runtime_s=runtime,
                    )
                ],
                args.report,
            )
        if args.error_map_dir is not None:
            out_dir = Path(args.error_map_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            for r in range(ref.angular):
                for c in range(ref.angular):
                    emap = error_map(ref.view(r, c), result.lightfield.view(r, c))
                    save_error_map(out_dir / f"error_{r}_{c}.png", emap)
    return 0


def _sample_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lfgen sample",
        description="Decode a latent code against a (possibly swapped) central view",
    )
    p.add_argument("--weights", type=str, required=True)
    p.add_argument("--input", type=str, required=True, help="light field to encode")
    p.add_argument("--origin", type=str, default=None, metavar="Y,X")
    p.add_argument("--cv-from", type=str, default=None, help="take the central view from this field")
    p.add_argument("--cv-origin", type=str, default=None, metavar="Y,X")
    p.add_argument("--prior-sample", action="store_true", help="draw z from the prior instead of encoding")
    p.add_argument("--out", type=str, required=True, help="output mosaic PNG")
    _add_common(p)
    return p


def _crop_patch(lf: LightField, origin: str | None) -> np.ndarray:
    gray = to_grayscale(lf)
    if origin is None:
        oy = (gray.height - PATCH_SIZE) // 2
        ox = (gray.width - PATCH_SIZE) // 2
    else:
        oy, ox = (int(t) for t in origin.split(","))
    if not (0 <= oy <= gray.height - PATCH_SIZE and 0 <= ox <= gray.width - PATCH_SIZE):
        raise ConfigError(f"patch origin ({oy},{ox}) out of bounds")
    return np.array(gray.channel(0)[:, :, oy : oy + PATCH_SIZE, ox : ox + PATCH_SIZE])


def cmd_sample(argv: list[str]) -> int:
    import cv2

    args, _ = _finalize_args(_sample_parser, argv)
    if _maybe_print_config(args):
        return 0
    model = load_weights(args.weights)
    model.eval()
    n = model.config.angular
    patch = _crop_patch(load_lightfield(args.input), args.origin)
    if patch.shape[0] != n:
        raise DataError(f"input field angular size {patch.shape[0]} != model {n}")
    if args.cv_from is not None:
        cv_patch = _crop_patch(load_lightfield(args.cv_from), args.cv_origin or args.origin)
        central = cv_patch[n // 2, n // 2]
    else:
        central = patch[n // 2, n // 2]
    with torch.no_grad():
        if args.prior_sample:
            z = torch.as_tensor(sample_prior(1, args.seed, model.config))
        else:
            z = model.encode(torch.as_tensor(patch[None], dtype=torch.float32))
        out = model.generate(z, torch.as_tensor(central[None], dtype=torch.float32))
    views = np.clip(out[0].numpy(), 0.0, 1.0)
    mosaic = views.transpose(0, 2, 1, 3).reshape(n * PATCH_SIZE, n * PATCH_SIZE)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(args.out, np.round(mosaic * 255.0).astype(np.uint8)):
        raise DataError(f"failed to write mosaic {args.out}")
    print(f"mosaic ({n * PATCH_SIZE}x{n * PATCH_SIZE}) -> {args.out}")
    return 0


def _corrupt_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfgen corrupt", description="Corrupt a light field")
    p.add_argument("--input", type=str, required=True)
    p.add_argument("--kind", choices=tuple(_CORRUPT_KINDS), required=True)
    p.add_argument("--sigma", type=float, default=None, help="gaussian noise std")
    p.add_argument("--prob", type=float, default=None, help="salt-pepper occurrence probability")
    p.add_argument("--fraction", type=float, default=None, help="dropped pixel fraction")
    p.add_argument("--target", choices=("all", "non-central"), default="all")
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--out-format", choices=("npz", "dir"), default="npz")
    p.add_argument("--mask-out", type=str, default=None, help="pixel mask JSON path")
    _add_common(p)
    return p


def cmd_corrupt(argv: list[str]) -> int:
    args, _ = _finalize_args(_corrupt_parser, argv)
    if _maybe_print_config(args):
        return 0
    amounts = {"gaussian": args.sigma, "salt-pepper": args.prob, "drop": args.fraction}
    flags = {"gaussian": "--sigma", "salt-pepper": "--prob", "drop": "--fraction"}
    amount = amounts[args.kind]
    if amount is None:
        raise ConfigError(f"--kind {args.kind} requires {flags[args.kind]}")
    spec = CorruptionSpec(
        kind=_CORRUPT_KINDS[args.kind],
        amount=amount,
        target_views=args.target.replace("-", "_"),
        seed=args.seed,
    )
    lf = load_lightfield(args.input)
    corrupted, mask = corrupt(lf, spec)
    save_lightfield(corrupted, args.out, format=args.out_format)
    mask_out = args.mask_out
    if mask_out is None and spec.kind == "pixel_drop":
        mask_out = args.out + ".mask.json"
    if mask_out is not None:
        save_pixel_mask(mask_out, mask)
        print(f"pixel mask -> {mask_out}")
    print(f"corrupted field -> {args.out}")
    return 0


# ---------------------------------------------------------------------------


_COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "reconstruct": cmd_reconstruct,
    "sample": cmd_sample,
    "corrupt": cmd_corrupt,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    top = argparse.ArgumentParser(
        prog="lfgen",
        description="Light-field reconstruction with a generative patch prior",
    )
    top.add_argument("command", choices=tuple(_COMMANDS))
    ns, rest = top.parse_known_args(argv)
    try:
        return _COMMANDS[ns.command](rest)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

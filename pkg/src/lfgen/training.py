"""Mini-batch training loop for the patch autoencoder.

Adam with (beta1, beta2) = (0.5, 0.999), initial learning rate 1e-3, and a
cumulative piecewise-constant schedule: /2 after epoch 30, a further /5 after
epoch 50, a further /10 after epoch 100. Metrics are appended to a CSV as
``epoch, lr, total, mse, mmd, wall_seconds``.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .evaluate import psnr
from .model import CVAEConfig, CentralViewVAE, loss_batch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    batch_size: int = 128
    lr_initial: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    # (epoch, divisor) pairs applied cumulatively once the epoch is reached
    milestones: tuple[tuple[int, float], ...] = ((30, 2.0), (50, 5.0), (100, 10.0))
    seed: int = 0
    checkpoint_interval: int = 0  # epochs; 0 disables
    # stop once an epoch's mean reconstruction MSE falls below this
    stop_mse: float | None = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (MMD needs two samples)")
        epochs = [m for m, _ in self.milestones]
        if epochs != sorted(epochs):
            raise ValueError("milestones must be sorted by epoch")


def lr_at(config: TrainConfig, epoch: int) -> float:
    """Learning rate in effect during ``epoch`` (0-based)."""
    lr = config.lr_initial
    for milestone, divisor in config.milestones:
        if epoch >= milestone:
            lr /= divisor
    return lr


@dataclass
class EpochStats:
    epoch: int
    lr: float
    total: float
    mse: float
    mmd: float
    wall_seconds: float


_CSV_FIELDS = ("epoch", "lr", "total", "mse", "mmd", "wall_seconds")


def _append_log(path: Path, stats: EpochStats, write_header: bool) -> None:
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if write_header:
            writer.writerow(_CSV_FIELDS)
        writer.writerow(
            [
                stats.epoch,
                f"{stats.lr:.10g}",
                f"{stats.total:.10g}",
                f"{stats.mse:.10g}",
                f"{stats.mmd:.10g}",
                f"{stats.wall_seconds:.6f}",
            ]
        )


def _take_batch(patches, indices: np.ndarray) -> np.ndarray:
    if isinstance(patches, np.ndarray):
        return patches[indices]
    return patches.read_batch(indices)


def _checkpoint_path(out_dir: Path, epoch: int) -> Path:
    return out_dir / f"checkpoint_epoch{epoch:04d}.pt"


def save_checkpoint(
    path: Path,
    model: CentralViewVAE,
    optimizer: torch.optim.Optimizer,
    next_epoch: int,
    shuffle_rng: np.random.Generator,
    prior_gen: torch.Generator,
) -> None:
    torch.save(
        {
            "format_version": 1,
            "config": model.config.__dict__ | {},
            "next_epoch": next_epoch,
            "model_state": model.state_dict(),
            "optimizer_state": optimizer.state_dict(),
            "shuffle_rng_state": shuffle_rng.bit_generator.state,
            "prior_gen_state": prior_gen.get_state(),
        },
        path,
    )


def train(
    train_config: TrainConfig,
    cvae_config: CVAEConfig,
    patches,
    checkpoint_dir: str | Path | None = None,
    log_path: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> tuple[CentralViewVAE, list[EpochStats]]:
    """Train on a patch dataset (a PatchStore or an (N, n, n, 25, 25) array).

    Shuffles the full dataset each epoch under the run seed; deterministic on
    CPU for a fixed seed. When ``checkpoint_dir`` is set, resumable
    checkpoints land there every ``checkpoint_interval`` epochs.
    """
    n_patches = len(patches)
    if n_patches < 1:
        raise ValueError("patch dataset is empty")
    probe = _take_batch(patches, np.array([0]))
    n_v = probe.shape[1]
    if n_v != cvae_config.angular:
        raise ValueError(
            f"patch store has angular size {n_v}, config wants {cvae_config.angular}"
        )

    torch.manual_seed(train_config.seed)
    model = CentralViewVAE(cvae_config)
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=train_config.lr_initial,
        betas=(train_config.beta1, train_config.beta2),
    )
    shuffle_rng = np.random.default_rng(train_config.seed)
    prior_gen = torch.Generator().manual_seed(train_config.seed + 1)
    start_epoch = 0

    if resume_from is not None:
        blob = torch.load(resume_from, map_location="cpu", weights_only=False)
        model.load_state_dict(blob["model_state"])
        optimizer.load_state_dict(blob["optimizer_state"])
        shuffle_rng.bit_generator.state = blob["shuffle_rng_state"]
        prior_gen.set_state(blob["prior_gen_state"])
        start_epoch = int(blob["next_epoch"])

    out = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    log = Path(log_path) if log_path is not None else None
    log_header = log is not None and not log.exists()

    model.train()
    history: list[EpochStats] = []
    for epoch in range(start_epoch, train_config.epochs):
        t0 = time.time()
        lr = lr_at(train_config, epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        order = shuffle_rng.permutation(n_patches)
        sums = np.zeros(3)
        steps = 0
        for lo in range(0, n_patches, train_config.batch_size):
            idx = order[lo : lo + train_config.batch_size]
            if len(idx) < 2:
                continue  # a single leftover patch cannot form an MMD batch
            batch = torch.as_tensor(_take_batch(patches, idx), dtype=torch.float32)
            total, mse, mmd_val = loss_batch(model, batch, prior_gen)
            optimizer.zero_grad()
            total.backward()
            optimizer.step()
            sums += [float(total.detach()), float(mse.detach()), float(mmd_val.detach())]
            steps += 1
        stats = EpochStats(
            epoch=epoch,
            lr=lr,
            total=sums[0] / steps,
            mse=sums[1] / steps,
            mmd=sums[2] / steps,
            wall_seconds=time.time() - t0,
        )
        history.append(stats)
        if log is not None:
            _append_log(log, stats, log_header)
            log_header = False
        if (
            out is not None
            and train_config.checkpoint_interval > 0
            and (epoch + 1) % train_config.checkpoint_interval == 0
        ):
            save_checkpoint(
                _checkpoint_path(out, epoch + 1),
                model,
                optimizer,
                epoch + 1,
                shuffle_rng,
                prior_gen,
            )
        if train_config.stop_mse is not None and stats.mse < train_config.stop_mse:
            break

    model.eval()
    return model, history


def autoencode_eval(
    model: CentralViewVAE,
    patches,
    batch_size: int = 32,
) -> float:
    """Mean reconstruction PSNR (dB) of encode -> generate over a patch set."""
    model.eval()
    n = len(patches)
    values = []
    with torch.no_grad():
        for lo in range(0, n, batch_size):
            idx = np.arange(lo, min(lo + batch_size, n))
            batch = torch.as_tensor(_take_batch(patches, idx), dtype=torch.float32)
            recon, _ = model(batch)
            for ref, est in zip(batch.numpy(), recon.numpy()):
                values.append(psnr(ref, np.clip(est, 0.0, 1.0)))
    return float(np.mean(values))

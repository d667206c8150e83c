"""Central-view-conditioned generative autoencoder for 4D light-field patches.

An encoder maps a (n, n, 25, 25) patch to a 160-d latent code and a generator
maps the code back, with convolutional features of the central view (CVF)
injected on both sides. The 4D patch is processed as two 3D stacks (split by
angular row / angular column) so only 2D and 3D convolutions are needed, and
the two decoded stacks are fused by one genuine 4D convolution realized as a
sum of shifted 3D convolutions.

Trained as a Wasserstein-style autoencoder: mean-squared reconstruction error
plus a scaled MMD between the batch of codes and an isotropic Gaussian prior
(variance 2), estimated with an inverse multiquadric kernel V-statistic.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import DataError

PATCH_SIZE = 25

# architecture constants; changing any of these changes the weight fingerprint
ARCH_VERSION = 1
FEATURE_CHANNELS = (1, 6, 10, 20, 40, 50, 60)
FEATURE_STRIDES = (1, 2, 1, 1, 2, 1)
ANGULAR_ENC_CHANNELS = (20, 40, 60)  # input channels = n_v
JOINT_ENC_CHANNELS = (140, 200, 250, 300)
JOINT_DEC_CHANNELS = (300, 250, 200, 120)
ANGULAR_DEC_CHANNELS = (140, 80, 40, 20)
FC_HIDDEN = 1024
CVF1_SPATIAL = 13
CVF2_SPATIAL = 7


@dataclass(frozen=True)
class CVAEConfig:
    """Model hyperparameters. The layer schedules are fixed; only the angular
    resolution, latent size, prior variance and MMD weight vary."""

    angular: int = 5
    latent_dim: int = 160
    prior_variance: float = 2.0
    lambda_mmd: float = 100.0

    def __post_init__(self) -> None:
        if self.angular not in (5, 7):
            raise ValueError(f"angular resolution must be 5 or 7, got {self.angular}")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be positive")
        if self.prior_variance <= 0.0:
            raise ValueError("prior_variance must be positive")
        if self.lambda_mmd < 0.0:
            raise ValueError("lambda_mmd must be non-negative")

    def fingerprint(self) -> str:
        doc = {
            "arch_version": ARCH_VERSION,
            "config": asdict(self),
            "feature_channels": FEATURE_CHANNELS,
            "feature_strides": FEATURE_STRIDES,
            "angular_enc_channels": ANGULAR_ENC_CHANNELS,
            "joint_enc_channels": JOINT_ENC_CHANNELS,
            "joint_dec_channels": JOINT_DEC_CHANNELS,
            "angular_dec_channels": ANGULAR_DEC_CHANNELS,
            "fc_hidden": FC_HIDDEN,
        }
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _conv_bn_relu(cin: int, cout: int, stride: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class CentralViewFeatureNet(nn.Module):
    """Feature extractor over the 25x25 central patch.

    Emits CVF1 (20 channels at 13x13, after the third layer) and CVF2
    (60 channels at 7x7, after the final layer).
    """

    def __init__(self) -> None:
        super().__init__()
        chans, strides = FEATURE_CHANNELS, FEATURE_STRIDES
        layers = [
            _conv_bn_relu(chans[i], chans[i + 1], strides[i])
            for i in range(len(strides))
        ]
        self.head = nn.Sequential(*layers[:3])
        self.tail = nn.Sequential(*layers[3:])

    def forward(self, central: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        cvf1 = self.head(central)
        cvf2 = self.tail(cvf1)
        return cvf1, cvf2


class AngularStackEncoder(nn.Module):
    """3D conv stack collapsing one angular axis (the depth) from n_v to 1.

    Input is (B, n_v, n_v, 25, 25) read as (channels=one angular axis,
    depth=the other). Only the first layer's depth padding differs between
    the 5x5 and 7x7 models: depth goes 5 -> 5 -> 3 -> 1 (pad 1) or
    7 -> 5 -> 3 -> 1 (pad 0).
    """

    def __init__(self, n_v: int):
        super().__init__()
        c1, c2, c3 = ANGULAR_ENC_CHANNELS
        depth_pad = 1 if n_v == 5 else 0
        self.net = nn.Sequential(
            nn.Conv3d(n_v, c1, 3, stride=1, padding=(depth_pad, 1, 1)),
            nn.BatchNorm3d(c1),
            nn.ReLU(inplace=True),
            nn.Conv3d(c1, c2, 3, stride=(1, 2, 2), padding=(0, 1, 1)),
            nn.BatchNorm3d(c2),
            nn.ReLU(inplace=True),
            nn.Conv3d(c2, c3, 3, stride=1, padding=(0, 1, 1)),
            nn.BatchNorm3d(c3),
            nn.ReLU(inplace=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.net(x)
        return out.squeeze(2)  # depth collapsed to 1


class AngularStackDecoder(nn.Module):
    """Transposed mirror of :class:`AngularStackEncoder`: grows the depth
    axis 1 -> n_v while upsampling 13x13 back to 25x25."""

    def __init__(self, n_v: int):
        super().__init__()
        c0, c1, c2, c3 = ANGULAR_DEC_CHANNELS
        depth_pad = 1 if n_v == 5 else 0
        self.net = nn.Sequential(
            nn.ConvTranspose3d(c0, c1, 3, stride=1, padding=(depth_pad, 1, 1)),
            nn.BatchNorm3d(c1),
            nn.ReLU(inplace=True),
            nn.ConvTranspose3d(c1, c2, 3, stride=(1, 2, 2), padding=(0, 1, 1)),
            nn.BatchNorm3d(c2),
            nn.ReLU(inplace=True),
            nn.ConvTranspose3d(c2, c3, 3, stride=1, padding=(0, 1, 1)),
            nn.BatchNorm3d(c3),
            nn.ReLU(inplace=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class Conv4d(nn.Module):
    """4D convolution (kernel 3 on all four axes, padding 1) over a
    (B, C, U, V, Y, X) volume, realized as three U-shifted 3D convolutions
    sharing one bias."""

    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.u_taps = nn.ModuleList(
            nn.Conv3d(cin, cout, 3, padding=1, bias=False) for _ in range(3)
        )
        self.bias = nn.Parameter(torch.zeros(cout))
        self.cout = cout

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, u, v, y, w = x.shape
        xp = F.pad(x, (0, 0, 0, 0, 0, 0, 1, 1))  # pad the U axis only
        out = None
        for ku, conv in enumerate(self.u_taps):
            xs = xp[:, :, ku : ku + u]
            xs = xs.permute(0, 2, 1, 3, 4, 5).reshape(b * u, c, v, y, w)
            ys = conv(xs).reshape(b, u, self.cout, v, y, w)
            out = ys if out is None else out + ys
        out = out + self.bias.view(1, 1, self.cout, 1, 1, 1)
        return out.permute(0, 2, 1, 3, 4, 5)


class PatchEncoder(nn.Module):
    """Row/column 3D stacks -> joint 2D encoder -> fully connected code."""

    def __init__(self, config: CVAEConfig):
        super().__init__()
        n_v = config.angular
        self.rows = AngularStackEncoder(n_v)  # depth = angular rows
        self.cols = AngularStackEncoder(n_v)  # depth = angular cols
        e0, e1, e2, e3 = JOINT_ENC_CHANNELS
        self.joint = nn.Sequential(
            _conv_bn_relu(e0, e1, 1),
            _conv_bn_relu(e1, e2, 2),
            _conv_bn_relu(e2, e3, 1),
        )
        flat = (e3 + FEATURE_CHANNELS[-1]) * CVF2_SPATIAL**2
        self.fc1 = nn.Linear(flat, FC_HIDDEN)
        self.fc2 = nn.Linear(FC_HIDDEN, config.latent_dim)

    def forward(
        self, patch: torch.Tensor, cvf1: torch.Tensor, cvf2: torch.Tensor
    ) -> torch.Tensor:
        # patch: (B, U, V, Y, X); rows stack wants depth=U, cols depth=V
        r = self.rows(patch.permute(0, 2, 1, 3, 4))
        c = self.cols(patch)
        h = torch.cat([r, c, cvf1], dim=1)
        h = self.joint(h)
        h = torch.cat([h, cvf2], dim=1).flatten(1)
        return self.fc2(F.relu(self.fc1(h)))


class PatchGenerator(nn.Module):
    """Latent code + CVF -> joint 2D decoder -> row/column 3D stacks ->
    4D fusion into the output patch. The fusion layer is linear."""

    def __init__(self, config: CVAEConfig):
        super().__init__()
        n_v = config.angular
        self.n_v = n_v
        d0, d1, d2, d3 = JOINT_DEC_CHANNELS
        cvf2_flat = FEATURE_CHANNELS[-1] * CVF2_SPATIAL**2
        self.fc1 = nn.Linear(config.latent_dim + cvf2_flat, FC_HIDDEN)
        self.fc2 = nn.Linear(FC_HIDDEN, d0 * CVF2_SPATIAL**2)
        self.joint = nn.Sequential(
            nn.ConvTranspose2d(d0, d1, 3, stride=1, padding=1),
            nn.BatchNorm2d(d1),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(d1, d2, 3, stride=2, padding=1),
            nn.BatchNorm2d(d2),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(d2, d3, 3, stride=1, padding=1),
            nn.BatchNorm2d(d3),
            nn.ReLU(inplace=True),
        )
        self.rows = AngularStackDecoder(n_v)  # depth = angular rows
        self.cols = AngularStackDecoder(n_v)  # depth = angular cols
        self.fusion = Conv4d(2 * ANGULAR_DEC_CHANNELS[-1], 1)

    def forward(
        self, z: torch.Tensor, cvf1: torch.Tensor, cvf2: torch.Tensor
    ) -> torch.Tensor:
        h = torch.cat([z, cvf2.flatten(1)], dim=1)
        h = self.fc2(F.relu(self.fc1(h)))
        h = h.view(-1, JOINT_DEC_CHANNELS[0], CVF2_SPATIAL, CVF2_SPATIAL)
        h = self.joint(h)
        h = torch.cat([h, cvf1], dim=1).unsqueeze(2)  # depth 1
        r = self.rows(h)  # (B, 20, U, 25, 25)
        c = self.cols(h)  # (B, 20, V, 25, 25)
        n = self.n_v
        r4 = r.unsqueeze(3).expand(-1, -1, -1, n, -1, -1)
        c4 = c.unsqueeze(2).expand(-1, -1, n, -1, -1, -1)
        fused = self.fusion(torch.cat([r4, c4], dim=1))
        return fused.squeeze(1)


class CentralViewVAE(nn.Module):
    """Full model: feature extractor + encoder + generator."""

    def __init__(self, config: CVAEConfig):
        super().__init__()
        self.config = config
        self.features = CentralViewFeatureNet()
        self.encoder = PatchEncoder(config)
        self.generator = PatchGenerator(config)

    @staticmethod
    def _central_2d(central: torch.Tensor) -> torch.Tensor:
        if central.ndim == 3:
            return central.unsqueeze(1)
        if central.ndim == 4 and central.shape[1] == 1:
            return central
        raise ValueError(f"central patch must be (B, 25, 25), got {tuple(central.shape)}")

    def central_features(
        self, central: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """CVF1/CVF2 feature maps of a batch of central patches."""
        central = self._central_2d(central)
        if central.shape[-2:] != (PATCH_SIZE, PATCH_SIZE):
            raise ValueError(
                f"central patch must be {PATCH_SIZE}x{PATCH_SIZE}, "
                f"got {tuple(central.shape[-2:])}"
            )
        return self.features(central)

    def _check_patch(self, patch: torch.Tensor) -> None:
        n = self.config.angular
        if patch.ndim != 5 or patch.shape[1:] != (n, n, PATCH_SIZE, PATCH_SIZE):
            raise ValueError(
                f"patch batch must be (B, {n}, {n}, {PATCH_SIZE}, {PATCH_SIZE}), "
                f"got {tuple(patch.shape)}"
            )

    def center_of(self, patch: torch.Tensor) -> torch.Tensor:
        c = self.config.angular // 2
        return patch[:, c, c]

    def encode(
        self, patch: torch.Tensor, central: torch.Tensor | None = None
    ) -> torch.Tensor:
        """Latent code of a patch batch, conditioned on ``central`` (defaults
        to the patch's own central view)."""
        self._check_patch(patch)
        if central is None:
            central = self.center_of(patch)
        cvf1, cvf2 = self.central_features(central)
        return self.encoder(patch, cvf1, cvf2)

    def generate(self, z: torch.Tensor, central: torch.Tensor) -> torch.Tensor:
        """Decode latent codes against central patches; differentiable in
        both arguments."""
        if z.ndim != 2 or z.shape[1] != self.config.latent_dim:
            raise ValueError(
                f"latent batch must be (B, {self.config.latent_dim}), "
                f"got {tuple(z.shape)}"
            )
        cvf1, cvf2 = self.central_features(central)
        return self.generator(z, cvf1, cvf2)

    def forward(self, patch: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        z = self.encode(patch)
        recon = self.generate(z, self.center_of(patch))
        return recon, z


def mmd(
    a: torch.Tensor | np.ndarray,
    b: torch.Tensor | np.ndarray,
    prior_variance: float = 2.0,
) -> torch.Tensor:
    """Squared maximum mean discrepancy between two same-width sample batches.

    Inverse multiquadric kernel k(x, y) = C / (C + |x - y|^2) with
    C = 2 * dim * prior_variance, biased V-statistic (diagonal included), so
    the result is symmetric, non-negative, and exactly zero for identical
    batches.
    """
    a = torch.as_tensor(a)
    b = torch.as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"mmd needs two (n, d) batches, got {a.shape} and {b.shape}")
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ValueError("mmd needs batch size >= 2")
    c = 2.0 * a.shape[1] * prior_variance

    def kmean(x, y):
        d2 = torch.cdist(x, y) ** 2
        return (c / (c + d2)).mean()

    # evaluate the cross term both ways so the value is exactly symmetric
    cross = 0.5 * (kmean(a, b) + kmean(b, a))
    return kmean(a, a) + kmean(b, b) - 2.0 * cross


def sample_prior(
    n: int, seed: int, config: CVAEConfig | None = None
) -> np.ndarray:
    """Draw n latent codes from the isotropic Gaussian prior N(0, var*I)."""
    cfg = config or CVAEConfig()
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, cfg.latent_dim)) * math.sqrt(cfg.prior_variance)
    return z.astype(np.float32)


def loss_batch(
    model: CentralViewVAE,
    patch_batch: torch.Tensor | np.ndarray,
    generator: torch.Generator | None = None,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Autoencoding loss of one mini-batch.

    Returns (total, mse, mmd) with total = mse + lambda_mmd * mmd; the MMD
    compares the batch of codes to a fresh equal-size prior sample drawn from
    ``generator``.
    """
    patch = torch.as_tensor(patch_batch, dtype=torch.float32)
    if patch.ndim != 5 or patch.shape[0] < 2:
        raise ValueError("loss_batch needs a (B>=2, n, n, 25, 25) batch")
    cfg = model.config
    z = model.encode(patch)
    recon = model.generate(z, model.center_of(patch))
    mse = F.mse_loss(recon, patch)
    prior = torch.randn(
        z.shape[0], cfg.latent_dim, generator=generator, dtype=torch.float32
    ) * math.sqrt(cfg.prior_variance)
    mmd_val = mmd(z, prior.to(z.dtype), cfg.prior_variance)
    total = mse + cfg.lambda_mmd * mmd_val
    return total, mse, mmd_val


def save_weights(model: CentralViewVAE, path) -> None:
    """Serialize config fingerprint + named parameter tensors."""
    torch.save(
        {
            "format_version": 1,
            "config": asdict(model.config),
            "fingerprint": model.config.fingerprint(),
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_weights(path, config: CVAEConfig | None = None) -> CentralViewVAE:
    """Load a model saved by :func:`save_weights`.

    When ``config`` is given its fingerprint must match the stored one.
    """
    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:  # torch raises various pickle/zip errors
        raise DataError(f"cannot read weights file {path}: {exc}") from exc
    if not isinstance(blob, dict) or "state_dict" not in blob:
        raise DataError(f"{path} is not a weights file")
    stored = CVAEConfig(**blob["config"])
    if blob.get("fingerprint") != stored.fingerprint():
        raise DataError(f"weights file {path} fingerprint mismatch (corrupt?)")
    if config is not None and config.fingerprint() != blob["fingerprint"]:
        raise DataError(
            f"weights at {path} were trained with config {blob['config']}, "
            "which does not match the requested config"
        )
    model = CentralViewVAE(stored)
    model.load_state_dict(blob["state_dict"], strict=True)
    return model

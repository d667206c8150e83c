"""Light-field recovery by energy minimization in the generator's latent space.

Each 25x25 patch subproblem minimizes ``loss(i, Phi(G(z, c)))`` over the
latent code z (plus the central patch c and an optional TV penalty when the
central view is not observed) with Adam, starting from a prior draw. Patches
are independent, so batches of them share optimizer steps exactly. Full
fields are processed per color channel and re-assembled by overlap-averaged
stitching.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import torch

from .errors import NumericError
from .lightfield import LightField
from .model import CentralViewVAE, sample_prior
from .operators import (
    CodedApertureOperator,
    MeasurementOperator,
    PixelMaskedOperator,
    SpatialAngularOperator,
    ViewMaskOperator,
)
from .patches import PATCH_SIZE, build_grid, stitch_patches

LOSS_KINDS = ("l2", "l1")


def data_loss(kind: str, i, pred, mask=None):
    """Mean data-fit term between an observation and a prediction.

    ``l2`` is the mean squared difference, ``l1`` the mean absolute
    difference. With ``mask`` (1 = observed) the mean runs over observed
    entries only and masked entries cannot influence the value.
    """
    if kind not in LOSS_KINDS:
        raise ValueError(f"loss kind must be one of {LOSS_KINDS}, got {kind!r}")
    if tuple(i.shape) != tuple(pred.shape):
        raise ValueError(f"shape mismatch {tuple(i.shape)} vs {tuple(pred.shape)}")
    diff = i - pred
    backend_abs = torch.abs if torch.is_tensor(diff) else np.abs
    if mask is not None:
        if torch.is_tensor(diff) and not torch.is_tensor(mask):
            m = torch.as_tensor(np.asarray(mask), dtype=diff.dtype)
        elif not torch.is_tensor(diff):
            m = np.asarray(mask, dtype=np.float64)
        else:
            m = mask
        diff = diff * m
        per = diff * diff if kind == "l2" else backend_abs(diff)
        denom = m.sum()
        if float(denom) == 0.0:
            return per.sum() * 0.0
        return per.sum() / denom
    per = diff * diff if kind == "l2" else backend_abs(diff)
    return per.mean()


def tv(image):
    """Anisotropic total variation of a 2D image: the sum of absolute
    horizontal and vertical forward differences (no wrap-around)."""
    if image.ndim != 2:
        raise ValueError(f"tv expects a 2D image, got {image.ndim} axes")
    dy = image[1:, :] - image[:-1, :]
    dx = image[:, 1:] - image[:, :-1]
    if torch.is_tensor(image):
        return dy.abs().sum() + dx.abs().sum()
    return np.abs(dy).sum() + np.abs(dx).sum()


def _tv_batch(c: torch.Tensor) -> torch.Tensor:
    dy = c[:, 1:, :] - c[:, :-1, :]
    dx = c[:, :, 1:] - c[:, :, :-1]
    return dy.abs().sum() + dx.abs().sum()


@dataclass(frozen=True)
class SolverSettings:
    """Adam settings for the per-patch energy minimization."""

    lr: float = 1e-2
    max_iters: int = 2000
    tol: float = 1e-6
    window: int = 20
    patch_batch: int = 64


@dataclass
class ReconProblem:
    """A recovery task: observation, operator, loss and solver choices.

    ``observation`` layout: patch-level problems carry exactly the operator's
    output shape; field-level problems append a trailing channel axis.
    """

    observation: np.ndarray
    operator: MeasurementOperator
    central_view_available: bool = True
    data_loss: str = "l2"
    tv_weight: float = 0.0
    central_init: str = "observation"  # or "zeros"
    stride: int = PATCH_SIZE
    solver: SolverSettings = field(default_factory=SolverSettings)
    noisy: bool = False
    copy_back: bool | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.data_loss not in LOSS_KINDS:
            raise ValueError(f"data_loss must be one of {LOSS_KINDS}")
        if self.tv_weight < 0.0:
            raise ValueError("tv_weight must be >= 0")
        if self.tv_weight > 0.0 and self.central_view_available:
            raise ValueError(
                "tv_weight applies to the optimized central view; it requires "
                "central_view_available=False"
            )
        if self.central_init not in ("observation", "zeros"):
            raise ValueError("central_init must be 'observation' or 'zeros'")


@dataclass
class BatchSolveResult:
    z: np.ndarray  # (P, latent_dim)
    central: np.ndarray  # (P, 25, 25)
    patches: np.ndarray  # (P, n, n, 25, 25)
    residuals: np.ndarray  # per-patch mean data-fit at the solution
    iterations: int
    trace: np.ndarray  # objective value per iteration


def _op_pixel_mask(op: MeasurementOperator) -> np.ndarray | None:
    if isinstance(op, PixelMaskedOperator):
        return op.pixel_mask
    return None


def base_operator(op: MeasurementOperator) -> MeasurementOperator:
    """Unwrap pixel-mask composition."""
    while isinstance(op, PixelMaskedOperator):
        op = op.base
    return op


def solve_patch_batch(
    model: CentralViewVAE,
    ops: Sequence[MeasurementOperator],
    observations: Sequence[np.ndarray],
    centrals: np.ndarray | None = None,
    *,
    loss_kind: str = "l2",
    optimize_central: bool = False,
    central_init: np.ndarray | None = None,
    tv_weight: float = 0.0,
    settings: SolverSettings | None = None,
    seed: int = 0,
) -> BatchSolveResult:
    """Jointly run Adam over the latent codes (and optionally the central
    patches) of a batch of independent patch subproblems."""
    settings = settings or SolverSettings()
    n_patches = len(ops)
    if len(observations) != n_patches:
        raise ValueError("one observation per operator required")
    model.eval()

    z = torch.tensor(
        sample_prior(n_patches, seed, model.config), requires_grad=True
    )
    if optimize_central:
        if central_init is None:
            raise ValueError("central_init required when optimizing the central view")
        central = torch.tensor(
            np.asarray(central_init, dtype=np.float32), requires_grad=True
        )
        params = [z, central]
    else:
        if centrals is None:
            raise ValueError("centrals required when the central view is known")
        central = torch.as_tensor(np.asarray(centrals, dtype=np.float32))
        params = [z]

    obs = [torch.as_tensor(np.asarray(o, dtype=np.float32)) for o in observations]
    masks = [_op_pixel_mask(op) for op in ops]
    optimizer = torch.optim.Adam(params, lr=settings.lr)
    trace: list[float] = []
    w = settings.window

    def objective() -> tuple[torch.Tensor, torch.Tensor]:
        patches = model.generate(z, central)
        terms = []
        for p in range(n_patches):
            pred = ops[p].apply(patches[p])
            terms.append(data_loss(loss_kind, obs[p], pred, masks[p]))
        stacked = torch.stack(terms)
        total = stacked.sum()
        if optimize_central and tv_weight > 0.0:
            total = total + tv_weight * _tv_batch(central)
        return total, stacked

    iterations = 0
    for it in range(settings.max_iters):
        total, _ = objective()
        if not torch.isfinite(total):
            raise NumericError(f"objective became non-finite at iteration {it}")
        trace.append(float(total.detach()))
        optimizer.zero_grad()
        total.backward()
        optimizer.step()
        iterations = it + 1
        if len(trace) >= 2 * w:
            prev = float(np.mean(trace[-2 * w : -w]))
            cur = float(np.mean(trace[-w:]))
            if prev > 0.0 and abs(prev - cur) / prev <= settings.tol:
                break

    with torch.no_grad():
        patches = model.generate(z, central)
        residuals = np.array(
            [
                float(data_loss(loss_kind, obs[p], ops[p].apply(patches[p]), masks[p]))
                for p in range(n_patches)
            ]
        )
    return BatchSolveResult(
        z=z.detach().numpy().copy(),
        central=central.detach().numpy().copy(),
        patches=patches.numpy().copy(),
        residuals=residuals,
        iterations=iterations,
        trace=np.asarray(trace),
    )


def solve_latent(
    problem: ReconProblem,
    model: CentralViewVAE,
    central_patch: np.ndarray,
    seed: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Recover one patch's latent code given its (known) central patch.

    Returns the minimizing code and the generated patch.
    """
    result = solve_patch_batch(
        model,
        [problem.operator],
        [problem.observation],
        centrals=np.asarray(central_patch, dtype=np.float32)[None],
        loss_kind=problem.data_loss,
        settings=problem.solver,
        seed=problem.seed if seed is None else seed,
    )
    return result.z[0], result.patches[0]


def solve_latent_cv(
    problem: ReconProblem,
    model: CentralViewVAE,
    init_central: np.ndarray,
    seed: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Jointly recover one patch's latent code and its central patch.

    Returns (code, central patch, generated patch).
    """
    result = solve_patch_batch(
        model,
        [problem.operator],
        [problem.observation],
        optimize_central=True,
        central_init=np.asarray(init_central, dtype=np.float32)[None],
        tv_weight=problem.tv_weight,
        loss_kind=problem.data_loss,
        settings=problem.solver,
        seed=problem.seed if seed is None else seed,
    )
    return result.z[0], result.central[0], result.patches[0]


@dataclass
class ReconResult:
    lightfield: LightField
    residuals: np.ndarray  # (channels, patches)
    iterations: list[int]
    wall_seconds: float


def observe(op: MeasurementOperator, lf: LightField) -> np.ndarray:
    """Apply an operator to every channel; returns channel-last observations."""
    return np.stack([np.asarray(op.apply(lf.channel(c))) for c in range(lf.channels)], axis=-1)


def _central_image(op: MeasurementOperator, obs_channel: np.ndarray) -> np.ndarray | None:
    base = base_operator(op)
    if isinstance(base, ViewMaskOperator):
        n = base.in_shape[0]
        return np.asarray(obs_channel[n // 2, n // 2])
    if isinstance(base, SpatialAngularOperator):
        n = base.in_shape[0]
        return np.asarray(base.extract_view(obs_channel, n // 2, n // 2))
    return None


def _default_copy_back(problem: ReconProblem) -> bool:
    if problem.noisy or problem.data_loss != "l2" or problem.tv_weight > 0.0:
        return False
    if isinstance(problem.operator, PixelMaskedOperator):
        return False
    return True


def _init_central_patches(
    op_base: MeasurementOperator,
    patch_obs: np.ndarray,
    strategy: str,
) -> np.ndarray:
    if strategy == "zeros":
        return np.zeros((PATCH_SIZE, PATCH_SIZE), dtype=np.float32)
    if isinstance(op_base, CodedApertureOperator):
        return np.clip(patch_obs[0], 0.0, 1.0).astype(np.float32)
    if isinstance(op_base, ViewMaskOperator):
        n = op_base.in_shape[0]
        return np.asarray(patch_obs[n // 2, n // 2], dtype=np.float32)
    raise ValueError(
        "no observation-based central initialization for operator kind "
        f"{op_base.kind}; use central_init='zeros'"
    )


def reconstruct(
    problem: ReconProblem,
    model: CentralViewVAE,
    lf_shape: tuple[int, int, int, int, int],
) -> ReconResult:
    """Recover a full light field patch-by-patch.

    Channels are solved independently; per-channel patches are stitched with
    overlap averaging at the problem's stride; when the observation is clean,
    fully observed views are copied back verbatim.
    """
    n_row, n_col, height, width, channels = lf_shape
    if problem.operator.in_shape != (n_row, n_col, height, width):
        raise ValueError(
            f"operator input {problem.operator.in_shape} does not match "
            f"field shape {lf_shape}"
        )
    expected_obs = problem.operator.out_shape + (channels,)
    if tuple(problem.observation.shape) != expected_obs:
        raise ValueError(
            f"observation shape {problem.observation.shape} does not match "
            f"operator output {expected_obs}"
        )
    t0 = time.time()
    grid = build_grid(n_row, height, width, problem.stride)
    origins = grid.origins
    n_patches = len(origins)
    restricted = [problem.operator.restrict(oy, ox, PATCH_SIZE) for oy, ox in origins]

    out = np.zeros((n_row, n_col, height, width, channels), dtype=np.float32)
    residuals = np.zeros((channels, n_patches))
    iteration_counts: list[int] = []

    for ch in range(channels):
        obs_ch = problem.observation[..., ch]
        central_image = _central_image(problem.operator, obs_ch)
        patch_ops = [op for op, _ in restricted]
        patch_obs = [np.asarray(extract(obs_ch)) for _, extract in restricted]
        solved = np.empty((n_patches, n_row, n_col, PATCH_SIZE, PATCH_SIZE), np.float32)

        for lo in range(0, n_patches, problem.solver.patch_batch):
            hi = min(lo + problem.solver.patch_batch, n_patches)
            # channel-independent seed keeps channel permutation equivariant
            chunk_seed = problem.seed + lo
            if problem.central_view_available:
                if central_image is None:
                    raise ValueError(
                        f"operator kind {problem.operator.kind} does not expose "
                        "a central view; set central_view_available=False"
                    )
                centrals = np.stack(
                    [
                        central_image[oy : oy + PATCH_SIZE, ox : ox + PATCH_SIZE]
                        for oy, ox in origins[lo:hi]
                    ]
                )
                result = solve_patch_batch(
                    model,
                    patch_ops[lo:hi],
                    patch_obs[lo:hi],
                    centrals=centrals,
                    loss_kind=problem.data_loss,
                    settings=problem.solver,
                    seed=chunk_seed,
                )
            else:
                base = base_operator(problem.operator)
                init = np.stack(
                    [
                        _init_central_patches(
                            base_operator(patch_ops[p]),
                            patch_obs[p],
                            problem.central_init,
                        )
                        for p in range(lo, hi)
                    ]
                )
                result = solve_patch_batch(
                    model,
                    patch_ops[lo:hi],
                    patch_obs[lo:hi],
                    optimize_central=True,
                    central_init=init,
                    tv_weight=problem.tv_weight,
                    loss_kind=problem.data_loss,
                    settings=problem.solver,
                    seed=chunk_seed,
                )
            solved[lo:hi] = result.patches
            residuals[ch, lo:hi] = result.residuals
            iteration_counts.append(result.iterations)

        stitched = stitch_patches(np.clip(solved, 0.0, 1.0), grid)
        out[..., ch] = stitched.channel(0)

    copy_back = (
        problem.copy_back
        if problem.copy_back is not None
        else _default_copy_back(problem)
    )
    if copy_back:
        base = base_operator(problem.operator)
        for ch in range(channels):
            obs_ch = problem.observation[..., ch]
            if isinstance(base, ViewMaskOperator):
                for r, c in base.mask.known_views:
                    out[r, c, :, :, ch] = np.clip(obs_ch[r, c], 0.0, 1.0)
            elif isinstance(base, SpatialAngularOperator):
                central = _central_image(problem.operator, obs_ch)
                out[n_row // 2, n_col // 2, :, :, ch] = np.clip(central, 0.0, 1.0)

    field = LightField.from_array(out, clamp=True)
    return ReconResult(
        lightfield=field,
        residuals=residuals,
        iterations=iteration_counts,
        wall_seconds=time.time() - t0,
    )

"""Light-field reconstruction with a central-view-conditioned generative
patch prior: data model, linear measurement operators, the patch autoencoder,
training, latent-space recovery, and evaluation."""

from .corruption import CorruptionSpec, corrupt
from .errors import ConfigError, DataError, NumericError
from .io import load_lightfield, save_lightfield
from .lightfield import LightField, spatial_downscale, to_grayscale
from .model import (
    CVAEConfig,
    CentralViewVAE,
    load_weights,
    loss_batch,
    mmd,
    sample_prior,
    save_weights,
)
from .operators import (
    AngularMask,
    CodedMaskSet,
    DownsampleSpec,
    coded_aperture_op,
    spatial_angular_op,
    view_mask_op,
    with_pixel_mask,
)
from .patchdata import PatchStore, build_patch_dataset
from .patches import PatchGrid, extract_patches, stitch_patches
from .recon import (
    ReconProblem,
    ReconResult,
    SolverSettings,
    data_loss,
    observe,
    reconstruct,
    solve_latent,
    solve_latent_cv,
    tv,
)
from .training import TrainConfig, autoencode_eval, lr_at, train
from .evaluate import EvalRecord, emit_report, error_map, novel_view_psnr, psnr

__version__ = "0.1.0"

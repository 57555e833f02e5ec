from .exceptions import *
from .grid import (
    Field2D,
    GridSpec,
    PatchPair,
    coarsen,
    extract_patches,
    make_patch_pair,
    regrid,
    upsample_bicubic,
    upsample_bilinear,
)
from .synthetic import (
    Scene,
    StationObs,
    SynthConfig,
    gen_terrain,
    gen_truth_wind,
    generate_scene,
    make_biased_sim,
    sample_stations,
)
from .diffusion import (
    Conditioning,
    NoisePredictor,
    NoiseSchedule,
    NormStats,
    forward_sample,
    iterated_forward,
    make_linear_schedule,
    reverse_step,
    sample,
    training_loss,
)
from .denoiser import DenoiserModel, ModelConfig, TrainConfig, TrainResult, backward, forward, init_model, train
from .assimilation import (
    Composite,
    RadiusConfig,
    SoftMask,
    assimilated_downscale,
    blend,
    build_composite,
    build_soft_mask,
    dynamic_impact_radius,
    impact_radii,
    interpolate_observations,
)
from .metrics import (
    EvalReport,
    bias_reduction,
    cdf_quantiles,
    cdf_table,
    evaluate,
    mae_rmse,
    pearson,
    psnr,
    ssim,
    terrain_class,
)
from .profile import PowerLawParams, lift_stations, power_law
from .config import RunConfig
from .downscaler import AbstractDownscaler
from .engines.interp import InterpClient, InterpDownscaler
from .engines.diffusion import DiffusionClient, DiffusionDownscaler

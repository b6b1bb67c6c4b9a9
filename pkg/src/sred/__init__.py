"""Self-supervised restoration of consumer RGB-D depth streams: deterministic
target generation (registration + color-guided fast-marching inpainting), a
residual convolutional denoiser trained on dilated frame triples, synthetic
sensor noise, classical baselines, and evaluation metrics."""

from .errors import ConfigError, DataError, FormatError, SredError, TrainingDivergence
from .frames import (
    ColorFrame,
    DepthFrame,
    FrameSequence,
    NormalizedFrame,
    TrainingSample,
    TrainingWindow,
    denormalize,
    load_color_png,
    load_depth_png,
    load_manifest,
    normalize,
    save_color_png,
    save_depth_png,
    save_manifest,
    window_training_samples,
)
from .registration import (
    CameraRig,
    RegisteredColor,
    backproject,
    build_registered_color,
    fill_color_holes,
    load_rig,
    project_rgb,
    save_rig,
    to_rgb_camera,
)
from .inpaint import (
    DistanceMap,
    InpaintConfig,
    compute_distance_map,
    hole_mask,
    inpaint_classic,
    inpaint_guided,
    priority,
    weight,
)
from .noise import NoiseConfig, corrupt, estimate_normals
from .metrics import MetricReport, mse, nmid, psnr, ssim, temporal, temporal_signed
from .baselines import BilateralConfig, TVConfig, bilateral, fmm_bf, tv_denoise
from .model import (
    DepthDenoiser,
    InferenceEngine,
    NetworkConfig,
    build_model,
    filter_count,
    load_weights,
    parameter_count,
    save_weights,
    tune_allocator,
)
from .training import TrainConfig, infer, infer_single, infer_variant, make_target, train

__version__ = "0.1.0"

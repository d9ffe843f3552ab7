"""Kernel-regression image denoising via conditional expectation."""

from .bandwidth import BandwidthSelection, min_radius, select_bandwidth
from .imaging import (
    GrayscaleImage,
    NoiseKind,
    NoiseModel,
    add_noise,
    l2_error,
    read_image,
    sup_error,
    synth_cosine,
    synth_zero,
    write_image,
)
from .patches import blend, denoise_image, make_cover, pou_weight
from .pipeline import DenoiseConfig, build_operators, denoise_patch, noise_residual
from .solver import RidgeProblem, SolverPolicy, ridge_solve, spectral_norm

__version__ = "0.1.0"

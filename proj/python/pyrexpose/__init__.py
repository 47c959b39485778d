"""Exposure correction with a Laplacian-pyramid network.

Images are float32 arrays of shape (H, W, 3) with sRGB values in [0, 1].
"""

from ._core import (
    CheckpointError,
    ConfigError,
    Corrector,
    InvalidInput,
    IoError,
    apply_relative_ev,
    laplacian_collapse,
    laplacian_decompose,
    load_image,
    psnr,
    save_image,
    ssim,
    synthetic_scene,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "Corrector",
    "InvalidInput",
    "IoError",
    "apply_relative_ev",
    "laplacian_collapse",
    "laplacian_decompose",
    "load_image",
    "psnr",
    "save_image",
    "ssim",
    "synthetic_scene",
]

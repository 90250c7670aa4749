"""Single-image super-resolution with a residual dense network.

Pure numpy throughout: a minimal reverse-mode autodiff engine, the full
model graph with ablation switches, Adam training with binary checkpoints,
bicubic degradation, and PSNR/SSIM evaluation with CSV and figure reports.
"""

from .autodiff import Parameter, Tape, Tensor4, add, backward, concat_channels, conv2d, pixel_shuffle, relu
from .errors import (
    CheckpointError,
    CheckpointMismatchError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    ConfigError,
    DimensionError,
    NumericError,
    RdnError,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "Tensor4",
    "Parameter",
    "Tape",
    "conv2d",
    "relu",
    "concat_channels",
    "add",
    "pixel_shuffle",
    "backward",
    "RdnError",
    "DimensionError",
    "NumericError",
    "UsageError",
    "ConfigError",
    "CheckpointError",
    "CheckpointVersionError",
    "CheckpointTruncatedError",
    "CheckpointMismatchError",
    "__version__",
]

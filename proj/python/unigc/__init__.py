# SPDX-License-Identifier: Apache-2.0
"""UniGC graph convolution operators and the GCNext dynamic network."""

from ._core import (
    KINDS,
    ConfigError,
    Error,
    FormatError,
    IoError,
    Model,
    ShapeError,
    block_shape,
    build_mask,
    conv_factored,
    expand_to_global,
    flops_conv,
    gen_synthetic,
    mpjpe,
    mpjpe_per_frame,
    param_count,
    unigc_general,
    unigc_masked,
    verify,
    zero_velocity,
)

__all__ = [
    "KINDS",
    "ConfigError",
    "Error",
    "FormatError",
    "IoError",
    "Model",
    "ShapeError",
    "block_shape",
    "build_mask",
    "conv_factored",
    "expand_to_global",
    "flops_conv",
    "gen_synthetic",
    "mpjpe",
    "mpjpe_per_frame",
    "param_count",
    "unigc_general",
    "unigc_masked",
    "verify",
    "zero_velocity",
]

"""Slice-based convolutional dictionary learning."""

from ._slicedict import (
    __version__,
    enhance,
    init_dictionary,
    inpaint,
    lasso_solve,
    preprocess,
    psnr,
    read_dictionary,
    run_cli,
    separate,
    srgb_to_lab,
    train,
    tv_denoise,
    write_dictionary,
)

__all__ = [
    "enhance",
    "init_dictionary",
    "inpaint",
    "lasso_solve",
    "preprocess",
    "psnr",
    "read_dictionary",
    "run_cli",
    "separate",
    "srgb_to_lab",
    "train",
    "tv_denoise",
    "write_dictionary",
]

"""LoG particle detection with a stacked denoising autoencoder filter."""

from ._goldspot import (
    DimensionError,
    Error,
    FormatError,
    InvalidArgument,
    IoError,
    Model,
    accuracy,
    detect,
    downscale_half,
    extract_patches,
    f_measure,
    label_patches,
    load_image,
    log_response,
    match,
    precision_recall,
    save_image,
    synth,
    train,
    transfer,
)

__all__ = [
    "DimensionError",
    "Error",
    "FormatError",
    "InvalidArgument",
    "IoError",
    "Model",
    "accuracy",
    "detect",
    "downscale_half",
    "extract_patches",
    "f_measure",
    "label_patches",
    "load_image",
    "log_response",
    "match",
    "precision_recall",
    "save_image",
    "synth",
    "train",
    "transfer",
]

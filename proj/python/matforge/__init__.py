"""Material classification engine: CNN layers, architectures, training, intrinsics, analysis."""

from ._core import (
    ConfigError,
    IoError,
    StateError,
    TrainingError,
    adagrad_step,
    branched_spec,
    confusion,
    conv2d,
    decompose,
    deep_spec,
    fc,
    forward,
    gaussian_blur,
    infer_shapes,
    lm_bank,
    lr_at,
    lrn,
    maxpool,
    patch_features,
    pca_fit,
    pca_project,
    relu,
    select_input,
    softmax,
    softmax_loss,
    train,
    vanilla_spec,
)

__all__ = [
    "ConfigError",
    "IoError",
    "StateError",
    "TrainingError",
    "adagrad_step",
    "branched_spec",
    "confusion",
    "conv2d",
    "decompose",
    "deep_spec",
    "fc",
    "forward",
    "gaussian_blur",
    "infer_shapes",
    "lm_bank",
    "lr_at",
    "lrn",
    "maxpool",
    "patch_features",
    "pca_fit",
    "pca_project",
    "relu",
    "select_input",
    "softmax",
    "softmax_loss",
    "train",
    "vanilla_spec",
]

"""Brain-MRI slice classification with Grad-CAM, LRP and SHAP explanations.

The pipeline functions mirror the ``tumorscope`` command-line subcommands
and read/write the same on-disk formats. Config overrides are dicts with the
run-config sections (data, model, train, explain, render, eval).
"""

from ._core import (
    ConfigError,
    Error,
    Model,
    NiftiError,
    ShapeError,
    evaluate,
    evaluate_scores,
    explain,
    grad_cam,
    kernel_shap,
    lrp,
    preprocess,
    prf1,
    read_nifti,
    read_ppm,
    read_slice,
    report,
    roc_auc,
    shape_trace,
    synth,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Error",
    "Model",
    "NiftiError",
    "ShapeError",
    "evaluate",
    "evaluate_scores",
    "explain",
    "grad_cam",
    "kernel_shap",
    "lrp",
    "preprocess",
    "prf1",
    "read_nifti",
    "read_ppm",
    "read_slice",
    "report",
    "roc_auc",
    "shape_trace",
    "synth",
    "train",
]

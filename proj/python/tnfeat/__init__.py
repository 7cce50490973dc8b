"""Tensor-decomposition image features, cross-validated forests and cost model."""

from ._tnfeat import (
    TnfeatError,
    compute_metrics,
    cost_cp_als,
    cp_als,
    fit_score,
    fold,
    grayscale,
    khatri_rao,
    preprocess,
    preprocess_file,
    read_fmx1,
    reconstruct,
    run,
    unfold,
)

__all__ = [
    "TnfeatError",
    "compute_metrics",
    "cost_cp_als",
    "cp_als",
    "fit_score",
    "fold",
    "grayscale",
    "khatri_rao",
    "preprocess",
    "preprocess_file",
    "read_fmx1",
    "reconstruct",
    "run",
    "unfold",
]

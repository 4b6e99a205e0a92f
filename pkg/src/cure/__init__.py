"""Clustering via uncoupled regression.

Learn an affine embedding that sends two-component elliptical-mixture data to
a one-dimensional point cloud concentrating around -1 and 1, by minimizing a
clipped double-well loss with perturbed gradient descent.  Ships the
numerical machinery to verify the landscape and estimation-rate predictions
at desk scale.
"""

from .loss import DerivBounds, LossSpec, derivative_bounds, eval_f, eval_h
from .mixture import (
    Dataset,
    MixtureParams,
    NoiseLaw,
    bayes_classifier,
    gaussian_radial,
    load_csv,
    make_two_point_radial,
    sample,
    save_csv,
)
from .objective import EmpiricalObjective, Gamma, PopulationQuartic
from .pgd import PgdConfig, PgdTrace, default_config, practical_config, run, run_objective

__all__ = [
    "LossSpec",
    "DerivBounds",
    "derivative_bounds",
    "eval_f",
    "eval_h",
    "Dataset",
    "MixtureParams",
    "NoiseLaw",
    "bayes_classifier",
    "gaussian_radial",
    "load_csv",
    "make_two_point_radial",
    "sample",
    "save_csv",
    "EmpiricalObjective",
    "Gamma",
    "PopulationQuartic",
    "PgdConfig",
    "PgdTrace",
    "default_config",
    "practical_config",
    "run",
    "run_objective",
]

__version__ = "0.1.0"

"""Density estimation with tree and histogram base measures under coupling flows."""

from . import autodiff, special
from .baselines import FixedPrior, LearnableHistogram
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import Dataset, load_delimited, synth
from .distributions import BetaDist, DiagGaussian, LogisticDist, beta_kl, gaussian_kl
from .flow import CouplingLayer, DensityEstimator, FlowModel, ScalingLayer, SigmoidLayer, build_flow
from .polya_tree import PolyaTreeModel, intervals_from_splits, param_count
from .train import (
    Adam,
    TrainConfig,
    TrainReport,
    avg_log_likelihood,
    bits_per_dim,
    build_estimator,
    density_grid,
    sse_calibration,
    train,
)

__all__ = [
    "Adam",
    "BetaDist",
    "Checkpoint",
    "CouplingLayer",
    "Dataset",
    "DensityEstimator",
    "DiagGaussian",
    "FixedPrior",
    "FlowModel",
    "LearnableHistogram",
    "LogisticDist",
    "PolyaTreeModel",
    "ScalingLayer",
    "SigmoidLayer",
    "TrainConfig",
    "TrainReport",
    "autodiff",
    "avg_log_likelihood",
    "beta_kl",
    "bits_per_dim",
    "build_estimator",
    "build_flow",
    "density_grid",
    "gaussian_kl",
    "intervals_from_splits",
    "load_checkpoint",
    "load_delimited",
    "param_count",
    "save_checkpoint",
    "special",
    "sse_calibration",
    "synth",
    "train",
]

__version__ = "0.1.0"

"""Differentially private estimation of smooth optimal transport maps on grids."""

from ._backend import BACKEND
from .candidates import (AttractionRepulsionParams, CandidateFamily, PotentialPrior, generate_family,
                         sample_from_prior)
from .dp import PrivacyBudget, SeededRng, report_noisy_argmin, verify_dp_ratio
from .estimator import FitConfig, FitResult, fit_nonprivate, fit_private, transport_map_of
from .models import ExperimentModel, generate_dataset
from .grid import GridPotential, GridSpec, GridVectorField, make_uniform_grid
from .semidual import ClipConfig, Dataset, make_dataset

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AttractionRepulsionParams", "CandidateFamily", "PotentialPrior", "generate_family",
    "PrivacyBudget", "SeededRng", "report_noisy_argmin", "verify_dp_ratio", "FitConfig", "FitResult",
    "fit_nonprivate", "fit_private", "transport_map_of", "GridPotential", "GridSpec", "GridVectorField",
    "make_uniform_grid", "ClipConfig", "Dataset", "make_dataset", "sample_from_prior", "ExperimentModel",
    "generate_dataset",
]

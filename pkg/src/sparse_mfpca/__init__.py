"""Sparse multivariate functional principal component analysis."""

from .benchmark import BenchmarkReport, run_benchmark
from .data import SparseDataset
from .estimators import MultivariateFPCA, UnivariateFPCA
from .exceptions import (
    BenchmarkFailedError,
    DataFormatError,
    DomainError,
    FPCAError,
    NumericalError,
    OptimizerStalledError,
)
from .grid_basis import build_grid, eval_basis
from .mfpca import combine, elbow_select
from .simulation import ScenarioConfig, generate, scenario
from .ufpca import fit, select_model

__version__ = "0.1.0"

__all__ = [
    "BenchmarkFailedError",
    "BenchmarkReport",
    "DataFormatError",
    "DomainError",
    "FPCAError",
    "MultivariateFPCA",
    "NumericalError",
    "OptimizerStalledError",
    "ScenarioConfig",
    "SparseDataset",
    "UnivariateFPCA",
    "build_grid",
    "combine",
    "elbow_select",
    "eval_basis",
    "fit",
    "generate",
    "run_benchmark",
    "scenario",
    "select_model",
]

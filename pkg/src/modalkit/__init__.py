"""modalkit: estimation of weighted sums of complex exponentials from noisy
samples.

Two estimators are provided: a pencil grid search with BIC order selection
(``baseline``), and an automatic method that locates eigenvalue density
regions and clusters stochastically perturbed pencil solutions (``perturb``).
A Monte Carlo harness (``bench``) compares them.
"""

from .model import (
    Hyperparameters,
    ModalModel,
    RealModalParams,
    SignalSamples,
    add_noise,
    real_to_complex,
    snr,
    synthesize,
)
from .pencil import PencilSolution, build_data_matrix, cadzow, ceip_square, gpof, weights_ls
from .density import DensityGrid, Lattice, RegionSet, condensed_density, extract_regions
from .perturb import EstimationReport, estimate
from .baseline import bic_score, gpof_grid_search, mse_aggregate, relative_error
from .bench import BenchConfig, default_config, run_bench

__version__ = "0.1.0"

__all__ = [
    "Hyperparameters",
    "ModalModel",
    "RealModalParams",
    "SignalSamples",
    "add_noise",
    "real_to_complex",
    "snr",
    "synthesize",
    "PencilSolution",
    "build_data_matrix",
    "cadzow",
    "ceip_square",
    "gpof",
    "weights_ls",
    "DensityGrid",
    "Lattice",
    "RegionSet",
    "condensed_density",
    "extract_regions",
    "EstimationReport",
    "estimate",
    "bic_score",
    "gpof_grid_search",
    "mse_aggregate",
    "relative_error",
    "BenchConfig",
    "default_config",
    "run_bench",
    "__version__",
]

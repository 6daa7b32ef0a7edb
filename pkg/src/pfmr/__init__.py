"""Parsimonious finite mixtures of multivariate Gaussian regressions, with
static (eFMR) or concomitant-logit (eFMRC) mixing weights and the 14
eigen-decomposed covariance structures."""

from .core import (
    STRUCTURES,
    ComponentParams,
    ConcomitantWeights,
    CovarianceStructure,
    Dataset,
    DegeneracyError,
    Family,
    FitResult,
    MixtureModel,
    NoModelError,
    NumericError,
    PfmrError,
    StaticWeights,
    bic,
    n_free_params,
)
from .covariance import ScatterInput, constraint_check, estimate_sigma
from .em import EmConfig, aitken_stop, e_step, fit, log_likelihood
from .evaluation import adjusted_rand, confusion, rand_index
from .io import load_csv
from .kernels import BACKEND
from .selection import SearchSpec, SelectionReport, kmeans_init, random_init, search
from .simulation import SimScenario, generate, replicate_study

__version__ = "0.1.0"

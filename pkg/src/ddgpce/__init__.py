"""Dimensionally decomposed GPCE surrogates for VaR and CVaR estimation."""

from .archive import load as load_archive
from .archive import save as save_archive
from .bifidelity import (
    BiFidelitySurrogate,
    BudgetModel,
    FourierLink,
    build_link_basis,
    check_budget,
    evaluate_bifi,
    fit_link,
    run_algorithm2,
    run_bifidelity,
)
from .distributions import Marginal, RandomInputModel, SampleBatch, empirical_moments, sample
from .errors import (
    ConfigError,
    DdgpceError,
    ModelEvaluationError,
    NumericalError,
)
from .multiindex import (
    MultiIndexSet,
    cardinality_full,
    cardinality_reduced,
    generate_full,
    generate_reduced,
)
from .orthopoly import OrthonormalBasis, build_basis, estimate_moment_matrix, eval_basis, whiten
from .risk import RiskEstimate, mrd, var_cvar, var_cvar_surrogate
from .surrogate import DdGpceSurrogate, ExperimentalDesign, fit_sls, fit_surrogate

__version__ = "0.1.0"

__all__ = [
    "BiFidelitySurrogate", "BudgetModel", "ConfigError", "DdGpceSurrogate", "DdgpceError",
    "ExperimentalDesign", "FourierLink", "Marginal", "ModelEvaluationError", "MultiIndexSet",
    "NumericalError", "OrthonormalBasis", "RandomInputModel", "RiskEstimate", "SampleBatch",
    "build_basis", "build_link_basis", "cardinality_full", "cardinality_reduced", "check_budget",
    "empirical_moments", "estimate_moment_matrix", "eval_basis", "evaluate_bifi", "fit_link",
    "fit_sls", "fit_surrogate", "generate_full", "generate_reduced", "load_archive", "mrd",
    "run_algorithm2", "run_bifidelity", "sample", "save_archive", "var_cvar", "var_cvar_surrogate",
    "whiten",
]

"""Logistic regression for sparse bipartite dyadic data.

Composite-likelihood fitting for an i-buys-j edge array, sandwich
covariance estimation that stays valid under dyadic dependence (and under
its absence), aggregate / average partial effects with standard errors,
and a seeded Monte Carlo harness for validating the inference recipes at
desk scale.
"""

from .design import DyadDesign, SummaryStats, Theta
from .effects import AggregateEffect, ApeResult, aggregate_effect, average_partial_effect
from .errors import (ConfigError, DataError, DyadLogitError, InputError, McRunError,
                     NotConvergedError, SeparationError, SingularHessianError)
from .estimator import FitOptions, FitResult, fit, predict
from .features import AttributeTable, FeatureMap, FeatureSpec, build_features
from .mc import McReport, run_mc
from .model import composite_loglik, gamma_limit, hessian, logit, score
from .simulator import (ComponentEstimates, DiscreteSpec, GraphonConfig, LatentRecord,
                        aggregate_limit, oracle_components, score_variance_reconstruction,
                        simulate_graph, z_distribution)
from .variance import (MODES, VarianceComponents, VarianceReport, sandwich,
                       variance_components, vcov_alpha_scale)

__version__ = "0.1.0"

__all__ = [
    "AggregateEffect", "ApeResult", "AttributeTable", "ComponentEstimates",
    "ConfigError", "DataError", "DiscreteSpec", "DyadDesign", "DyadLogitError",
    "FeatureMap", "FeatureSpec", "FitOptions", "FitResult", "GraphonConfig",
    "InputError", "LatentRecord", "McReport", "McRunError", "MODES",
    "NotConvergedError", "SeparationError", "SingularHessianError", "SummaryStats",
    "Theta", "VarianceComponents", "VarianceReport", "aggregate_effect",
    "aggregate_limit", "average_partial_effect", "build_features",
    "composite_loglik", "fit", "gamma_limit", "hessian", "logit",
    "oracle_components", "predict", "run_mc", "sandwich", "score",
    "score_variance_reconstruction", "simulate_graph", "variance_components",
    "vcov_alpha_scale", "z_distribution",
]

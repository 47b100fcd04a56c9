"""Reference DGP presets shared by the test suite and the example configs.

The dependent preset uses strictly positive feature values so every entry
of the score variance matrix is bounded away from zero, which keeps
entrywise relative comparisons meaningful.
"""

from __future__ import annotations

from .features import FeatureMap, FeatureSpec
from .simulator import DiscreteSpec, GraphonConfig

DEFAULT_MASTER_SEED = 20260810


def dependent_config(rho: float = 0.5) -> GraphonConfig:
    """Two features (numeric product interaction, categorical match) with
    latent loadings rho on both sides; rho=0 gives the degenerate case."""
    feature_map = FeatureMap((
        FeatureSpec("wx", "product", "w", "x"),
        FeatureSpec("match", "equality_indicator", "g", "h"),
    ))
    return GraphonConfig(
        alpha0=3.0, beta0=(0.4, 0.6), phi=0.4,
        consumer_attrs=(DiscreteSpec("w", (0.5, 1.5), (0.5, 0.5)),
                        DiscreteSpec("g", ("a", "b"), (0.5, 0.5))),
        product_attrs=(DiscreteSpec("x", (0.5, 1.5), (0.5, 0.5)),
                       DiscreteSpec("h", ("a", "b"), (0.5, 0.5))),
        feature_map=feature_map, rho_a=rho, rho_b=rho)


def degenerate_config() -> GraphonConfig:
    return dependent_config(rho=0.0)


def dependent_x_query() -> dict:
    """A product attribute query compatible with the dependent preset."""
    return {"x": 1.5, "h": "a"}


def aggregate_config(alpha0: float = 10.0) -> GraphonConfig:
    """Single numeric feature with beta0 = 0: the aggregate-effect limit is
    (1 - phi) * alpha0 exactly.  alpha0 is high enough that the finite-n
    gap of the target is visible against the sampling noise."""
    feature_map = FeatureMap((FeatureSpec("wx", "product", "w", "x"),))
    return GraphonConfig(
        alpha0=alpha0, beta0=(0.0,), phi=0.4,
        consumer_attrs=(DiscreteSpec("w", (0.5, 1.5), (0.5, 0.5)),),
        product_attrs=(DiscreteSpec("x", (0.5, 1.5), (0.5, 0.5)),),
        feature_map=feature_map, rho_a=0.0, rho_b=0.0)


def aggregate_x_query() -> dict:
    return {"x": 1.0}


def lemma_config(alpha0: float = 2.0) -> GraphonConfig:
    """Low-variance preset for rescaled-information convergence checks: the
    narrow attribute support keeps attribute-sampling noise small relative
    to the O(1/n) gap between -n H_n and its limit, so the shrinking trend
    is visible with a couple hundred replications."""
    feature_map = FeatureMap((FeatureSpec("wx", "product", "w", "x"),))
    return GraphonConfig(
        alpha0=alpha0, beta0=(0.5,), phi=0.4,
        consumer_attrs=(DiscreteSpec("w", (0.98, 1.02), (0.5, 0.5)),),
        product_attrs=(DiscreteSpec("x", (0.98, 1.02), (0.5, 0.5)),),
        feature_map=feature_map, rho_a=0.0, rho_b=0.0)

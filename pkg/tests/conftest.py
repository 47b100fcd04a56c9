import numpy as np
import pytest

from dyadlogit import AttributeTable, DyadDesign, FeatureMap, FeatureSpec


def make_table(prefix, **cols):
    n = len(next(iter(cols.values())))
    return AttributeTable([f"{prefix}{k}" for k in range(n)],
                          {name: np.asarray(vals) for name, vals in cols.items()})


def product_feature_map():
    return FeatureMap((FeatureSpec("wx", "product", "w", "x"),))


def intercept_only_design(n_consumers, n_products, edges):
    consumers = make_table("c", w=np.zeros(n_consumers))
    products = make_table("p", x=np.zeros(n_products))
    return DyadDesign(consumers, products, FeatureMap(()), edges)


def random_design(rng, n_consumers=None, n_products=None, d=None, density=0.35,
                  max_side=8, max_d=3):
    """Small random design with numeric attributes and product-transform
    features per coordinate; used by brute-force comparisons."""
    N = int(n_consumers if n_consumers is not None else rng.integers(2, max_side + 1))
    M = int(n_products if n_products is not None else rng.integers(2, max_side + 1))
    d = int(d if d is not None else rng.integers(1, max_d + 1))
    cons_cols = {f"w{k}": rng.normal(size=N).round(3) for k in range(d)}
    prod_cols = {f"x{k}": rng.normal(size=M).round(3) for k in range(d)}
    specs = tuple(FeatureSpec(f"z{k}", "product", f"w{k}", f"x{k}") for k in range(d))
    mask = rng.random((N, M)) < density
    edges = np.argwhere(mask)
    consumers = make_table("c", **cons_cols)
    products = make_table("p", **prod_cols)
    return DyadDesign(consumers, products, FeatureMap(specs), edges)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)

import numpy as np
import pytest

from dyadlogit import (AttributeTable, ConfigError, FeatureMap, FeatureSpec,
                       InputError, build_features)

from conftest import make_table


@pytest.fixture
def tables():
    consumers = make_table("c", w=np.array([2.0, 1.0]), g=np.array(["rock", "jazz"]))
    products = make_table("p", x=np.array([3.0, 1.0]), g=np.array(["rock", "folk"]))
    return consumers, products


def test_product_transform(tables):
    fm = FeatureMap((FeatureSpec("wx", "product", "w", "x"),))
    assert build_features(*tables, fm, 0, 0) == pytest.approx([6.0])


def test_abs_diff_symmetry_case(tables):
    fm = FeatureMap((FeatureSpec("d", "abs_diff", "w", "x"),))
    assert build_features(*tables, fm, 1, 1) == pytest.approx([0.0])


def test_equality_indicator(tables):
    fm = FeatureMap((FeatureSpec("match", "equality_indicator", "g", "g"),))
    assert build_features(*tables, fm, 0, 0) == pytest.approx([1.0])
    assert build_features(*tables, fm, 0, 1) == pytest.approx([0.0])


def test_single_sided_transforms(tables):
    fm = FeatureMap((FeatureSpec("cw", "consumer_only", consumer_column="w"),
                     FeatureSpec("px", "product_only", product_column="x")))
    z = fm.block(*tables, np.array([0, 1]), np.array([0, 1]))
    assert z.shape == (2, 2, 2)
    assert np.array_equal(z[:, :, 0], [[2.0, 2.0], [1.0, 1.0]])
    assert np.array_equal(z[:, :, 1], [[3.0, 1.0], [3.0, 1.0]])


def test_output_dimension_matches_specs(tables):
    fm = FeatureMap((FeatureSpec("a", "product", "w", "x"),
                     FeatureSpec("b", "abs_diff", "w", "x"),
                     FeatureSpec("c", "equality_indicator", "g", "g")))
    assert fm.dim == 3
    assert build_features(*tables, fm, 0, 1).shape == (3,)


def test_deterministic(tables):
    fm = FeatureMap((FeatureSpec("wx", "product", "w", "x"),))
    first = fm.block(*tables, np.array([0, 1]), np.array([0, 1]))
    second = fm.block(*tables, np.array([0, 1]), np.array([0, 1]))
    assert np.array_equal(first, second)


def test_missing_column_is_config_error(tables):
    fm = FeatureMap((FeatureSpec("bad", "product", "nope", "x"),))
    with pytest.raises(ConfigError, match="nope"):
        build_features(*tables, fm, 0, 0)


def test_categorical_into_numeric_transform_is_input_error(tables):
    fm = FeatureMap((FeatureSpec("bad", "product", "g", "x"),))
    with pytest.raises(InputError, match="numeric"):
        build_features(*tables, fm, 0, 0)


def test_unknown_transform_rejected():
    with pytest.raises(ConfigError, match="transform"):
        FeatureSpec("bad", "outer", "w", "x")


def test_duplicate_feature_names_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        FeatureMap((FeatureSpec("z", "product", "w", "x"),
                    FeatureSpec("z", "abs_diff", "w", "x")))


def test_attribute_table_validation():
    with pytest.raises(InputError, match="duplicate"):
        AttributeTable(["a", "a"], {"w": np.array([1.0, 2.0])})
    with pytest.raises(InputError, match="entries"):
        AttributeTable(["a", "b"], {"w": np.array([1.0])})

"""Attribute tables and dyad feature construction.

A feature map turns a (consumer, product) attribute pair into a numeric
vector, one coordinate per declared feature.  All transforms are pure
functions of the two attribute rows, so feature blocks are deterministic
and safe to recompute on the fly instead of storing an all-dyads matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError

TRANSFORMS = ("product", "abs_diff", "equality_indicator", "consumer_only", "product_only")

# Transforms that require float-valued columns on the sides they touch.
_NUMERIC_CONSUMER = {"product", "abs_diff", "consumer_only"}
_NUMERIC_PRODUCT = {"product", "abs_diff", "product_only"}


class AttributeTable:
    """Columnar attribute table keyed by a string unit id.

    Columns are float64 arrays when every entry parses as a number,
    otherwise arrays of strings (categorical).
    """

    def __init__(self, ids: list[str], columns: dict[str, np.ndarray]):
        self.ids = list(ids)
        self.columns = {}
        n = len(self.ids)
        for name, col in columns.items():
            arr = np.asarray(col)
            if arr.shape != (n,):
                raise InputError(f"column {name!r} has {arr.shape[0] if arr.ndim else 0} "
                                 f"entries for {n} ids")
            if arr.dtype.kind in "fiub":
                arr = arr.astype(np.float64)
            else:
                arr = arr.astype(str)
            self.columns[name] = arr
        self._index = {u: k for k, u in enumerate(self.ids)}
        if len(self._index) != n:
            dupes = sorted({u for u in self.ids if self.ids.count(u) > 1})
            raise InputError(f"duplicate ids: {', '.join(dupes[:5])}")

    def __len__(self) -> int:
        return len(self.ids)

    def index_of(self, unit_id: str) -> int:
        try:
            return self._index[unit_id]
        except KeyError:
            raise KeyError(unit_id) from None

    def is_numeric(self, name: str) -> bool:
        return self.columns[name].dtype.kind == "f"

    def row(self, k: int) -> dict[str, object]:
        return {name: col[k] for name, col in self.columns.items()}


@dataclass(frozen=True)
class FeatureSpec:
    """One declared feature: a named transform of one consumer column and
    one product column (single-sided transforms use only their own side)."""

    name: str
    transform: str
    consumer_column: str | None = None
    product_column: str | None = None

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ConfigError(f"feature {self.name!r}: unknown transform {self.transform!r} "
                              f"(expected one of {', '.join(TRANSFORMS)})")
        needs_c = self.transform != "product_only"
        needs_p = self.transform != "consumer_only"
        if needs_c and not self.consumer_column:
            raise ConfigError(f"feature {self.name!r}: transform {self.transform!r} "
                              "requires consumer_column")
        if needs_p and not self.product_column:
            raise ConfigError(f"feature {self.name!r}: transform {self.transform!r} "
                              "requires product_column")


@dataclass(frozen=True)
class FeatureMap:
    """Ordered list of feature specs; output dimension == number of specs."""

    specs: tuple[FeatureSpec, ...]
    names: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        names = tuple(s.name for s in self.specs)
        if len(set(names)) != len(names):
            raise ConfigError("duplicate feature names in feature map")
        object.__setattr__(self, "names", names)

    @property
    def dim(self) -> int:
        return len(self.specs)

    def validate(self, consumer_attrs: AttributeTable, product_attrs: AttributeTable) -> None:
        """Check every referenced column exists and has the dtype its
        transform needs.  Raises ConfigError / InputError."""
        for s in self.specs:
            if s.transform != "product_only":
                if s.consumer_column not in consumer_attrs.columns:
                    raise ConfigError(f"feature {s.name!r}: consumer column "
                                      f"{s.consumer_column!r} not in consumer table")
                if s.transform in _NUMERIC_CONSUMER and not consumer_attrs.is_numeric(s.consumer_column):
                    raise InputError(f"feature {s.name!r}: transform {s.transform!r} needs a "
                                     f"numeric consumer column, {s.consumer_column!r} is categorical")
            if s.transform != "consumer_only":
                if s.product_column not in product_attrs.columns:
                    raise ConfigError(f"feature {s.name!r}: product column "
                                      f"{s.product_column!r} not in product table")
                if s.transform in _NUMERIC_PRODUCT and not product_attrs.is_numeric(s.product_column):
                    raise InputError(f"feature {s.name!r}: transform {s.transform!r} needs a "
                                     f"numeric product column, {s.product_column!r} is categorical")

    def block(self, consumer_attrs: AttributeTable, product_attrs: AttributeTable,
              i_idx: np.ndarray, j_idx: np.ndarray) -> np.ndarray:
        """Feature values for the cartesian block i_idx x j_idx.

        Returns a float64 array of shape (len(i_idx), len(j_idx), dim).
        """
        i_idx = np.asarray(i_idx, dtype=np.intp)
        j_idx = np.asarray(j_idx, dtype=np.intp)
        out = np.empty((i_idx.size, j_idx.size, self.dim), dtype=np.float64)
        for k, s in enumerate(self.specs):
            out[:, :, k] = _apply(s, consumer_attrs, product_attrs, i_idx, j_idx)
        return out

    def pair(self, consumer_attrs: AttributeTable, product_attrs: AttributeTable,
             i: int, j: int) -> np.ndarray:
        """Feature vector for a single (i, j) dyad."""
        return self.block(consumer_attrs, product_attrs,
                          np.array([i]), np.array([j]))[0, 0, :]


def _apply(spec: FeatureSpec, consumer_attrs: AttributeTable, product_attrs: AttributeTable,
           i_idx: np.ndarray, j_idx: np.ndarray) -> np.ndarray:
    if spec.transform == "consumer_only":
        w = consumer_attrs.columns[spec.consumer_column][i_idx]
        return np.broadcast_to(w[:, None], (i_idx.size, j_idx.size))
    if spec.transform == "product_only":
        x = product_attrs.columns[spec.product_column][j_idx]
        return np.broadcast_to(x[None, :], (i_idx.size, j_idx.size))
    w = consumer_attrs.columns[spec.consumer_column][i_idx]
    x = product_attrs.columns[spec.product_column][j_idx]
    if spec.transform == "product":
        return w[:, None] * x[None, :]
    if spec.transform == "abs_diff":
        return np.abs(w[:, None] - x[None, :])
    # equality_indicator works for numeric and categorical columns alike
    return (w[:, None] == x[None, :]).astype(np.float64)


def build_features(consumer_attrs: AttributeTable, product_attrs: AttributeTable,
                   feature_map: FeatureMap, i: int, j: int) -> np.ndarray:
    """Feature vector Z for one dyad; deterministic in the two attribute rows."""
    feature_map.validate(consumer_attrs, product_attrs)
    return feature_map.pair(consumer_attrs, product_attrs, i, j)

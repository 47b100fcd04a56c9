"""Observed bipartite data and the parameter point.

The design stores the sparse edge set plus the two attribute tables; the
dense all-dyads feature matrix is never materialized.  Reductions over all
N*M dyads stream feature blocks for fixed-size chunks of consumers, so
memory stays O(N + M + edges + chunk).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import InputError
from .features import AttributeTable, FeatureMap

# Target elements per streamed feature block; the implied row count is a
# deterministic function of (M, d) so chunked reductions are reproducible.
_BLOCK_TARGET_ELEMS = 4_194_304


def default_chunk_rows(n_products: int, feature_dim: int) -> int:
    return max(16, min(1024, _BLOCK_TARGET_ELEMS // max(1, n_products * feature_dim)))


@dataclass(frozen=True)
class SummaryStats:
    """Density and degree summaries of an observed design."""

    rho_hat: float
    lambda_c_hat: float   # average consumer degree, M * rho_hat
    lambda_p_hat: float   # average product degree, N * rho_hat
    phi_n: float          # M / (N + M)


@dataclass(frozen=True)
class Theta:
    """Parameter point (alpha, beta) tied to a network scale n = N + M.

    alpha is the sparsity-free intercept level; the induced logit intercept
    is alpha_n = ln(alpha / n), so alpha = n * exp(alpha_n) exactly.
    """

    alpha: float
    beta: np.ndarray
    n: int

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=np.float64)))
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise InputError(f"alpha must be positive and finite, got {self.alpha}")
        if self.n < 1:
            raise InputError(f"n must be a positive integer, got {self.n}")
        if self.beta.ndim != 1:
            raise InputError("beta must be a vector")

    @property
    def alpha_n(self) -> float:
        return math.log(self.alpha / self.n)

    @property
    def dim(self) -> int:
        """Length of the stacked coefficient vector (alpha_n, beta)."""
        return 1 + self.beta.size

    def stacked(self) -> np.ndarray:
        """Coefficient vector theta_n = (alpha_n, beta')' used by the kernel."""
        return np.concatenate(([self.alpha_n], self.beta))

    @classmethod
    def from_stacked(cls, theta_n: np.ndarray, n: int) -> "Theta":
        theta_n = np.asarray(theta_n, dtype=np.float64)
        return cls(alpha=n * math.exp(theta_n[0]), beta=theta_n[1:].copy(), n=n)


class DyadDesign:
    """Bipartite outcome data: edges Y_ij = 1, attribute tables, feature map."""

    def __init__(self, consumer_attrs: AttributeTable, product_attrs: AttributeTable,
                 feature_map: FeatureMap, edges: np.ndarray | list[tuple[int, int]],
                 cache_blocks: bool = False):
        self.consumer_attrs = consumer_attrs
        self.product_attrs = product_attrs
        self.feature_map = feature_map
        self.cache_blocks = cache_blocks
        feature_map.validate(consumer_attrs, product_attrs)

        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        N, M = len(consumer_attrs), len(product_attrs)
        if N == 0 or M == 0:
            raise InputError("both sides of the design must be nonempty")
        if edges.size:
            if edges.min() < 0 or edges[:, 0].max() >= N or edges[:, 1].max() >= M:
                raise InputError("edge index out of range")
        # Canonical order: lexicographic (i, j); duplicates are rejected.
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
        if edges.shape[0] > 1:
            same = np.all(edges[1:] == edges[:-1], axis=1)
            if same.any():
                k = int(np.flatnonzero(same)[0])
                raise InputError(f"duplicate edge ({edges[k, 0]}, {edges[k, 1]})")
        self.edge_i = edges[:, 0].copy()
        self.edge_j = edges[:, 1].copy()
        self._y = sparse.csr_matrix(
            (np.ones(edges.shape[0]), (self.edge_i, self.edge_j)), shape=(N, M))
        self._edge_z_cache: np.ndarray | None = None
        self._block_cache: list | None = None

    # -- shape ---------------------------------------------------------------

    @property
    def n_consumers(self) -> int:
        return len(self.consumer_attrs)

    @property
    def n_products(self) -> int:
        return len(self.product_attrs)

    @property
    def n_total(self) -> int:
        return self.n_consumers + self.n_products

    @property
    def n_edges(self) -> int:
        return self.edge_i.size

    @property
    def feature_dim(self) -> int:
        return self.feature_map.dim

    @property
    def rho_hat(self) -> float:
        return self.n_edges / (self.n_consumers * self.n_products)

    def summary(self) -> SummaryStats:
        rho = self.rho_hat
        return SummaryStats(rho_hat=rho,
                            lambda_c_hat=self.n_products * rho,
                            lambda_p_hat=self.n_consumers * rho,
                            phi_n=self.n_products / self.n_total)

    # -- streamed access -----------------------------------------------------

    def z_block(self, i_idx: np.ndarray, j_idx: np.ndarray) -> np.ndarray:
        return self.feature_map.block(self.consumer_attrs, self.product_attrs, i_idx, j_idx)

    def z_pair(self, i: int, j: int) -> np.ndarray:
        if not (0 <= i < self.n_consumers and 0 <= j < self.n_products):
            raise InputError(f"dyad index ({i}, {j}) out of range")
        return self.feature_map.pair(self.consumer_attrs, self.product_attrs, i, j)

    def y_pair(self, i: int, j: int) -> int:
        return int(self._y[i, j])

    def iter_row_blocks(self, chunk_rows: int | None = None):
        """Yield (i0, i1, Z, Y) for consumer chunks in index order.

        Z has shape (i1 - i0, M, d) and Y is the matching dense 0/1 block.
        With cache_blocks=True the default-chunk blocks are kept and replayed
        (worth it for repeated reductions on small simulated designs).
        """
        if chunk_rows is None:
            if self._block_cache is not None:
                yield from self._block_cache
                return
            chunk_rows = default_chunk_rows(self.n_products, self.feature_dim)
            if self.cache_blocks:
                self._block_cache = list(self._make_blocks(chunk_rows))
                yield from self._block_cache
                return
        yield from self._make_blocks(chunk_rows)

    def _make_blocks(self, chunk_rows: int):
        M = self.n_products
        j_all = np.arange(M)
        for i0 in range(0, self.n_consumers, chunk_rows):
            i1 = min(i0 + chunk_rows, self.n_consumers)
            Z = self.z_block(np.arange(i0, i1), j_all)
            Y = np.asarray(self._y[i0:i1, :].todense())
            yield i0, i1, Z, Y

    def edge_z(self) -> np.ndarray:
        """Feature vectors for the observed edges, shape (n_edges, d), in
        canonical edge order.  Cached: the design is immutable."""
        if self._edge_z_cache is None:
            d = self.feature_dim
            out = np.empty((self.n_edges, d), dtype=np.float64)
            for i0 in range(0, self.n_edges, 4096):
                i1 = min(i0 + 4096, self.n_edges)
                ii, jj = self.edge_i[i0:i1], self.edge_j[i0:i1]
                for k, s in enumerate(self.feature_map.specs):
                    out[i0:i1, k] = _edge_apply(s, self.consumer_attrs, self.product_attrs, ii, jj)
            self._edge_z_cache = out
        return self._edge_z_cache


def _edge_apply(spec, consumer_attrs, product_attrs, ii, jj):
    if spec.transform == "consumer_only":
        return consumer_attrs.columns[spec.consumer_column][ii]
    if spec.transform == "product_only":
        return product_attrs.columns[spec.product_column][jj]
    w = consumer_attrs.columns[spec.consumer_column][ii]
    x = product_attrs.columns[spec.product_column][jj]
    if spec.transform == "product":
        return w * x
    if spec.transform == "abs_diff":
        return np.abs(w - x)
    return (w == x).astype(np.float64)

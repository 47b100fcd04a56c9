"""Sparse exchangeable bipartite array generator and variance-component oracle.

The data generating process is a Gaussian-factor copula threshold:

    U_ij = StdNormalCdf(rho_a A_i + rho_b B_j + sqrt(1-rho_a^2-rho_b^2) eps_ij)
    Y_ij = 1{ U_ij <= p_ij },    p_ij = logit_inv(ln(alpha0/n) + Z_ij' beta0)

U_ij is uniform marginally, so the marginal purchase probability equals
p_ij exactly, while rho_a / rho_b dial in dependence across dyads sharing
a consumer / product.  rho_a = rho_b = 0 gives the degenerate (iid) case.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit, ndtr, ndtri

from .design import DyadDesign, Theta
from .errors import ConfigError, InputError
from .features import AttributeTable, FeatureMap

_GH_NODES = 32


@dataclass(frozen=True)
class DiscreteSpec:
    """Finite discrete distribution for one attribute column."""

    name: str
    values: tuple
    probs: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.values) != len(self.probs) or not self.values:
            raise ConfigError(f"attribute {self.name!r}: values/probs length mismatch")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-8:
            raise ConfigError(f"attribute {self.name!r}: probs must be nonnegative and sum to 1")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(len(self.values), size=size, p=np.asarray(self.probs))
        return np.asarray(self.values)[idx]


@dataclass(frozen=True)
class GraphonConfig:
    """DGP parameters: sparsity level alpha0, slopes beta0, side split phi,
    attribute distributions, and the dependence loadings."""

    alpha0: float
    beta0: tuple
    phi: float
    consumer_attrs: tuple[DiscreteSpec, ...]
    product_attrs: tuple[DiscreteSpec, ...]
    feature_map: FeatureMap
    rho_a: float = 0.0
    rho_b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta0", tuple(float(b) for b in self.beta0))
        object.__setattr__(self, "consumer_attrs", tuple(self.consumer_attrs))
        object.__setattr__(self, "product_attrs", tuple(self.product_attrs))
        if self.alpha0 <= 0:
            raise ConfigError("alpha0 must be positive")
        if not 0 < self.phi < 1:
            raise ConfigError("phi must be in (0, 1)")
        if self.rho_a < 0 or self.rho_b < 0 or self.rho_a**2 + self.rho_b**2 >= 1:
            raise ConfigError("need rho_a, rho_b >= 0 with rho_a^2 + rho_b^2 < 1")
        if len(self.beta0) != self.feature_map.dim:
            raise ConfigError("beta0 length does not match the feature map")

    @property
    def sigma_eps(self) -> float:
        return math.sqrt(1.0 - self.rho_a**2 - self.rho_b**2)

    def sizes(self, n: int) -> tuple[int, int]:
        """(N, M) with M = round(phi * n), N = n - M."""
        if n < 10:
            raise InputError("n must be at least 10")
        m = int(math.floor(self.phi * n + 0.5))
        if m < 1 or n - m < 1:
            raise InputError(f"phi={self.phi} leaves an empty side at n={n}")
        return n - m, m

    def theta0(self, n: int) -> Theta:
        return Theta(alpha=self.alpha0, beta=np.asarray(self.beta0), n=n)


@dataclass(frozen=True)
class LatentRecord:
    """Realized latent factors kept for oracle-only computations."""

    a: np.ndarray
    b: np.ndarray
    config: GraphonConfig
    n: int


def _attr_table(specs: tuple[DiscreteSpec, ...], rng: np.random.Generator,
                size: int, prefix: str) -> AttributeTable:
    ids = [f"{prefix}{k + 1:06d}" for k in range(size)]
    cols = {s.name: s.draw(rng, size) for s in specs}
    return AttributeTable(ids, cols)


def simulate_graph(config: GraphonConfig, n: int,
                   seed: int | np.random.SeedSequence) -> tuple[DyadDesign, LatentRecord]:
    """Draw one network of total size n = N + M.

    Draw order (fixed for reproducibility): consumer attribute columns in
    declaration order, product attribute columns, A, B, then eps row-major.
    The same seed yields a bit-identical design.
    """
    N, M = config.sizes(n)
    rng = np.random.default_rng(seed)
    consumers = _attr_table(config.consumer_attrs, rng, N, "c")
    products = _attr_table(config.product_attrs, rng, M, "p")
    a = rng.standard_normal(N)
    b = rng.standard_normal(M)
    eps = rng.standard_normal((N, M))

    beta0 = np.asarray(config.beta0)
    z = config.feature_map.block(consumers, products, np.arange(N), np.arange(M))
    p = expit(math.log(config.alpha0 / n) + z @ beta0)
    u = ndtr(config.rho_a * a[:, None] + config.rho_b * b[None, :] + config.sigma_eps * eps)
    ii, jj = np.nonzero(u <= p)
    design = DyadDesign(consumers, products, config.feature_map,
                        np.column_stack([ii, jj]), cache_blocks=True)
    return design, LatentRecord(a=a, b=b, config=config, n=n)


def bernoulli_from_uniforms(u: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Edge indicators 1{u <= p}; the degenerate DGP reduces to this."""
    return (u <= p).astype(np.int8)


@lru_cache(maxsize=None)
def _gauss_hermite(nodes: int = _GH_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for E[f(T)], T ~ N(0,1), via Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite.hermgauss(nodes)
    return x * math.sqrt(2.0), w / math.sqrt(math.pi)


def _support_table(specs: tuple[DiscreteSpec, ...], prefix: str) -> tuple[AttributeTable, np.ndarray]:
    """All joint support rows of the given attribute columns with weights."""
    combos = list(itertools.product(*(range(len(s.values)) for s in specs)))
    wts = np.array([math.prod(s.probs[c[k]] for k, s in enumerate(specs)) for c in combos])
    cols = {s.name: np.array([s.values[c[k]] for c in combos])
            for k, s in enumerate(specs)}
    ids = [f"{prefix}{t}" for t in range(len(combos))]
    return AttributeTable(ids, cols), wts


@dataclass(frozen=True)
class ComponentEstimates:
    """Monte Carlo estimates of the score variance components, all (d+1)^2."""

    sigma1_c: np.ndarray   # consumer-projection second moment
    sigma1_p: np.ndarray   # product-projection second moment
    sigma2: np.ndarray     # second moment of the conditional score mean
    sigma3: np.ndarray     # mean conditional score variance


def oracle_components(latent: LatentRecord, design: DyadDesign, theta0: Theta) -> ComponentEstimates:
    """Score variance components from the realized draws.

    The conditional edge probability given latents is exact,
    q_ij = StdNormalCdf((ndtri(p_ij) - rho_a A_i - rho_b B_j) / sigma_eps),
    so the conditional score mean is (q - p) R.  The remaining integrals
    over the opposite side's latent factor use Gauss-Hermite quadrature
    (32 nodes); attribute sums run over the full finite support.
    """
    cfg = latent.config
    n = latent.n
    N, M, d = design.n_consumers, design.n_products, design.feature_dim
    theta_n = theta0.stacked()
    alpha_n, beta = theta_n[0], theta_n[1:]
    sig = cfg.sigma_eps
    ra, rb = cfg.rho_a, cfg.rho_b

    p_dim = d + 1
    sigma2 = np.zeros((p_dim, p_dim))
    sigma3 = np.zeros((p_dim, p_dim))
    for i0, i1, Z, _ in design.iter_row_blocks():
        p = expit(alpha_n + Z @ beta)
        zp = ndtri(p)
        q = ndtr((zp - ra * latent.a[i0:i1, None] - rb * latent.b[None, :]) / sig)
        sbar0 = q - p                         # intercept coordinate of sbar
        sbarz = sbar0[:, :, None] * Z
        sigma2[0, 0] += float(np.sum(sbar0 * sbar0))
        sigma2[0, 1:] += np.einsum("cm,cmk->k", sbar0, sbarz)
        sigma2[1:, 1:] += np.einsum("cmk,cml->kl", sbarz, sbarz)
        w = q * (1.0 - q)
        sigma3[0, 0] += float(np.sum(w))
        sigma3[0, 1:] += np.einsum("cm,cmk->k", w, Z)
        sigma3[1:, 1:] += np.einsum("cm,cmk,cml->kl", w, Z, Z)
    for m in (sigma2, sigma3):
        m[1:, 0] = m[0, 1:]
        m /= N * M

    nodes, wts = _gauss_hermite()

    def hajek_moment(own_attrs, own_factor, other_support, other_wts, own_rho, other_rho, consumer_side):
        """(1/K) sum_k sbar1_k sbar1_k' over own units k."""
        K = len(own_attrs)
        if consumer_side:
            z = design.feature_map.block(own_attrs, other_support,
                                         np.arange(K), np.arange(len(other_support)))
        else:
            z = design.feature_map.block(other_support, own_attrs,
                                         np.arange(len(other_support)), np.arange(K))
            z = np.transpose(z, (1, 0, 2))
        p = expit(alpha_n + z @ beta)         # (K, S)
        zp = ndtri(p)
        # E over the other side's factor of q, by quadrature over N(0,1)
        arg = (zp[:, :, None] - own_rho * own_factor[:, None, None]
               - other_rho * nodes[None, None, :]) / sig
        eq = ndtr(arg) @ wts                  # (K, S)
        diff = (eq - p) * other_wts[None, :]
        s0 = diff.sum(axis=1)                                   # (K,)
        sz = np.einsum("ks,ksd->kd", diff, z)                   # (K, d)
        out = np.empty((p_dim, p_dim))
        out[0, 0] = float(s0 @ s0)
        out[0, 1:] = out[1:, 0] = s0 @ sz
        out[1:, 1:] = sz.T @ sz
        return out / K

    prod_support, prod_wts = _support_table(cfg.product_attrs, "x")
    cons_support, cons_wts = _support_table(cfg.consumer_attrs, "w")
    sigma1_c = hajek_moment(design.consumer_attrs, latent.a, prod_support, prod_wts,
                            ra, rb, consumer_side=True)
    sigma1_p = hajek_moment(design.product_attrs, latent.b, cons_support, cons_wts,
                            rb, ra, consumer_side=False)
    return ComponentEstimates(sigma1_c=sigma1_c, sigma1_p=sigma1_p,
                              sigma2=sigma2, sigma3=sigma3)


def score_variance_reconstruction(comp: ComponentEstimates, N: int, M: int) -> np.ndarray:
    """Exact finite-n variance of the mean score implied by the components:
    Sigma1_c/N + Sigma1_p/M + (Sigma2 - Sigma1_c - Sigma1_p)/(NM) + Sigma3/(NM)."""
    return (comp.sigma1_c / N + comp.sigma1_p / M
            + (comp.sigma2 - comp.sigma1_c - comp.sigma1_p) / (N * M)
            + comp.sigma3 / (N * M))


def z_distribution(config: GraphonConfig) -> tuple[np.ndarray, np.ndarray]:
    """Joint finite support of Z_ij with weights, for analytic limits."""
    cons_support, cons_wts = _support_table(config.consumer_attrs, "w")
    prod_support, prod_wts = _support_table(config.product_attrs, "x")
    z = config.feature_map.block(cons_support, prod_support,
                                 np.arange(len(cons_support)), np.arange(len(prod_support)))
    wts = np.outer(cons_wts, prod_wts)
    return z.reshape(-1, config.feature_map.dim), wts.ravel()


def mean_exp_zbeta(config: GraphonConfig) -> float:
    """E[exp(Z' beta0)] over the attribute distributions."""
    z, w = z_distribution(config)
    return float(w @ np.exp(z @ np.asarray(config.beta0)))


def aggregate_limit(config: GraphonConfig, x: dict) -> float:
    """Analytic limit of total unit sales for product attributes x:
    (1 - phi) * alpha0 * E[exp(z(W, x)' beta0)]."""
    cons_support, cons_wts = _support_table(config.consumer_attrs, "w")
    cols = {k: np.array([v]) for k, v in x.items()}
    table = AttributeTable(["query"], cols)
    z = config.feature_map.block(cons_support, table,
                                 np.arange(len(cons_support)), np.array([0]))[:, 0, :]
    mean = float(cons_wts @ np.exp(z @ np.asarray(config.beta0)))
    return (1.0 - config.phi) * config.alpha0 * mean

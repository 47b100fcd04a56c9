"""Logit kernel and the first two derivatives of the composite log-likelihood.

All dyad sums run in two parts: a dense pass streaming feature blocks over
every consumer-product pair, plus an exact correction over the (sparse)
edge set.  The edge corrections are accumulated with compensated summation
(math.fsum), which makes them independent of edge ordering bit-for-bit, so
relabeling observationally identical units cannot perturb results.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

from .design import DyadDesign, Theta
from .errors import InputError


def logit(v):
    """Logistic function exp(v)/(1+exp(v)), stable for large |v|."""
    return expit(v)


def _softplus(v):
    return np.logaddexp(0.0, v)


def _check_theta(design: DyadDesign, theta: Theta) -> np.ndarray:
    if theta.beta.size != design.feature_dim:
        raise InputError(f"theta has {theta.beta.size} slopes for "
                         f"{design.feature_dim} features")
    if theta.n != design.n_total:
        raise InputError(f"theta is indexed by n={theta.n} but the design has "
                         f"n={design.n_total}")
    return theta.stacked()


def dyad_sums(design: DyadDesign, theta_n: np.ndarray,
              loglik: bool = True, score: bool = True, hessian: bool = True,
              chunk_rows: int | None = None) -> dict:
    """Unnormalized dyad sums of the kernel and its derivatives at theta_n.

    Returns a dict with the requested keys:
      'loglik'  : sum_ij l_ij                (scalar)
      'score'   : sum_ij (Y_ij - e_ij) R_ij  (d+1,)
      'hessian' : -sum_ij e_ij(1-e_ij) R_ij R_ij'   ((d+1, d+1))
    Divide by N*M for the averaged versions.
    """
    alpha_n, beta = theta_n[0], theta_n[1:]
    d = design.feature_dim
    p = d + 1

    sp_sum = 0.0                      # sum of softplus(v) over all dyads
    e_sum = 0.0                       # sum of e_ij
    ez_sum = np.zeros(d)              # sum of e_ij Z_ij
    h00 = 0.0                         # sum of w_ij
    h0z = np.zeros(d)                 # sum of w_ij Z_ij
    hzz = np.zeros((d, d))            # sum of w_ij Z_ij Z_ij'

    for _, _, Z, _ in design.iter_row_blocks(chunk_rows):
        v = alpha_n + Z @ beta
        if loglik:
            sp_sum += float(np.sum(_softplus(v)))
        e = expit(v)
        if score:
            e_sum += float(np.sum(e))
            ez_sum += np.einsum("cm,cmk->k", e, Z)
        if hessian:
            w = e * (1.0 - e)
            h00 += float(np.sum(w))
            h0z += np.einsum("cm,cmk->k", w, Z)
            hzz += np.einsum("cm,cmk,cml->kl", w, Z, Z)

    out: dict = {}
    Ze = design.edge_z()
    if loglik:
        # l_ij = (2Y-1) v - ln(1+exp((2Y-1) v)); summing over all dyads
        # collapses to  sum_edges v  -  sum_all softplus(v).
        v_edges = alpha_n + Ze @ beta
        out["loglik"] = math.fsum(v_edges) - sp_sum
    if score:
        s = np.empty(p)
        s[0] = design.n_edges - e_sum
        for k in range(d):
            s[1 + k] = math.fsum(Ze[:, k]) - ez_sum[k]
        out["score"] = s
    if hessian:
        H = np.empty((p, p))
        H[0, 0] = h00
        H[0, 1:] = H[1:, 0] = h0z
        H[1:, 1:] = 0.5 * (hzz + hzz.T)   # exact symmetry despite fp rounding
        out["hessian"] = -H
    return out


def composite_loglik(design: DyadDesign, theta: Theta) -> float:
    """Average logit composite log-likelihood over all N*M dyads."""
    theta_n = _check_theta(design, theta)
    sums = dyad_sums(design, theta_n, loglik=True, score=False, hessian=False)
    return sums["loglik"] / (design.n_consumers * design.n_products)


def score(design: DyadDesign, theta: Theta) -> np.ndarray:
    """Gradient of composite_loglik in theta_n = (alpha_n, beta')', length d+1."""
    theta_n = _check_theta(design, theta)
    sums = dyad_sums(design, theta_n, loglik=False, score=True, hessian=False)
    return sums["score"] / (design.n_consumers * design.n_products)


def hessian(design: DyadDesign, theta: Theta) -> np.ndarray:
    """Hessian of composite_loglik in theta_n: symmetric, negative semidefinite."""
    theta_n = _check_theta(design, theta)
    sums = dyad_sums(design, theta_n, loglik=False, score=False, hessian=True)
    return sums["hessian"] / (design.n_consumers * design.n_products)


def gamma_limit(theta: Theta, z_support: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Analytic limit of the rescaled information -n * H_n(theta_n).

    For a finite feature distribution (support rows z_k with weights w_k)
    this is  alpha * sum_k w_k exp(z_k' beta) R_k R_k'  with R_k = (1, z_k')'.
    Positive-definite convention: the fitted counterpart is -n * H_n.
    """
    z_support = np.atleast_2d(np.asarray(z_support, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64)
    if z_support.shape[0] != weights.size:
        raise InputError("z support and weights differ in length")
    if np.any(weights < 0) or abs(float(weights.sum()) - 1.0) > 1e-8:
        raise InputError("weights must be nonnegative and sum to one")
    if z_support.shape[1] != theta.beta.size:
        raise InputError("z support dimension does not match beta")
    R = np.column_stack([np.ones(z_support.shape[0]), z_support])
    scale = theta.alpha * weights * np.exp(z_support @ theta.beta)
    return np.einsum("k,ka,kb->ab", scale, R, R)

"""Aggregate sales predictions and average partial effects with delta-method
standard errors.

Both effects combine two asymptotically uncorrelated variance pieces: the
sampling variation of the effect's own summands (consumers for the
aggregate, a shared-index pair sum for the APE) and the parameter noise
propagated through the effect's Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .design import DyadDesign
from .errors import InputError, NotConvergedError
from .estimator import FitResult
from .features import AttributeTable
from .variance import sandwich, variance_components


@dataclass
class AggregateEffect:
    """Predicted total units gamma_hat(x) = sum_i e_i(x) for a product x."""

    x: dict
    gamma_hat: float
    se: float
    level: float
    interval: tuple[float, float]
    limit_reference: float | None = None


@dataclass
class ApeResult:
    """Average partial effects (1/NM) sum_ij e_ij (1 - e_ij) Z_ij.

    Raw values shrink with network density, so the density-normalized
    versions gamma_hat / rho_hat are reported alongside.
    """

    gamma_hat: np.ndarray
    se: np.ndarray
    level: float
    intervals: np.ndarray
    gamma_density_scaled: np.ndarray
    se_density_scaled: np.ndarray
    vcov: np.ndarray


def _product_row_table(design: DyadDesign, x: dict | int) -> AttributeTable:
    """One-row product table for an attribute dict or an existing row index."""
    if isinstance(x, (int, np.integer)):
        if not 0 <= x < design.n_products:
            raise InputError(f"product index {x} out of range")
        row = design.product_attrs.row(int(x))
        return AttributeTable(["query"], {k: np.array([v]) for k, v in row.items()})
    needed = {s.product_column for s in design.feature_map.specs
              if s.transform != "consumer_only"}
    missing = sorted(c for c in needed if c not in x)
    if missing:
        raise InputError(f"product attributes missing required columns: {', '.join(missing)}")
    cols = {}
    for name, val in x.items():
        ref = design.product_attrs.columns.get(name)
        if ref is not None and ref.dtype.kind == "f":
            try:
                val = float(val)
            except (TypeError, ValueError):
                raise InputError(f"column {name!r} expects a numeric value, got {val!r}") from None
        cols[name] = np.array([val])
    return AttributeTable(["query"], cols)


def consumer_predictions(fit_result: FitResult, design: DyadDesign, x: dict | int):
    """Fitted e_i(x) for every sampled consumer against product attributes x.

    Returns (e, z): the length-N prediction vector and the (N, d) feature
    rows z(W_i, x) used to build it.
    """
    table = _product_row_table(design, x)
    z = design.feature_map.block(design.consumer_attrs, table,
                                 np.arange(design.n_consumers), np.array([0]))[:, 0, :]
    th = fit_result.theta_hat
    return expit(th.alpha_n + z @ th.beta), z


def aggregate_effect(fit_result: FitResult, design: DyadDesign, x: dict | int,
                     level: float = 0.95, vcov: np.ndarray | None = None,
                     limit_reference: float | None = None) -> AggregateEffect:
    """Predicted total unit sales for a product with attributes x, with SE.

    The SE combines the across-consumer spread of e_i(x) with the
    parameter term Phi V Phi' where Phi = sum_i e_i(1-e_i) (1, z_i')'.
    """
    if not fit_result.converged:
        raise NotConvergedError("aggregate_effect requires a converged fit")
    e_i, z = consumer_predictions(fit_result, design, x)
    N = design.n_consumers
    gamma = float(e_i.sum())

    het = float(np.sum((e_i - gamma / N) ** 2))
    w = e_i * (1.0 - e_i)
    phi = np.concatenate(([w.sum()], w @ z))
    if vcov is None:
        comp = variance_components(fit_result, design)
        vcov = sandwich(fit_result, comp, "dyadic_robust", level).vcov
    param = float(phi @ vcov @ phi)
    se = float(np.sqrt(het + param))

    zq = norm.ppf(0.5 + level / 2)
    x_dict = x if isinstance(x, dict) else design.product_attrs.row(int(x))
    return AggregateEffect(x=dict(x_dict), gamma_hat=gamma, se=se, level=level,
                           interval=(gamma - zq * se, gamma + zq * se),
                           limit_reference=limit_reference)


def average_partial_effect(fit_result: FitResult, design: DyadDesign,
                           level: float = 0.95,
                           vcov: np.ndarray | None = None) -> ApeResult:
    """APE per feature with SEs from the shared-index pair sum of the
    per-dyad marginal effects plus the parameter term."""
    if not fit_result.converged:
        raise NotConvergedError("average_partial_effect requires a converged fit")
    N, M, d = design.n_consumers, design.n_products, design.feature_dim
    NM = N * M
    th = fit_result.theta_hat
    alpha_n, beta = th.alpha_n, th.beta

    row_m = np.zeros((N, d))
    col_m = np.zeros((M, d))
    diag_m = np.zeros((d, d))
    total = np.zeros(d)
    jac0 = np.zeros(d)            # d(gamma)/d(alpha_n)
    jacz = np.zeros((d, d))       # d(gamma)/d(beta)
    for i0, i1, Z, _ in design.iter_row_blocks():
        e = expit(alpha_n + Z @ beta)
        w = e * (1.0 - e)
        m = w[:, :, None] * Z                       # (c, M, d)
        row_m[i0:i1] = m.sum(axis=1)
        col_m += m.sum(axis=0)
        total += m.sum(axis=(0, 1))
        diag_m += np.einsum("cmk,cml->kl", m, m)
        u = w * (1.0 - 2.0 * e)
        uz = u[:, :, None] * Z
        jac0 += uz.sum(axis=(0, 1))
        jacz += np.einsum("cmk,cml->kl", uz, Z)

    gamma = total / NM
    jac = np.column_stack([jac0, jacz]) / NM        # (d, d+1)

    r_c = row_m - M * gamma                          # centered row sums
    c_c = col_m - N * gamma
    diag_c = diag_m - NM * np.outer(gamma, gamma)
    meat = r_c.T @ r_c + c_c.T @ c_c - diag_c

    if vcov is None:
        comp = variance_components(fit_result, design)
        vcov = sandwich(fit_result, comp, "dyadic_robust", level).vcov
    vcov_ape = meat / NM**2 + jac @ vcov @ jac.T
    vcov_ape = 0.5 * (vcov_ape + vcov_ape.T)
    se = np.sqrt(np.clip(np.diag(vcov_ape), 0.0, None))

    zq = norm.ppf(0.5 + level / 2)
    rho = design.rho_hat
    return ApeResult(
        gamma_hat=gamma, se=se, level=level,
        intervals=np.column_stack([gamma - zq * se, gamma + zq * se]),
        gamma_density_scaled=gamma / rho, se_density_scaled=se / rho,
        vcov=vcov_ape)

"""Sandwich covariance of the fitted coefficients under three regimes.

The estimable "meat" pools every dependence channel into one matrix built
from per-consumer and per-product residual sums:

    B = R + C - D,   R = sum_i r_i r_i',  C = sum_j c_j c_j',
                     D = sum_ij s_ij s_ij',

which equals the sum of s_ij s_kl' over all dyad pairs sharing a consumer
or a product, counting each dyad with itself exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .design import DyadDesign
from .errors import NotConvergedError, SingularHessianError
from .estimator import FitResult

MODES = ("dyadic_robust", "iid", "info_matrix")

# Eigenvalues below -tol * trace flag a numerically indefinite matrix.
_PSD_TOL = 1e-10


@dataclass
class VarianceComponents:
    """Residual aggregates from one pass over the dyads."""

    row_sums: np.ndarray    # (N, d+1), r_i = sum_j s_ij
    col_sums: np.ndarray    # (M, d+1), c_j = sum_i s_ij
    diag_meat: np.ndarray   # D = sum_ij s_ij s_ij'
    row_meat: np.ndarray    # R = sum_i r_i r_i'
    col_meat: np.ndarray    # C = sum_j c_j c_j'

    def meat(self, mode: str = "dyadic_robust") -> np.ndarray:
        if mode == "dyadic_robust":
            return pooled_meat(self.row_meat, self.col_meat, self.diag_meat)
        if mode == "iid":
            return self.diag_meat
        raise ValueError(f"no meat for mode {mode!r}")


@dataclass
class VarianceReport:
    mode: str
    vcov: np.ndarray          # covariance of theta_n_hat = (alpha_n, beta)
    std_errors: np.ndarray
    level: float
    intervals: np.ndarray     # (d+1, 2), symmetric around the estimates
    estimates: np.ndarray     # theta_n_hat, interval centers
    meat_psd: bool            # pooled meat PSD up to fp tolerance
    vcov_psd: bool


def pooled_meat(row_meat: np.ndarray, col_meat: np.ndarray, diag_meat: np.ndarray) -> np.ndarray:
    """Shared-index pair sum R + C - D."""
    return row_meat + col_meat - diag_meat


def is_psd(mat: np.ndarray, tol: float = _PSD_TOL) -> bool:
    sym = 0.5 * (mat + mat.T)
    eigs = np.linalg.eigvalsh(sym)
    return bool(eigs.min() >= -tol * max(np.trace(sym), 1e-300))


def score_aggregates(design: DyadDesign, theta_n: np.ndarray) -> VarianceComponents:
    """Accumulate r_i, c_j and D in one streamed pass; then R and C."""
    N, M, d = design.n_consumers, design.n_products, design.feature_dim
    p = d + 1
    row_sums = np.zeros((N, p))
    col_sums = np.zeros((M, p))
    diag = np.zeros((p, p))
    alpha_n, beta = theta_n[0], theta_n[1:]
    for i0, i1, Z, Y in design.iter_row_blocks():
        resid = Y - expit(alpha_n + Z @ beta)        # (c, M)
        s0 = resid                                    # intercept coordinate
        row_sums[i0:i1, 0] = s0.sum(axis=1)
        col_sums[:, 0] += s0.sum(axis=0)
        sz = resid[:, :, None] * Z                    # (c, M, d)
        row_sums[i0:i1, 1:] = sz.sum(axis=1)
        col_sums[:, 1:] += sz.sum(axis=0)
        diag[0, 0] += float(np.sum(resid * resid))
        diag[0, 1:] += np.einsum("cm,cmk->k", resid, sz)
        diag[1:, 1:] += np.einsum("cmk,cml->kl", sz, sz)
    diag[1:, 0] = diag[0, 1:]
    diag[1:, 1:] = 0.5 * (diag[1:, 1:] + diag[1:, 1:].T)
    return VarianceComponents(
        row_sums=row_sums,
        col_sums=col_sums,
        diag_meat=diag,
        row_meat=row_sums.T @ row_sums,
        col_meat=col_sums.T @ col_sums,
    )


def variance_components(fit_result: FitResult, design: DyadDesign) -> VarianceComponents:
    """Residual aggregates at the fit point (requires convergence)."""
    if not fit_result.converged:
        raise NotConvergedError("variance components require a converged fit")
    return score_aggregates(design, fit_result.theta_hat.stacked())


def sandwich(fit_result: FitResult, components: VarianceComponents, mode: str,
             level: float = 0.95) -> VarianceReport:
    """Covariance of theta_n_hat under the requested asymptotic regime.

    dyadic_robust : bread * pooled meat * bread, valid under dyadic dependence
    iid           : bread * own-pair meat * bread, valid when the graphon is
                    degenerate (no conditional dependence)
    info_matrix   : inverse observed information, the rare-events/iid special
                    case where the meat equals the bread
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    H = fit_result.hessian                      # H_n(theta_hat), mean scale
    N = components.row_sums.shape[0]
    M = components.col_sums.shape[0]
    NM = N * M

    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularHessianError(f"information matrix singular (cond={cond:.3g})")

    meat_psd = is_psd(components.meat("dyadic_robust"))
    if mode == "info_matrix":
        vcov = np.linalg.inv(-NM * H)
    else:
        B = components.meat(mode)
        Hinv_B = np.linalg.solve(H, B / NM**2)
        vcov = np.linalg.solve(H, Hinv_B.T).T
    vcov = 0.5 * (vcov + vcov.T)

    se = np.sqrt(np.clip(np.diag(vcov), 0.0, None))
    z = norm.ppf(0.5 + level / 2)
    est = fit_result.theta_hat.stacked()
    intervals = np.column_stack([est - z * se, est + z * se])
    return VarianceReport(mode=mode, vcov=vcov, std_errors=se, level=level,
                          intervals=intervals, estimates=est,
                          meat_psd=meat_psd, vcov_psd=is_psd(vcov))


def vcov_alpha_scale(fit_result: FitResult, report: VarianceReport) -> np.ndarray:
    """Delta-method covariance for (alpha, beta) from the (alpha_n, beta) one.

    alpha = n exp(alpha_n), so the Jacobian is diag(alpha_hat, 1, ..., 1).
    """
    jac = np.ones(report.vcov.shape[0])
    jac[0] = fit_result.theta_hat.alpha
    return report.vcov * np.outer(jac, jac)

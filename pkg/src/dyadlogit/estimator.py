"""Damped Newton maximization of the composite log-likelihood."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .design import DyadDesign, Theta
from .errors import InputError, NotConvergedError, SeparationError, SingularHessianError
from .model import dyad_sums

# |alpha_n| beyond this is treated as intercept divergence (density ~1e-9).
_ALPHA_N_DIVERGENCE = math.log(1e9)
_COND_LIMIT = 1e12
_STEP_ACCEPT_TOL = 1e-12


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 100
    grad_tol: float = 1e-8            # on the sup norm of the mean score
    step_halving_max: int = 30
    init: Theta | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1")
        if self.grad_tol <= 0:
            raise InputError("grad_tol must be positive")
        if self.step_halving_max < 0:
            raise InputError("step_halving_max must be >= 0")


@dataclass
class FitResult:
    """Outcome of a Newton fit.

    gamma_hat is -n * H_n(theta_hat), the plug-in for the rescaled
    information limit; gamma_hat_pd flags whether it is positive definite.
    """

    theta_hat: Theta
    converged: bool
    iterations: int
    final_grad_norm: float
    loglik: float
    gamma_hat: np.ndarray
    gamma_hat_pd: bool
    hessian: np.ndarray = field(repr=False)   # H_n(theta_hat), mean scale

    def score_residual(self, design: DyadDesign, i: int, j: int) -> np.ndarray:
        """Per-dyad residual s_ij = (Y_ij - e_ij) R_ij, computed on demand."""
        z = design.z_pair(i, j)
        e = float(expit(self.theta_hat.alpha_n + z @ self.theta_hat.beta))
        r = np.concatenate(([1.0], z))
        return (design.y_pair(i, j) - e) * r


def _initial_theta_n(design: DyadDesign, opts: FitOptions) -> np.ndarray:
    if opts.init is not None:
        if opts.init.beta.size != design.feature_dim:
            raise InputError("init theta has the wrong number of slopes")
        if opts.init.n != design.n_total:
            raise InputError("init theta indexed by a different n than the design")
        return opts.init.stacked()
    rho = design.rho_hat
    theta_n = np.zeros(design.feature_dim + 1)
    theta_n[0] = math.log(rho / (1.0 - rho))
    return theta_n


def _check_conditioning(H: np.ndarray, design: DyadDesign) -> None:
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        names = ("(intercept)",) + design.feature_map.names
        _, _, vt = np.linalg.svd(H)
        null = np.abs(vt[-1])
        suspects = [names[k] for k in np.flatnonzero(null >= 0.3 * null.max())]
        raise SingularHessianError(
            f"Hessian numerically singular (cond={cond:.3g}); "
            f"collinear candidates: {', '.join(suspects)}", suspects)


def fit(design: DyadDesign, opts: FitOptions | None = None) -> FitResult:
    """Newton iterations with step halving; loglik never decreases per step.

    Raises SeparationError when the edge set is empty/full or the intercept
    diverges, SingularHessianError on collinear features.  Plain failure to
    reach grad_tol is reported via converged=False, never silently.
    """
    opts = opts or FitOptions()
    N, M = design.n_consumers, design.n_products
    NM = N * M
    if design.n_edges == 0 or design.n_edges == NM:
        raise SeparationError(
            f"outcome is constant ({design.n_edges} of {NM} dyads are edges); "
            "the intercept is not identified")

    theta_n = _initial_theta_n(design, opts)
    sums = dyad_sums(design, theta_n)
    loglik = sums["loglik"] / NM
    S = sums["score"] / NM
    H = sums["hessian"] / NM

    converged = False
    iterations = 0
    for _ in range(opts.max_iter):
        grad_norm = float(np.max(np.abs(S)))
        if grad_norm <= opts.grad_tol:
            converged = True
            break
        _check_conditioning(H, design)
        step = np.linalg.solve(H, S)

        accepted = False
        scale = 1.0
        for _ in range(opts.step_halving_max + 1):
            cand = theta_n - scale * step
            cand_loglik = dyad_sums(design, cand, score=False, hessian=False)["loglik"] / NM
            if cand_loglik >= loglik - _STEP_ACCEPT_TOL:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            break   # stalled: gradient above tol but no uphill step found
        if abs(cand[0]) > _ALPHA_N_DIVERGENCE:
            raise SeparationError(
                f"intercept diverged (alpha_n={cand[0]:.2f}); data are too sparse "
                "or separation is present")

        theta_n = cand
        iterations += 1
        sums = dyad_sums(design, theta_n)
        loglik = sums["loglik"] / NM
        S = sums["score"] / NM
        H = sums["hessian"] / NM

    grad_norm = float(np.max(np.abs(S)))
    converged = converged or grad_norm <= opts.grad_tol
    gamma_hat = -design.n_total * H
    eigs = np.linalg.eigvalsh(0.5 * (gamma_hat + gamma_hat.T))
    return FitResult(
        theta_hat=Theta.from_stacked(theta_n, design.n_total),
        converged=converged,
        iterations=iterations,
        final_grad_norm=grad_norm,
        loglik=loglik,
        gamma_hat=gamma_hat,
        gamma_hat_pd=bool(eigs.min() > 0.0),
        hessian=H,
    )


def predict(fit_result: FitResult, design: DyadDesign, i: int, j: int) -> float:
    """Fitted purchase probability e(alpha_n_hat + Z_ij' beta_hat)."""
    if not fit_result.converged:
        raise NotConvergedError("predict requires a converged fit")
    z = design.z_pair(i, j)
    return float(expit(fit_result.theta_hat.alpha_n + z @ fit_result.theta_hat.beta))

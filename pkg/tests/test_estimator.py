import math

import numpy as np
import pytest

from dyadlogit import (DyadDesign, FeatureMap, FeatureSpec, FitOptions, FitResult,
                       InputError, NotConvergedError, SeparationError,
                       SingularHessianError, Theta, fit, predict, score)

from conftest import intercept_only_design, make_table, random_design


def _fitted_design(rng, **kw):
    design = random_design(rng, n_consumers=12, n_products=10, density=0.3, **kw)
    return design, fit(design)


class TestFit:
    def test_intercept_only_matches_sample_density(self):
        design = intercept_only_design(4, 5, [(0, 0), (1, 2), (3, 4)])
        res = fit(design)
        rho = design.rho_hat
        assert res.converged
        assert res.theta_hat.alpha_n == pytest.approx(math.log(rho / (1 - rho)), abs=1e-12)
        assert predict(res, design, 2, 3) == pytest.approx(rho, abs=1e-12)

    def test_recovers_seeded_coefficients(self, rng):
        design, res = _fitted_design(rng, d=2)
        assert res.converged
        assert res.final_grad_norm <= 1e-8
        assert res.iterations >= 1
        np.testing.assert_allclose(score(design, res.theta_hat), 0.0, atol=1e-8)

    def test_first_order_condition_residuals_sum_to_zero(self, rng):
        from dyadlogit import variance_components
        design, res = _fitted_design(rng, d=1)
        comp = variance_components(res, design)
        NM = design.n_consumers * design.n_products
        np.testing.assert_allclose(comp.row_sums.sum(axis=0) / NM, 0.0, atol=1e-8)
        np.testing.assert_allclose(comp.col_sums.sum(axis=0) / NM, 0.0, atol=1e-8)

    def test_gamma_hat_is_rescaled_information(self, rng):
        from dyadlogit import hessian
        design, res = _fitted_design(rng, d=1)
        np.testing.assert_allclose(
            res.gamma_hat, -design.n_total * hessian(design, res.theta_hat), rtol=1e-12)
        assert res.gamma_hat_pd

    def test_initialization_invariance(self, rng):
        design = random_design(rng, n_consumers=15, n_products=12, d=2, density=0.3)
        base = fit(design).theta_hat.stacked()
        for k in range(5):
            start = Theta.from_stacked(
                np.concatenate([[-1.0 - k * 0.7], rng.uniform(-1, 1, 2)]),
                design.n_total)
            again = fit(design, FitOptions(init=start)).theta_hat.stacked()
            np.testing.assert_allclose(again, base, atol=1e-6)

    def test_all_zero_outcome_is_separation(self):
        design = intercept_only_design(3, 3, np.empty((0, 2), dtype=int))
        with pytest.raises(SeparationError):
            fit(design)

    def test_all_one_outcome_is_separation(self):
        edges = [(i, j) for i in range(3) for j in range(3)]
        with pytest.raises(SeparationError):
            fit(intercept_only_design(3, 3, edges))

    def test_duplicated_feature_is_singular(self, rng):
        consumers = make_table("c", w=rng.normal(size=8))
        products = make_table("p", x=rng.normal(size=8))
        fm = FeatureMap((FeatureSpec("z1", "product", "w", "x"),
                         FeatureSpec("z2", "product", "w", "x")))
        edges = np.argwhere(rng.random((8, 8)) < 0.4)
        with pytest.raises(SingularHessianError) as err:
            fit(DyadDesign(consumers, products, fm, edges))
        assert {"z1", "z2"} <= set(err.value.suspect_features)

    def test_zero_feature_column_is_singular(self, rng):
        consumers = make_table("c", w=rng.normal(size=8), zero=np.zeros(8))
        products = make_table("p", x=rng.normal(size=8))
        fm = FeatureMap((FeatureSpec("wx", "product", "w", "x"),
                         FeatureSpec("dead", "consumer_only", consumer_column="zero")))
        edges = np.argwhere(rng.random((8, 8)) < 0.4)
        with pytest.raises(SingularHessianError) as err:
            fit(DyadDesign(consumers, products, fm, edges))
        assert "dead" in err.value.suspect_features

    def test_non_convergence_is_reported_not_raised(self, rng):
        design = random_design(rng, n_consumers=12, n_products=12, d=1, density=0.3)
        start = Theta.from_stacked(np.array([-6.0, 3.0]), design.n_total)
        res = fit(design, FitOptions(max_iter=1, init=start))
        assert not res.converged
        assert res.final_grad_norm > 1e-8

    def test_fit_options_validation(self):
        with pytest.raises(InputError):
            FitOptions(max_iter=0)
        with pytest.raises(InputError):
            FitOptions(grad_tol=0.0)


class TestPredict:
    def test_requires_convergence(self, rng):
        design = random_design(rng, d=1)
        start = Theta.from_stacked(np.array([-5.0, 2.0]), design.n_total)
        res = fit(design, FitOptions(max_iter=1, init=start))
        if res.converged:
            pytest.skip("design converged in one step")
        with pytest.raises(NotConvergedError):
            predict(res, design, 0, 0)

    def test_monotone_in_positive_slope_feature(self, rng):
        consumers = make_table("c", w=np.array([0.5, 1.0, 2.0, 3.0]))
        products = make_table("p", x=np.ones(4))
        fm = FeatureMap((FeatureSpec("wx", "product", "w", "x"),))
        # edges concentrated on high-w consumers so beta_hat > 0
        edges = [(2, 0), (2, 1), (3, 0), (3, 1), (3, 2), (1, 3)]
        design = DyadDesign(consumers, products, fm, edges)
        res = fit(design)
        assert res.theta_hat.beta[0] > 0
        preds = [predict(res, design, i, 0) for i in range(4)]
        assert preds == sorted(preds)

    def test_constant_when_beta_zero(self, rng):
        design = random_design(rng, n_consumers=6, n_products=5, d=1)
        res = fit(design)
        flat = FitResult(theta_hat=Theta(alpha=2.0, beta=np.zeros(1), n=design.n_total),
                         converged=True, iterations=1, final_grad_norm=0.0,
                         loglik=res.loglik, gamma_hat=res.gamma_hat,
                         gamma_hat_pd=True, hessian=res.hessian)
        preds = {predict(flat, design, i, j)
                 for i in range(design.n_consumers) for j in range(design.n_products)}
        assert len(preds) == 1

    def test_index_out_of_range(self, rng):
        design = random_design(rng, d=1)
        res = fit(design)
        with pytest.raises(InputError):
            predict(res, design, design.n_consumers, 0)


class TestScoreResidualHandle:
    def test_matches_definition(self, rng):
        design, res = _fitted_design(rng, d=1)
        th = res.theta_hat
        for (i, j) in [(0, 0), (3, 4), (11, 9)]:
            z = design.z_pair(i, j)
            e = 1 / (1 + math.exp(-(th.alpha_n + float(z @ th.beta))))
            expected = (design.y_pair(i, j) - e) * np.concatenate(([1.0], z))
            np.testing.assert_allclose(res.score_residual(design, i, j), expected, rtol=1e-12)

import math

import numpy as np
import pytest

from dyadlogit import (InputError, Theta, composite_loglik, gamma_limit, hessian,
                       logit, score, simulate_graph)
from dyadlogit.model import dyad_sums
from dyadlogit.presets import lemma_config
from dyadlogit.simulator import z_distribution

from conftest import intercept_only_design, random_design
from oracles import (brute_hessian, brute_loglik, brute_score,
                     central_diff_gradient, central_diff_jacobian)


class TestLogit:
    def test_zero_is_half(self):
        assert logit(0.0) == 0.5

    def test_sparse_intercept_value(self):
        # alpha=2, n=100, no slopes: e = (2/100) / (1 + 2/100)
        assert logit(math.log(2 / 100)) == pytest.approx(0.0196078431372549, abs=1e-12)

    def test_extreme_negative_no_overflow(self):
        with np.errstate(over="raise"):
            val = logit(-800.0)
        assert 0.0 <= val < 1e-300

    def test_symmetry(self, rng):
        v = rng.uniform(-30, 30, size=200)
        assert np.max(np.abs(logit(v) + logit(-v) - 1.0)) < 1e-15


class TestCompositeLoglik:
    def test_single_dyad_no_edge(self):
        design = intercept_only_design(1, 1, np.empty((0, 2), dtype=int))
        theta = Theta(alpha=2.0, beta=np.empty(0), n=2)   # alpha_n = 0
        assert composite_loglik(design, theta) == pytest.approx(-math.log(2), abs=1e-14)

    def test_single_dyad_with_edge(self):
        design = intercept_only_design(1, 1, [(0, 0)])
        theta = Theta(alpha=2.0, beta=np.empty(0), n=2)
        assert composite_loglik(design, theta) == pytest.approx(-math.log(2), abs=1e-14)

    def test_matches_enumeration_on_2x2(self, rng):
        design = random_design(rng, n_consumers=2, n_products=2, d=1)
        theta = Theta(alpha=1.5, beta=np.array([0.7]), n=design.n_total)
        assert composite_loglik(design, theta) == pytest.approx(
            brute_loglik(design, theta.stacked()), rel=1e-12)

    def test_extreme_linear_index_stays_finite(self):
        # drive |v| to 800 through the slope path so alpha stays representable
        from dyadlogit import DyadDesign, FeatureMap, FeatureSpec
        from conftest import make_table
        consumers = make_table("c", w=np.ones(2))
        products = make_table("p", x=np.ones(2))
        fm = FeatureMap((FeatureSpec("wx", "product", "w", "x"),))
        design = DyadDesign(consumers, products, fm, [(0, 0)])
        theta = Theta(alpha=float(design.n_total), beta=np.array([-800.0]), n=design.n_total)
        val = composite_loglik(design, theta)
        assert math.isfinite(val)
        s = score(design, theta)
        assert np.all(np.isfinite(s))

    def test_edge_order_invariance(self, rng):
        design = random_design(rng, n_consumers=5, n_products=6, d=2)
        edges = np.column_stack([design.edge_i, design.edge_j])
        from dyadlogit import DyadDesign
        shuffled = DyadDesign(design.consumer_attrs, design.product_attrs,
                              design.feature_map, edges[::-1])
        theta = Theta(alpha=2.0, beta=np.array([0.3, -0.2]), n=design.n_total)
        assert composite_loglik(design, theta) == composite_loglik(shuffled, theta)

    def test_dimension_mismatch(self, rng):
        design = random_design(rng, d=2)
        with pytest.raises(InputError):
            composite_loglik(design, Theta(alpha=1.0, beta=np.array([0.1]), n=design.n_total))
        with pytest.raises(InputError):
            composite_loglik(design, Theta(alpha=1.0, beta=np.zeros(2), n=design.n_total + 1))


class TestScoreAndHessian:
    def test_score_matches_enumeration_on_2x2(self, rng):
        design = random_design(rng, n_consumers=2, n_products=2, d=2)
        theta = Theta(alpha=0.8, beta=np.array([0.4, -0.6]), n=design.n_total)
        np.testing.assert_allclose(score(design, theta),
                                   brute_score(design, theta.stacked()), rtol=1e-12)

    def test_hessian_matches_enumeration(self, rng):
        design = random_design(rng, n_consumers=3, n_products=4, d=1)
        theta = Theta(alpha=1.2, beta=np.array([0.5]), n=design.n_total)
        np.testing.assert_allclose(hessian(design, theta),
                                   brute_hessian(design, theta.stacked()), rtol=1e-12)

    def test_score_is_gradient_of_loglik(self, rng):
        for _ in range(5):
            design = random_design(rng)
            n = design.n_total
            theta_n = np.concatenate([rng.uniform(-3, -1, 1), rng.uniform(-1, 1, design.feature_dim)])
            fd = central_diff_gradient(
                lambda x: dyad_sums(design, x, score=False, hessian=False)["loglik"]
                / (design.n_consumers * design.n_products), theta_n)
            got = score(design, Theta.from_stacked(theta_n, n))
            np.testing.assert_allclose(got, fd, rtol=1e-5, atol=1e-10)

    def test_hessian_is_jacobian_of_score(self, rng):
        for _ in range(5):
            design = random_design(rng)
            theta_n = np.concatenate([rng.uniform(-3, -1, 1), rng.uniform(-1, 1, design.feature_dim)])
            fd = central_diff_jacobian(
                lambda x: dyad_sums(design, x, loglik=False, hessian=False)["score"]
                / (design.n_consumers * design.n_products), theta_n)
            got = hessian(design, Theta.from_stacked(theta_n, design.n_total))
            np.testing.assert_allclose(got, 0.5 * (fd + fd.T), rtol=1e-4, atol=1e-10)

    def test_hessian_exactly_symmetric_and_nsd(self, rng):
        design = random_design(rng, d=3)
        theta = Theta(alpha=1.0, beta=np.array([0.2, -0.1, 0.4]), n=design.n_total)
        H = hessian(design, theta)
        assert np.array_equal(H, H.T)
        assert np.linalg.eigvalsh(H).max() <= 1e-12

    def test_score_zero_when_probabilities_match_outcomes(self):
        # both dyads of each consumer share e = 0.5 and half are edges
        design = intercept_only_design(2, 2, [(0, 0), (1, 1)])
        theta = Theta(alpha=float(design.n_total), beta=np.empty(0), n=design.n_total)
        np.testing.assert_allclose(score(design, theta), 0.0, atol=1e-15)


class TestRelabelingInvariance:
    def test_identical_consumers_can_swap(self, rng):
        # consumers 0 and 1 share attributes; swapping their edge rows must
        # leave every kernel sum bit-identical
        from dyadlogit import DyadDesign, FeatureMap, FeatureSpec
        from conftest import make_table
        consumers = make_table("c", w=np.array([1.3, 1.3, 0.4, 2.0]))
        products = make_table("p", x=rng.normal(size=5).round(3))
        fm = FeatureMap((FeatureSpec("wx", "product", "w", "x"),))
        edges = [(0, 0), (0, 3), (1, 2), (2, 1), (3, 4)]
        swapped = [(1, 0), (1, 3), (0, 2), (2, 1), (3, 4)]
        d1 = DyadDesign(consumers, products, fm, edges)
        d2 = DyadDesign(consumers, products, fm, swapped)
        theta = Theta(alpha=1.4, beta=np.array([0.25]), n=d1.n_total)
        assert composite_loglik(d1, theta) == composite_loglik(d2, theta)
        assert np.array_equal(score(d1, theta), score(d2, theta))
        assert np.array_equal(hessian(d1, theta), hessian(d2, theta))


class TestGammaLimit:
    def test_degenerate_support(self):
        g = gamma_limit(Theta(alpha=1.0, beta=np.empty(0), n=100),
                        np.empty((1, 0)), np.array([1.0]))
        np.testing.assert_allclose(g, [[1.0]])

    def test_two_point_support(self):
        # z in {0, 1} equiprobable, beta = ln 2, alpha = 1:
        # E[exp(z b)] = 1.5, E[exp(z b) z] = 1, E[exp(z b) z^2] = 1
        g = gamma_limit(Theta(alpha=1.0, beta=np.array([math.log(2)]), n=50),
                        np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))
        np.testing.assert_allclose(g, [[1.5, 1.0], [1.0, 1.0]], rtol=1e-14)

    def test_linear_in_alpha(self):
        z = np.array([[0.2], [0.9]])
        w = np.array([0.3, 0.7])
        g1 = gamma_limit(Theta(alpha=1.0, beta=np.array([0.4]), n=10), z, w)
        g2 = gamma_limit(Theta(alpha=2.0, beta=np.array([0.4]), n=10), z, w)
        np.testing.assert_allclose(g2, 2.0 * g1)

    def test_invalid_weights(self):
        with pytest.raises(InputError):
            gamma_limit(Theta(alpha=1.0, beta=np.array([0.1]), n=10),
                        np.array([[0.0], [1.0]]), np.array([0.5, 0.6]))


class TestRescaledInformationTrend:
    def test_deviation_decreases_with_n(self):
        # averaged Frobenius deviation of -n H_n from its analytic limit
        # shrinks as the network grows
        cfg = lemma_config()
        z, w = z_distribution(cfg)
        means = []
        for n_idx, n in enumerate((200, 400, 800)):
            limit = gamma_limit(cfg.theta0(n), z, w)
            devs = []
            for rep in range(30):
                seed = np.random.SeedSequence(77, spawn_key=(n_idx, rep))
                design, _ = simulate_graph(cfg, n, seed)
                H = hessian(design, cfg.theta0(n))
                devs.append(np.linalg.norm(n * H + limit))
            means.append(np.mean(devs))
        assert means[0] > means[1] > means[2]

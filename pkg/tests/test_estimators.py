import numpy as np
import pytest

from sparse_risk.datagen import ar1_covariance
from sparse_risk.estimators import (
    EstimatorConfig,
    SingularDesignError,
    _cd_batch,
    _lqa_batch,
    fit_bic_select,
    fit_hard_threshold,
    fit_least_squares,
    fit_scad_cd,
    fit_scad_lqa,
    gram_bundle,
    hodges_scalar,
    sparsity_pattern,
)
from sparse_risk.penalties import ScadParams, scad_penalty, scad_univariate_min

THETA0 = np.array([3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0])


def orthonormal_design(n, k, rng):
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return np.sqrt(n) * q


def ar_design(n, k, rng, rho=0.5):
    chol = np.linalg.cholesky(ar1_covariance(k, rho))
    return rng.standard_normal((n, k)) @ chol.T


def scad_objective(X, y, theta, p):
    resid = y - X @ theta
    return 0.5 * resid @ resid + X.shape[0] * np.sum(
        scad_penalty(np.abs(theta), p)
    )


class TestSparsityPattern:
    def test_base_parameter(self):
        np.testing.assert_array_equal(
            sparsity_pattern(THETA0).bits, [1, 1, 0, 0, 1, 0, 0, 0]
        )

    def test_zero_vector(self):
        assert sparsity_pattern(np.zeros(5)).all_zero

    def test_all_ones(self):
        assert sparsity_pattern(np.ones(5)).count() == 5

    def test_componentwise_order(self):
        small = sparsity_pattern(np.array([1.0, 0.0, 0.0]))
        big = sparsity_pattern(np.array([1.0, 2.0, 0.0]))
        assert small <= big
        assert not big <= small


class TestLeastSquares:
    def test_interpolates_noiseless(self):
        rng = np.random.default_rng(0)
        X = ar_design(40, 8, rng)
        y = X @ THETA0
        fit = fit_least_squares(X, y)
        np.testing.assert_allclose(fit.theta_hat, THETA0, atol=1e-9)
        assert fit.pattern == sparsity_pattern(fit.theta_hat)

    def test_scaled_orthonormal_identity(self):
        rng = np.random.default_rng(1)
        X = orthonormal_design(64, 8, rng)
        y = rng.standard_normal(64)
        fit = fit_least_squares(X, y)
        np.testing.assert_allclose(fit.theta_hat, X.T @ y / 64, atol=1e-12)

    def test_square_system_zero_residual(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((5, 5))
        y = rng.standard_normal(5)
        fit = fit_least_squares(X, y)
        np.testing.assert_allclose(X @ fit.theta_hat, y, atol=1e-8)

    def test_singular_design_raises(self):
        X = np.ones((10, 2))
        with pytest.raises(SingularDesignError):
            fit_least_squares(X, np.ones(10))


@pytest.mark.parametrize("fitter", [fit_scad_lqa, fit_scad_cd], ids=["lqa", "cd"])
class TestScadSolvers:
    def test_lambda_zero_returns_least_squares(self, fitter):
        rng = np.random.default_rng(3)
        X = ar_design(60, 8, rng)
        y = X @ THETA0 + rng.standard_normal(60)
        ls = fit_least_squares(X, y).theta_hat
        fit = fitter(X, y, ScadParams(0.0, 3.7))
        np.testing.assert_allclose(fit.theta_hat, ls, atol=1e-8)

    def test_orthonormal_matches_univariate_oracle(self, fitter):
        rng = np.random.default_rng(4)
        for _ in range(50):
            X = orthonormal_design(64, 8, rng)
            y = X @ rng.uniform(-3, 3, 8) + rng.standard_normal(64)
            lam = float(rng.uniform(0.1, 2.0))
            p = ScadParams(lam, 3.7)
            z = X.T @ y / 64
            want = np.array([scad_univariate_min(zi, p) for zi in z])
            fit = fitter(X, y, p, tol=1e-12, max_iter=100_000)
            np.testing.assert_allclose(fit.theta_hat, want, atol=1e-6)

    def test_objective_not_above_least_squares(self, fitter):
        rng = np.random.default_rng(5)
        for _ in range(100):
            X = ar_design(60, 8, rng)
            y = X @ THETA0 + rng.standard_normal(60)
            p = ScadParams(float(rng.uniform(0.05, 0.5)), 3.7)
            ls = fit_least_squares(X, y).theta_hat
            fit = fitter(X, y, p)
            assert scad_objective(X, y, fit.theta_hat, p) <= scad_objective(
                X, y, ls, p
            ) + 1e-9

    def test_produces_exact_zeros(self, fitter):
        rng = np.random.default_rng(6)
        X = ar_design(60, 8, rng)
        y = X @ THETA0 + rng.standard_normal(60)
        fit = fitter(X, y, ScadParams(0.4, 3.7))
        assert np.any(fit.theta_hat == 0.0)
        assert fit.pattern == sparsity_pattern(fit.theta_hat)

    def test_zeroes_most_null_coordinates_at_noise_scale(self, fitter):
        # lambda at the noise scale sigma_hat / sqrt(n) kills well over half
        # of the truly-zero coordinates, exactly
        rng = np.random.default_rng(16)
        zero_mask = THETA0 == 0.0
        hits = total = 0
        for _ in range(200):
            X = ar_design(60, 8, rng)
            y = X @ THETA0 + rng.standard_normal(60)
            resid = y - X @ fit_least_squares(X, y).theta_hat
            lam = float(np.sqrt(resid @ resid / 52) / np.sqrt(60))
            fit = fitter(X, y, ScadParams(lam, 3.7))
            hits += int(np.sum(fit.theta_hat[zero_mask] == 0.0))
            total += int(zero_mask.sum())
        assert hits / total > 0.5

    def test_rank_deficient_raises(self, fitter):
        X = np.ones((10, 2))
        with pytest.raises(SingularDesignError):
            fitter(X, np.ones(10), ScadParams(0.1))


class TestSolverAgreement:
    def test_objectives_agree_across_solvers(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            X = ar_design(60, 8, rng)
            y = X @ THETA0 + rng.standard_normal(60)
            p = ScadParams(float(rng.uniform(0.05, 0.3)), 3.7)
            lqa = fit_scad_lqa(X, y, p, tol=1e-10, max_iter=5000)
            cd = fit_scad_cd(X, y, p, tol=1e-10, max_iter=5000)
            a = scad_objective(X, y, lqa.theta_hat, p)
            b = scad_objective(X, y, cd.theta_hat, p)
            assert a == pytest.approx(b, abs=1e-4)

    def test_batch_matches_single_problem_runs(self):
        rng = np.random.default_rng(8)
        G = np.empty((20, 8, 8))
        b = np.empty((20, 8))
        lam = rng.uniform(0.05, 0.6, 20)
        for i in range(20):
            X = ar_design(60, 8, rng)
            y = X @ THETA0 + rng.standard_normal(60)
            G[i], b[i], _ = gram_bundle(X, y)
        for engine in (_lqa_batch, _cd_batch):
            whole, iters_w, conv_w = engine(G, b, 60, lam, 3.7, 1e-8, 100)
            for i in range(20):
                single, iters_s, conv_s = engine(
                    G[i : i + 1], b[i : i + 1], 60, lam[i : i + 1], 3.7, 1e-8, 100
                )
                np.testing.assert_array_equal(whole[i], single[0])
                assert iters_w[i] == iters_s[0]
                assert conv_w[i] == conv_s[0]


class TestHardThreshold:
    def test_huge_coefficients_survive(self):
        rng = np.random.default_rng(9)
        X = ar_design(100, 4, rng)
        y = X @ np.array([20.0, -15.0, 30.0, 12.0]) + rng.standard_normal(100)
        fit = fit_hard_threshold(X, y)
        assert fit.pattern.count() == 4

    def test_zero_response_gives_zero_fit(self):
        rng = np.random.default_rng(10)
        X = ar_design(50, 4, rng)
        fit = fit_hard_threshold(X, np.zeros(50))
        assert fit.pattern.all_zero
        np.testing.assert_array_equal(fit.theta_hat, np.zeros(4))

    def test_scalar_mean_threshold(self):
        # intercept design, ybar = 0.3, sigma_hat = 1: cutoff 16**-0.25 = 0.5
        n = 16
        X = np.ones((n, 1))
        spread = np.tile([1.0, -1.0], n // 2) * np.sqrt(15 / 16)
        y = 0.3 + spread
        assert np.mean(y) == pytest.approx(0.3)
        fit = fit_hard_threshold(X, y, exponent=0.25)
        assert fit.theta_hat[0] == 0.0
        # well above the cutoff the mean is kept
        y2 = 0.9 + spread
        fit2 = fit_hard_threshold(X, y2, exponent=0.25)
        assert fit2.theta_hat[0] == pytest.approx(0.9)

    def test_exponent_validation(self):
        X = np.ones((10, 1))
        for bad in (0.0, 0.5, 0.7):
            with pytest.raises(ValueError):
                fit_hard_threshold(X, np.ones(10), exponent=bad)


class TestHodgesScalar:
    def test_above_threshold(self):
        assert hodges_scalar(2.0, 16) == 2.0

    def test_below_threshold(self):
        assert hodges_scalar(0.3, 16) == 0.0

    def test_boundary_goes_to_zero(self):
        assert hodges_scalar(0.5, 16) == 0.0

    def test_needs_positive_n(self):
        with pytest.raises(ValueError):
            hodges_scalar(1.0, 0)


class TestBicSelect:
    def test_recovers_noiseless_pattern(self):
        rng = np.random.default_rng(11)
        X = ar_design(80, 8, rng)
        y = X @ THETA0
        fit = fit_bic_select(X, y)
        assert fit.pattern == sparsity_pattern(THETA0)
        np.testing.assert_allclose(fit.theta_hat, THETA0, atol=1e-8)

    def test_zero_response_picks_empty_model(self):
        rng = np.random.default_rng(12)
        X = ar_design(30, 5, rng)
        fit = fit_bic_select(X, np.zeros(30))
        assert fit.pattern.all_zero

    def test_k1_matches_two_model_comparison(self):
        rng = np.random.default_rng(13)
        for signal in (0.02, 1.5):
            X = rng.standard_normal((40, 1))
            y = signal * X[:, 0] + rng.standard_normal(40)
            fit = fit_bic_select(X, y)
            theta1 = float(X[:, 0] @ y / (X[:, 0] @ X[:, 0]))
            rss1 = float(np.sum((y - X[:, 0] * theta1) ** 2))
            rss0 = float(y @ y)
            bic0 = 40 * np.log(rss0 / 40)
            bic1 = 40 * np.log(rss1 / 40) + np.log(40)
            expect_keep = bic1 < bic0
            assert (fit.pattern.count() == 1) == expect_keep

    def test_dimension_guard(self):
        X = np.ones((30, 21)) + np.random.default_rng(14).standard_normal((30, 21))
        with pytest.raises(ValueError):
            fit_bic_select(X, np.ones(30))


class TestEquivariance:
    def test_column_permutation_permutes_fit(self):
        rng = np.random.default_rng(15)
        perm = rng.permutation(8)
        X = ar_design(60, 8, rng)
        y = X @ THETA0 + rng.standard_normal(60)
        fits = {
            "ls": lambda A, v: fit_least_squares(A, v).theta_hat,
            "scad_lqa": lambda A, v: fit_scad_lqa(A, v, ScadParams(0.2), tol=1e-12).theta_hat,
            "scad_cd": lambda A, v: fit_scad_cd(A, v, ScadParams(0.2), tol=1e-12).theta_hat,
            "hard": lambda A, v: fit_hard_threshold(A, v).theta_hat,
            "bic": lambda A, v: fit_bic_select(A, v).theta_hat,
        }
        for name, fitter in fits.items():
            base = fitter(X, y)
            permuted = fitter(X[:, perm], y)
            np.testing.assert_allclose(
                permuted, base[perm], atol=1e-6, err_msg=name
            )


class TestEstimatorConfig:
    def test_scad_requires_rule(self):
        with pytest.raises(ValueError):
            EstimatorConfig(kind="scad")

    def test_label_defaults_to_kind(self):
        assert EstimatorConfig(kind="ls").label == "ls"

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            EstimatorConfig(kind="ridge")

    def test_exponent_range(self):
        with pytest.raises(ValueError):
            EstimatorConfig(kind="hard_threshold", exponent=0.6)

import numpy as np
import pytest
from numpy.linalg import LinAlgError

from rwtq.diagnostics import (
    coverage_constant,
    effective_dimension,
    elliptical_potential_check,
    empirical_effective_dimension,
    information_gain,
    self_normalized_check,
)
from rwtq.kernels import KernelSpec, all_state_actions, encode_state_actions, gram_matrix, kernel_eval
from rwtq.krr import FactorizationError, KernelRidge, cholesky_with_jitter, krr_fit, krr_predict, posterior_variance


class TestKernels:
    def test_rbf_diagonal(self):
        assert kernel_eval(KernelSpec(), [0.3, 0.1], [0.3, 0.1]) == 1.0

    def test_delta(self):
        k = KernelSpec("tabular_delta")
        assert kernel_eval(k, [1.0], [2.0]) == 0.0
        assert kernel_eval(k, [1.0], [1.0]) == 1.0

    def test_rbf_at_lengthscale(self):
        k = KernelSpec("rbf", lengthscale=0.7)
        assert kernel_eval(k, [0.0, 0.0], [0.7, 0.0]) == pytest.approx(np.exp(-0.5))

    def test_gram_symmetric_psd(self, rng):
        X = rng.uniform(size=(30, 3))
        for spec in [KernelSpec(lengthscale=0.3), KernelSpec("tabular_delta"), KernelSpec.scaled_from(KernelSpec(), 0.5)]:
            G = gram_matrix(spec, X)
            assert np.max(np.abs(G - G.T)) <= 1e-12
            assert np.linalg.eigvalsh(G)[0] >= -1e-10

    def test_scaled_eigen_domination(self, rng):
        X = rng.uniform(size=(20, 2))
        base = KernelSpec(lengthscale=0.5)
        ev = np.linalg.eigvalsh(gram_matrix(base, X))
        ev_t = np.linalg.eigvalsh(gram_matrix(KernelSpec.scaled_from(base, 0.4), X))
        assert np.all(ev_t <= ev + 1e-12)

    def test_invalid(self):
        with pytest.raises(ValueError):
            KernelSpec("matern")
        with pytest.raises(ValueError):
            KernelSpec(lengthscale=0.0)

    def test_encoding(self):
        feats = np.array([[0.0, 0.5], [1.0, 0.25]])
        X = encode_state_actions(feats, [1, 0], [2, 0], 3)
        np.testing.assert_array_equal(X, [[1.0, 0.25, 0, 0, 1], [0.0, 0.5, 1, 0, 0]])
        allx = all_state_actions(feats, 3)
        np.testing.assert_array_equal(allx[1 * 3 + 2], X[0])


class TestKrr:
    def test_zero_targets(self, rng):
        X = rng.uniform(size=(5, 2))
        m = krr_fit(X, np.zeros(5), KernelSpec(), 1.0)
        np.testing.assert_array_equal(m.dual_coef_, 0.0)
        np.testing.assert_array_equal(m.predict(rng.uniform(size=(3, 2))), 0.0)

    def test_single_point(self):
        m = krr_fit([[0.2]], [2.0], KernelSpec(), 1.0)
        assert krr_predict(m, [0.2]) == pytest.approx(1.0)

    def test_dense_solve(self, rng):
        X, y = rng.uniform(size=(5, 3)), rng.standard_normal(5)
        spec = KernelSpec(lengthscale=0.8)
        m = krr_fit(X, y, spec, 0.5)
        Xq = rng.uniform(size=(4, 3))
        alpha = np.linalg.solve(gram_matrix(spec, X) + 0.5 * np.eye(5), y)
        np.testing.assert_allclose(m.predict(Xq), gram_matrix(spec, Xq, X) @ alpha, atol=1e-8)
        resid = (gram_matrix(spec, X) + 0.5 * np.eye(5)) @ m.dual_coef_ - y
        assert np.max(np.abs(resid)) <= 1e-8 * (1 + np.max(np.abs(y)))

    def test_interpolation_limit(self, rng):
        X, y = rng.uniform(size=(4, 2)), rng.standard_normal(4)
        m = krr_fit(X, y, KernelSpec(lengthscale=0.3), 1e-9)
        np.testing.assert_allclose(m.predict(X), y, atol=1e-5)

    def test_empty_model(self):
        m = krr_fit(np.zeros((0, 2)), [], KernelSpec(), 1.0)
        assert krr_predict(m, [0.1, 0.2]) == 0.0
        assert posterior_variance(m, [0.1, 0.2]) == pytest.approx(1.0)

    def test_hand_solve(self):
        X = np.array([[0.0], [1.0], [3.0]])
        y = np.array([1.0, -1.0, 2.0])
        spec = KernelSpec(lengthscale=1.0)
        K = np.exp(-0.5 * (X - X.T) ** 2)
        alpha = np.linalg.inv(K + 2.0 * np.eye(3)) @ y
        kq = np.exp(-0.5 * (0.5 - X.ravel()) ** 2)
        assert krr_predict(krr_fit(X, y, spec, 2.0), [0.5]) == pytest.approx(kq @ alpha, abs=1e-12)

    def test_variance_scalar_case(self):
        m = krr_fit([[0.4]], [1.0], KernelSpec(), 1.0)
        assert posterior_variance(m, [0.4]) == pytest.approx(0.5)

    def test_variance_prior_bound(self, rng):
        X = rng.uniform(size=(10, 2))
        m = krr_fit(X, rng.standard_normal(10), KernelSpec(scale=2.0), 0.5)
        v = m.posterior_variance(rng.uniform(size=(20, 2)))
        assert np.all(v >= 0) and np.all(v <= 2.0 / 0.5 + 1e-12)

    def test_explicit_features(self, rng):
        # finite 3-dim map through the delta kernel on three symbols
        idx = rng.integers(3, size=7)
        y = rng.standard_normal(7)
        m = krr_fit(idx[:, None].astype(float), y, KernelSpec("tabular_delta"), 0.7)
        Phi = np.eye(3)[idx]
        Lam = Phi.T @ Phi + 0.7 * np.eye(3)
        w = np.linalg.solve(Lam, Phi.T @ y)
        Xq = np.arange(3.0)[:, None]
        np.testing.assert_allclose(m.predict(Xq), w, atol=1e-8)
        np.testing.assert_allclose(m.posterior_variance(Xq), np.diag(np.linalg.inv(Lam)), atol=1e-8)

    def test_extend_matches_fit(self, rng):
        X, y = rng.uniform(size=(9, 2)), rng.standard_normal(9)
        spec = KernelSpec(lengthscale=0.4)
        grown = krr_fit(X[:4], y[:4], spec, 1.0).extend(X[4:], y)
        full = krr_fit(X, y, spec, 1.0)
        np.testing.assert_allclose(grown.chol_, full.chol_, atol=1e-10)
        np.testing.assert_allclose(grown.dual_coef_, full.dual_coef_, atol=1e-10)

    def test_refit_targets(self, rng):
        X = rng.uniform(size=(6, 2))
        y1, y2 = rng.standard_normal(6), rng.standard_normal(6)
        m = krr_fit(X, y1, KernelSpec(), 1.0).refit_targets(y2)
        np.testing.assert_allclose(m.dual_coef_, krr_fit(X, y2, KernelSpec(), 1.0).dual_coef_, atol=1e-12)

    def test_ridge_must_be_positive(self):
        with pytest.raises(ValueError):
            KernelRidge(ridge=0.0).fit([[0.0]], [1.0])

    def test_jitter_escalation(self):
        M = np.ones((3, 3))  # rank one, singular
        L, jitter = cholesky_with_jitter(M)
        assert 1e-10 <= jitter <= 1e-6
        np.testing.assert_allclose(L @ L.T, M + jitter * np.eye(3), atol=1e-12)

    def test_factorization_failure(self):
        with pytest.raises(FactorizationError) as err:
            cholesky_with_jitter(-np.eye(2))
        assert isinstance(err.value, LinAlgError)
        assert "condition number" in str(err.value)

    def test_sklearn_params(self):
        m = KernelRidge(ridge=2.0)
        assert m.get_params()["ridge"] == 2.0
        assert m.set_params(ridge=3.0).ridge == 3.0

    def test_variance_monotone(self, rng):
        X, Xq = rng.uniform(size=(12, 2)), rng.uniform(size=(8, 2))
        spec = KernelSpec(lengthscale=0.5)
        prev = np.full(8, np.inf)
        for n in range(13):
            v = krr_fit(X[:n], np.zeros(n), spec, 1.0).posterior_variance(Xq)
            assert np.all(v <= prev + 1e-10)
            prev = v


class TestDiagnostics:
    def test_info_gain_zero(self):
        assert information_gain(np.zeros((3, 3)), 1.0) == 0.0

    def test_info_gain_identity(self):
        assert information_gain(np.eye(2), 1.0) == pytest.approx(2 * np.log(2))

    def test_info_gain_eigen_formula(self, rng):
        for _ in range(20):
            A = rng.standard_normal((5, 5))
            G = A @ A.T
            lam = rng.uniform(0.2, 2.0)
            mu = np.linalg.eigvalsh(G)
            assert abs(information_gain(G, lam) - np.sum(np.log1p(mu / lam))) <= 1e-10

    def test_info_gain_rejects_non_psd(self):
        with pytest.raises(ValueError):
            information_gain(np.diag([1.0, -1.0]), 1.0)

    def test_info_gain_matches_model(self, rng):
        X = rng.uniform(size=(7, 2))
        m = krr_fit(X, np.zeros(7), KernelSpec(), 0.8)
        assert m.information_gain() == pytest.approx(information_gain(gram_matrix(KernelSpec(), X), 0.8))

    def test_effective_dimension_cases(self):
        assert effective_dimension([0.0, 0.0], 1.0) == 0.0
        assert effective_dimension([2.5], 2.5) == pytest.approx(0.5)
        assert effective_dimension([4.0, 1.0], 1.0) == pytest.approx(1.3)
        with pytest.raises(ValueError):
            effective_dimension([-1.0], 1.0)

    def test_effective_dimension_bounds(self, rng):
        mu = np.concatenate([rng.uniform(0, 5, 6), np.zeros(3)])
        d = effective_dimension(mu, 0.3)
        assert 0 <= d <= 6

    def test_empirical_effective_dimension(self, rng):
        X = rng.uniform(size=(10, 2))
        G = gram_matrix(KernelSpec(), X)
        mu = np.linalg.eigvalsh(G) / 10
        assert empirical_effective_dimension(G, 0.1) == pytest.approx(np.sum(mu / (mu + 0.1)))

    def test_coverage_constant(self):
        assert coverage_constant([0.01, 0.04], 50) == pytest.approx(2.0)
        assert coverage_constant([], 10) == 0.0

    def test_self_normalized_zero_noise(self, rng):
        lhs, rhs, ok = self_normalized_check(rng.standard_normal((5, 3)), np.zeros(5), np.eye(3))
        assert lhs == 0.0 and rhs == 0.0 and ok

    def test_self_normalized_scalar(self):
        lhs, rhs, ok = self_normalized_check([[1.0, 0.0]], [1.0], np.eye(2))
        assert lhs == pytest.approx(1 / np.sqrt(2)) and rhs == 1.0 and ok

    def test_elliptical_one_step(self):
        total, bound, ok = elliptical_potential_check([[1.0, 0.0]], 1.0)
        assert total == pytest.approx(1.0) and bound == pytest.approx(np.sqrt(2 * np.log(2))) and ok

    def test_elliptical_zero(self):
        total, bound, ok = elliptical_potential_check(np.zeros((4, 2)), 1.0)
        assert total == 0.0 and bound == 0.0 and ok

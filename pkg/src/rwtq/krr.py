"""Dual-form kernel ridge regression with posterior variance."""
from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .kernels import KernelSpec, gram_matrix

JITTER_START = 1e-10
JITTER_MAX = 1e-6


class FactorizationError(LinAlgError):
    pass


def cholesky_with_jitter(M: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``M``; escalates diagonal jitter 1e-10 -> 1e-6 on failure."""
    if len(M) == 0:
        return np.zeros((0, 0)), 0.0
    try:
        return cholesky(M, lower=True), 0.0
    except LinAlgError:
        pass
    jitter = JITTER_START
    eye = np.eye(len(M))
    while jitter <= JITTER_MAX:
        try:
            return cholesky(M + jitter * eye, lower=True), jitter
        except LinAlgError:
            jitter *= 10
    cond = np.linalg.cond(M) if len(M) else 0.0
    raise FactorizationError(
        f"Cholesky failed after jitter {JITTER_MAX:g} (n={len(M)}, condition number {cond:.3e})"
    )


class KernelRidge(RegressorMixin, BaseEstimator):
    """Kernel ridge regression solved through a cached Cholesky factor.

    Minimises ``sum_i (f(x_i) - y_i)^2 + ridge * ||f||_k^2``; the solution is
    ``f(x) = k(x, X) @ alpha`` with ``(K + ridge I) alpha = y``. The same factor
    yields the feature-space uncertainty ``phi(x)^T (Lambda + ridge I)^{-1} phi(x)``
    through :meth:`posterior_variance`.

    Parameters
    ----------
    kernel : KernelSpec, default=None
        Kernel; ``None`` means a unit RBF.
    ridge : float, default=1.0
        Regularisation strength, must be positive.

    Attributes
    ----------
    X_fit_ : ndarray of shape (n_samples, n_features)
    dual_coef_ : ndarray of shape (n_samples,)
    chol_ : ndarray of shape (n_samples, n_samples)
        Lower Cholesky factor of ``K + ridge I`` (plus jitter, if any).
    jitter_ : float
    """

    def __init__(self, kernel: KernelSpec | None = None, ridge: float = 1.0):
        self.kernel = kernel
        self.ridge = ridge

    @property
    def kernel_(self) -> KernelSpec:
        return self.kernel if self.kernel is not None else KernelSpec()

    def fit(self, X, y):
        if self.ridge <= 0:
            raise ValueError(f"ridge must be positive, got {self.ridge}")
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim == 1:
            X = X.reshape(len(y), -1) if len(y) else X.reshape(0, 0)
        if len(X) != len(y):
            raise ValueError(f"X has {len(X)} rows but y has {len(y)}")
        if len(y):
            X = check_array(X)
            if not np.all(np.isfinite(y)):
                raise ValueError("targets must be finite")
        self.X_fit_ = X
        self.n_features_in_ = X.shape[1] if X.ndim == 2 else 0
        K = gram_matrix(self.kernel_, X)
        self.chol_, self.jitter_ = cholesky_with_jitter(K + self.ridge * np.eye(len(y)))
        self.dual_coef_ = self.solve(y)
        self.y_fit_ = y
        return self

    def solve(self, y) -> np.ndarray:
        """``(K + ridge I)^{-1} y`` with the cached factor."""
        check_is_fitted(self, "chol_")
        y = np.asarray(y, dtype=float)
        if len(y) == 0:
            return np.zeros(0)
        return cho_solve((self.chol_, True), y)

    def refit_targets(self, y):
        """Swap in new targets on the same design without refactorising."""
        check_is_fitted(self, "chol_")
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != len(self.X_fit_):
            raise ValueError("target length does not match the fitted design")
        self.dual_coef_ = self.solve(y)
        self.y_fit_ = y
        return self

    def extend(self, X_new, y):
        """Append design rows, updating the Cholesky factor in O(n^2) per row.

        ``y`` is the full target vector for the enlarged design.
        """
        check_is_fitted(self, "chol_")
        X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
        if len(X_new) == 0:
            return self.refit_targets(y)
        X_old = self.X_fit_ if len(self.X_fit_) else np.zeros((0, X_new.shape[1]))
        n, m = len(X_old), len(X_new)
        kern = self.kernel_
        B = gram_matrix(kern, X_old, X_new)
        C = gram_matrix(kern, X_new) + (self.ridge + self.jitter_) * np.eye(m)
        L = np.zeros((n + m, n + m))
        L[:n, :n] = self.chol_
        if n:
            W = solve_triangular(self.chol_, B, lower=True)
            L[n:, :n] = W.T
            C = C - W.T @ W
        L[n:, n:], extra = cholesky_with_jitter(C)
        if extra:
            # fall back to a clean refactorisation at the escalated jitter
            return self.fit(np.vstack([X_old, X_new]), y)
        self.chol_ = L
        self.X_fit_ = np.vstack([X_old, X_new])
        self.n_features_in_ = self.X_fit_.shape[1]
        return self.refit_targets(y)

    def cross_gram(self, X) -> np.ndarray:
        check_is_fitted(self, "chol_")
        return gram_matrix(self.kernel_, X, self.X_fit_)

    def predict(self, X, cross_gram=None):
        check_is_fitted(self, "dual_coef_")
        Kq = self.cross_gram(X) if cross_gram is None else cross_gram
        if Kq.shape[1] == 0:
            return np.zeros(Kq.shape[0])
        return Kq @ self.dual_coef_

    def posterior_variance(self, X, cross_gram=None):
        """``(k(x,x) - k_n(x)^T (K + ridge I)^{-1} k_n(x)) / ridge``, clamped at 0.

        Lies in ``[0, k(x,x) / ridge]``. Negative values below -1e-10 signal a
        numerical breakdown and raise.
        """
        check_is_fitted(self, "chol_")
        Kq = self.cross_gram(X) if cross_gram is None else cross_gram
        prior = self.kernel_.diagonal
        if Kq.shape[1] == 0:
            return np.full(Kq.shape[0], prior / self.ridge)
        W = solve_triangular(self.chol_, Kq.T, lower=True)
        var = (prior - np.sum(W * W, axis=0)) / self.ridge
        if np.any(var < -1e-10):
            raise FactorizationError(f"negative posterior variance {var.min():.3e}")
        return np.maximum(var, 0.0)

    def log_det(self) -> float:
        """``log det(K + ridge I)`` from the cached factor."""
        check_is_fitted(self, "chol_")
        return float(2.0 * np.sum(np.log(np.diag(self.chol_))))

    def information_gain(self) -> float:
        """``log det(I + K / ridge)`` for the fitted design."""
        return self.log_det() - len(self.X_fit_) * np.log(self.ridge)


def krr_fit(X, y, kernel: KernelSpec, ridge: float) -> KernelRidge:
    return KernelRidge(kernel=kernel, ridge=ridge).fit(X, y)


def krr_predict(model: KernelRidge, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(model.predict(x[None, :])[0])
    return model.predict(x)


def posterior_variance(model: KernelRidge, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(model.posterior_variance(x[None, :])[0])
    return model.posterior_variance(x)

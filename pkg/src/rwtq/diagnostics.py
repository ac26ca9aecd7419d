"""Kernel complexity measures and deterministic checkers for the concentration steps."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

PSD_TOL = 1e-10


@dataclass
class ComplexityDiagnostics:
    n: int
    effective_dimension: float
    information_gain: float
    coverage_constant: float
    alpha0: float = 0.5
    alpha1: float = 0.5
    beta0: float = 0.25
    beta1: float = 0.5

    def to_record(self) -> dict:
        return asdict(self)


def _check_psd(G: np.ndarray) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("Gram matrix must be square")
    if G.size == 0:
        return G
    scale = max(1.0, float(np.max(np.abs(G))))
    if np.max(np.abs(G - G.T)) > 1e-12 * scale:
        raise ValueError("Gram matrix is not symmetric")
    if np.linalg.eigvalsh(G)[0] < -PSD_TOL * scale:
        raise ValueError("Gram matrix is not positive semi-definite")
    return G


def information_gain(gram, ridge: float) -> float:
    """``log det(I + G / ridge)`` for a realised Gram matrix ``G``."""
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    G = _check_psd(gram)
    if G.size == 0:
        return 0.0
    c, _ = cho_factor(np.eye(len(G)) + G / ridge, lower=True)
    return float(2.0 * np.sum(np.log(np.diag(c))))


def effective_dimension(eigenvalues, ridge: float) -> float:
    """``sum_i mu_i / (mu_i + ridge)``."""
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    mu = np.asarray(eigenvalues, dtype=float).ravel()
    if np.any(mu < -PSD_TOL):
        raise ValueError("eigenvalues must be non-negative")
    mu = np.maximum(mu, 0.0)
    return float(np.sum(mu / (mu + ridge)))


def empirical_effective_dimension(gram, ridge: float) -> float:
    """Effective dimension of the empirical operator ``K / n``."""
    G = _check_psd(gram)
    if G.size == 0:
        return 0.0
    return effective_dimension(np.linalg.eigvalsh(G) / len(G), ridge)


def coverage_constant(variances, n_source: int) -> float:
    """Smallest ``C`` with ``variance <= C / n_source`` at every query."""
    v = np.asarray(variances, dtype=float)
    if v.size == 0 or n_source == 0:
        return 0.0
    return float(n_source * np.max(v))


def self_normalized_check(phis, eps, lambda0) -> tuple[float, float, bool]:
    """Compare ``||S_t||_{Lambda_t^{-1}}`` with ``||eps||_2``.

    ``S_t = sum_s phi_s eps_s`` and ``Lambda_t = Lambda_0 + sum_s phi_s phi_s^T``.
    The inequality holds for every sequence once ``Lambda_0`` is positive definite.
    """
    Phi = np.atleast_2d(np.asarray(phis, dtype=float))
    e = np.asarray(eps, dtype=float).ravel()
    L0 = np.atleast_2d(np.asarray(lambda0, dtype=float))
    if Phi.shape[0] != len(e) or Phi.shape[1] != L0.shape[0]:
        raise ValueError("dimension mismatch between phis, eps and Lambda_0")
    Lt = L0 + Phi.T @ Phi
    S = Phi.T @ e
    lhs = float(np.sqrt(max(S @ cho_solve(cho_factor(Lt), S), 0.0)))
    rhs = float(np.linalg.norm(e))
    return lhs, rhs, lhs <= rhs + 1e-9


def elliptical_potential_check(phis, ridge: float) -> tuple[float, float, bool]:
    """Compare ``sum_n ||phi_n||_{Lambda_n^{-1}}`` with ``sqrt(2 N log det(I + Sigma_N / ridge))``.

    ``Lambda_n = ridge I + sum_{i<n} phi_i phi_i^T``. Requires ``||phi_n|| <= 1``
    and ``ridge >= 1`` for the bound to be guaranteed.
    """
    Phi = np.atleast_2d(np.asarray(phis, dtype=float))
    N, d = Phi.shape
    Lam = ridge * np.eye(d)
    total = 0.0
    for phi in Phi:
        total += float(np.sqrt(max(phi @ np.linalg.solve(Lam, phi), 0.0)))
        Lam += np.outer(phi, phi)
    _, logdet = np.linalg.slogdet(Lam / ridge)
    bound = float(np.sqrt(2.0 * N * max(logdet, 0.0)))
    return total, bound, total <= bound + 1e-9

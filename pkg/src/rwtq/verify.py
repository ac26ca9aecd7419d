"""Fixed-seed property suites exposed through ``rwtq verify``."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .align import DensityRatioProvider, rwt_backup_exact, target_backup
from .data import ReplayBuffer
from .diagnostics import elliptical_potential_check, information_gain, self_normalized_check
from .env import random_mdp, related_source, rollout, two_state_benchmark, uniform_policy, value_iteration
from .kernels import KernelSpec, gram_matrix
from .krr import KernelRidge
from .learners import KernelOFUAgent


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    failure: dict | None = field(default=None)


# ---------------------------------------------------------------- alignment

def random_mdp_pair(rng: np.random.Generator, max_states=10, max_actions=4, max_horizon=4, shared=False):
    S = int(rng.integers(1, max_states + 1))
    A = int(rng.integers(1, max_actions + 1))
    H = int(rng.integers(1, max_horizon + 1))
    target = random_mdp(rng, S, A, H, discount=float(rng.uniform(0.5, 1.0)))
    source = related_source(target, rng, reward_shift_std=1.0, resample_transitions=not shared)
    return target, source


def check_alignment_identity(num_pairs=20, num_values=5, tol=1e-10, seed=0) -> CheckResult:
    """target backup - aligned source backup == R0 - Rm for every bounded V."""
    rng = np.random.default_rng(seed)
    worst, failure = 0.0, None
    for i in range(num_pairs):
        target, source = random_mdp_pair(rng)
        prov = DensityRatioProvider.exact(target, source)
        for _ in range(num_values):
            for h in range(target.horizon):
                V = rng.uniform(-5.0, 5.0, target.num_states)
                gap = target_backup(target, V, h) - rwt_backup_exact(source, prov, V, h)
                err = float(np.max(np.abs(gap - (target.rewards[h] - source.rewards[h]))))
                worst = max(worst, err)
                if err > tol and failure is None:
                    failure = {"pair": i, "stage": h, "error": err, "V": V.tolist()}
    return CheckResult("alignment_identity", failure is None, f"max residual {worst:.2e} over {num_pairs} pairs", failure)


def check_identity_provider(num_pairs=20, seed=1) -> CheckResult:
    """On shared dynamics the identity ratio reproduces the exact-ratio backup."""
    rng = np.random.default_rng(seed)
    failure = None
    for i in range(num_pairs):
        target, source = random_mdp_pair(rng, shared=True)
        V = rng.uniform(-5.0, 5.0, target.num_states)
        for h in range(target.horizon):
            a = rwt_backup_exact(source, DensityRatioProvider.identity(), V, h)
            b = rwt_backup_exact(source, DensityRatioProvider.exact(target, source), V, h)
            if not np.array_equal(a, b) and failure is None:
                failure = {"pair": i, "stage": h, "max_diff": float(np.max(np.abs(a - b)))}
    return CheckResult("identity_provider_shared_dynamics", failure is None, f"{num_pairs} pairs", failure)


# ---------------------------------------------------------------- lemmas

def check_self_normalized(num_instances=1000, seed=2) -> CheckResult:
    rng = np.random.default_rng(seed)
    failure = None
    for i in range(num_instances):
        d, t = int(rng.integers(1, 6)), int(rng.integers(1, 51))
        phis, eps = rng.standard_normal((t, d)), rng.standard_normal(t)
        M = rng.standard_normal((d, d))
        lam0 = M @ M.T + rng.uniform(0.1, 2.0) * np.eye(d)
        lhs, rhs, ok = self_normalized_check(phis, eps, lam0)
        if not ok and failure is None:
            failure = {"instance": i, "lhs": lhs, "rhs": rhs, "phis": phis.tolist(), "eps": eps.tolist(), "lambda0": lam0.tolist()}
    return CheckResult("self_normalized_bound", failure is None, f"{num_instances} instances", failure)


def check_elliptical(num_sequences=500, seed=3) -> CheckResult:
    rng = np.random.default_rng(seed)
    failure = None
    for i in range(num_sequences):
        d, N = int(rng.integers(1, 6)), int(rng.integers(1, 101))
        phis = rng.standard_normal((N, d))
        phis /= np.maximum(np.linalg.norm(phis, axis=1, keepdims=True), 1.0) * rng.uniform(1.0, 3.0, (N, 1))
        total, bound, ok = elliptical_potential_check(phis, 1.0)
        if not ok and failure is None:
            failure = {"sequence": i, "sum": total, "bound": bound, "phis": phis.tolist()}
    return CheckResult("elliptical_potential", failure is None, f"{num_sequences} sequences", failure)


# ---------------------------------------------------------------- krr

def check_krr_dense(num_designs=50, tol=1e-8, seed=4) -> CheckResult:
    """Dual predictions and variances against a dense solve (rbf)."""
    rng = np.random.default_rng(seed)
    worst, failure = 0.0, None
    for i in range(num_designs):
        n, d = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        X, y, Xq = rng.uniform(-1, 1, (n, d)), rng.standard_normal(n), rng.uniform(-1, 1, (5, d))
        spec = KernelSpec("rbf", lengthscale=float(rng.uniform(0.3, 2.0)))
        lam = float(rng.uniform(0.1, 2.0))
        model = KernelRidge(spec, lam).fit(X, y)
        K, Kq = gram_matrix(spec, X), gram_matrix(spec, Xq, X)
        M = K + lam * np.eye(n)
        pred = Kq @ np.linalg.solve(M, y)
        var = (spec.diagonal - np.einsum("ij,ji->i", Kq, np.linalg.solve(M, Kq.T))) / lam
        err = max(np.max(np.abs(model.predict(Xq) - pred)), np.max(np.abs(model.posterior_variance(Xq) - var)))
        worst = max(worst, float(err))
        if err > tol and failure is None:
            failure = {"design": i, "X": X.tolist(), "y": y.tolist(), "ridge": lam, "error": float(err)}
    return CheckResult("krr_dense_solve", failure is None, f"max error {worst:.2e}", failure)


def check_krr_features(num_designs=50, tol=1e-8, seed=5) -> CheckResult:
    """Delta kernel against the explicit one-hot feature ridge solution."""
    rng = np.random.default_rng(seed)
    worst, failure = 0.0, None
    for i in range(num_designs):
        n, m = int(rng.integers(1, 9)), int(rng.integers(1, 5))
        idx = rng.integers(m, size=n)
        X, y = idx[:, None].astype(float), rng.standard_normal(n)
        scale, lam = float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.1, 2.0))
        model = KernelRidge(KernelSpec("tabular_delta", scale=scale), lam).fit(X, y)
        Phi = np.sqrt(scale) * np.eye(m)[idx]
        Lam = Phi.T @ Phi + lam * np.eye(m)
        Q = np.sqrt(scale) * np.eye(m)
        pred = Q @ np.linalg.solve(Lam, Phi.T @ y)
        var = np.einsum("ij,ji->i", Q, np.linalg.solve(Lam, Q.T))
        Xq = np.arange(m, dtype=float)[:, None]
        err = max(np.max(np.abs(model.predict(Xq) - pred)), np.max(np.abs(model.posterior_variance(Xq) - var)))
        worst = max(worst, float(err))
        if err > tol and failure is None:
            failure = {"design": i, "index": idx.tolist(), "y": y.tolist(), "ridge": lam, "error": float(err)}
    return CheckResult("krr_explicit_features", failure is None, f"max error {worst:.2e}", failure)


def check_krr_monotone(num_instances=20, seed=6) -> CheckResult:
    """Appending design points never raises variance nor lowers information gain."""
    rng = np.random.default_rng(seed)
    failure = None
    for i in range(num_instances):
        d = int(rng.integers(1, 4))
        X, Xq = rng.uniform(-1, 1, (10, d)), rng.uniform(-1, 1, (6, d))
        spec = KernelSpec("rbf", lengthscale=float(rng.uniform(0.3, 2.0)))
        prev_var, prev_gain = np.full(len(Xq), np.inf), -np.inf
        for n in range(11):
            var = KernelRidge(spec, 1.0).fit(X[:n], np.zeros(n)).posterior_variance(Xq)
            gain = information_gain(gram_matrix(spec, X[:n]), 1.0)
            if (np.any(var > prev_var + 1e-10) or gain < prev_gain - 1e-10) and failure is None:
                failure = {"instance": i, "n": n, "X": X.tolist()}
            prev_var, prev_gain = var, gain
    return CheckResult("krr_monotone_growth", failure is None, f"{num_instances} instances", failure)


# ---------------------------------------------------------------- optimism

def optimism_frequency(num_seeds=50, episodes=100, multiplier=2.0, source_episodes=50) -> tuple[float, list[dict]]:
    """Share of episodes whose values dominate ``Q*`` everywhere on the two-state benchmark."""
    hits, misses = [], []
    for seed in range(num_seeds):
        target, source = two_state_benchmark(seed)
        qstar, _ = value_iteration(target)
        rng = np.random.default_rng(10_000 + seed)
        buf = ReplayBuffer(source.horizon, task_id=1)
        for _ in range(source_episodes):
            buf.add_trajectory(rollout(source, uniform_policy(source.num_actions), rng, task_id=1))

        def record(agent, n, seed=seed):
            ok = bool(np.all(agent.Q_ >= qstar - 1e-12))
            hits.append(ok)
            if not ok:
                misses.append({"seed": seed, "episode": n})

        agent = KernelOFUAgent(c_source=multiplier, c_target=multiplier, episodes=episodes, random_state=seed)
        agent.fit(target, [buf], DensityRatioProvider.exact(target, source), callback=record)
    return float(np.mean(hits)), misses


def check_optimism(num_seeds=50, episodes=100, threshold=0.95) -> CheckResult:
    freq, misses = optimism_frequency(num_seeds, episodes)
    failure = {"frequency": freq, "misses": misses[:20]} if freq < threshold else None
    return CheckResult("optimism_frequency", failure is None, f"frequency {freq:.3f} (need >= {threshold})", failure)


SUITES: dict[str, list[Callable[[], CheckResult]]] = {
    "alignment": [check_alignment_identity, check_identity_provider],
    "lemmas": [check_self_normalized, check_elliptical],
    "krr": [check_krr_dense, check_krr_features, check_krr_monotone],
    "optimism": [check_optimism],
}


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; valid suites: {', '.join(SUITES)}")
    return [check() for check in SUITES[name]]

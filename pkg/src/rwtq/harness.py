"""Experiment orchestration: source collection, seeded runs and aggregation."""
from __future__ import annotations

import platform
from dataclasses import dataclass, field
from typing import Sequence

import joblib
import numpy as np

from . import __version__
from .align import DensityRatioProvider
from .config import ExperimentConfig
from .data import ReplayBuffer
from .env import EpisodicMdp, GridWorldSpec, build_random_reward_grid, evaluate_policy, rollout, uniform_policy, value_iteration
from .io import load_buffers, load_tasks, mdp_hash
from .kernels import KernelSpec
from .learners import KernelOFUAgent, TabularQAgent
from .records import EpisodeRecord


def grid_spec(config: ExperimentConfig) -> GridWorldSpec:
    return GridWorldSpec(
        dims=config.dims,
        side=config.side,
        horizon=config.horizon,
        num_actions=config.num_actions,
        target_reward_std=config.target_reward_std,
        delta_std=config.delta_std,
        num_sources=config.num_sources,
        seed=config.env_seed,
        discount=config.discount,
        normalize_rewards=config.normalize_rewards,
    )


def build_environment(config: ExperimentConfig) -> tuple[EpisodicMdp, list[EpisodicMdp]]:
    """Load ``env_path`` when given, else generate the grid from the config."""
    if config.env_path:
        return load_tasks(config.env_path)
    return build_random_reward_grid(grid_spec(config))


def collect_source_pool(sources: Sequence[EpisodicMdp], episodes: int, rng: np.random.Generator) -> list[ReplayBuffer]:
    """Uniform-random rollouts on each source; buffer ``m`` is tagged ``task_id = m + 1``."""
    if episodes < 0:
        raise ValueError("episodes must be >= 0")
    pools = []
    for m, task in enumerate(sources):
        buf = ReplayBuffer(task.horizon, task_id=m + 1)
        policy = uniform_policy(task.num_actions)
        for _ in range(episodes):
            buf.add_trajectory(rollout(task, policy, rng, task_id=m + 1))
        pools.append(buf)
    return pools


def compute_regret(target: EpisodicMdp, policy, vstar: np.ndarray | None = None) -> float:
    """``V*_0(s0) - V^pi_0(s0)`` by exact backward induction.

    ``vstar`` (the optimal value table) may be passed in to avoid recomputing it.
    """
    if vstar is None:
        _, vstar = value_iteration(target)
    s0 = target.initial_state
    return float(vstar[0, s0] - evaluate_policy(target, policy)[0, s0])


def make_providers(config: ExperimentConfig, target: EpisodicMdp, sources: Sequence[EpisodicMdp]):
    if config.ratio == "exact":
        return [DensityRatioProvider.exact(target, s) for s in sources]
    return [DensityRatioProvider.identity()] * len(sources)


def make_kernels(config: ExperimentConfig) -> tuple[KernelSpec, KernelSpec]:
    if config.kernel == "tabular_delta":
        base = KernelSpec("tabular_delta", scale=config.kernel_scale)
    else:
        base = KernelSpec(config.kernel, lengthscale=config.lengthscale, scale=config.kernel_scale)
    if config.tilde_kind == "rbf":
        tilde = KernelSpec("rbf", lengthscale=config.tilde_lengthscale, scale=config.kernel_scale)
    else:
        tilde = KernelSpec.scaled_from(base, config.tilde_factor)
    return base, tilde


def make_agent(config: ExperimentConfig, random_state=None):
    """Unfitted learner for ``config.variant``."""
    if config.variant == "rwt_kernel_ofu":
        kernel, kernel_tilde = make_kernels(config)
        return KernelOFUAgent(
            kernel=kernel,
            kernel_tilde=kernel_tilde,
            ridge=config.ridge,
            ridge_tilde=config.ridge_tilde,
            c_source=config.c_source,
            c_target=config.c_target,
            bonus_mode=config.bonus_mode,
            alpha0=config.alpha0,
            alpha1=config.alpha1,
            beta1=config.beta1,
            clip=config.clip,
            init_value=config.init_value,
            episodes=config.episodes,
            schedule=config.schedule,
            eps_start=config.eps_start,
            eps_end=config.eps_end,
            record_diagnostics=config.record_diagnostics,
            divergence_factor=config.divergence_factor,
            random_state=random_state,
        )
    variant = "rwt" if config.variant == "rwt_tabular" else config.variant
    return TabularQAgent(
        variant=variant,
        episodes=config.episodes,
        lr=config.lr,
        batch_size=config.batch_size,
        stage1=config.stage1,
        ridge=config.ridge,
        schedule=config.schedule,
        eps_start=config.eps_start,
        eps_end=config.eps_end,
        init_value=0.0 if config.init_value is None else config.init_value,
        divergence_factor=config.divergence_factor,
        random_state=random_state,
    )


@dataclass
class SeedRun:
    seed: int
    records: list[EpisodeRecord]
    agent: object = None
    diagnostics: list[dict] = field(default_factory=list)

    @property
    def returns(self) -> np.ndarray:
        return np.array([r.ret for r in self.records])

    @property
    def regrets(self) -> np.ndarray:
        return np.array([r.regret for r in self.records])


def run_seed(
    config: ExperimentConfig,
    seed: int,
    env: tuple[EpisodicMdp, list[EpisodicMdp]] | None = None,
    keep_agent: bool = False,
) -> SeedRun:
    """One full run. ``seed`` drives source collection and the agent; the
    environment itself is fixed by ``env_seed`` (or ``env_path``).
    """
    target, sources = env if env is not None else build_environment(config)
    source_ss, agent_ss = np.random.SeedSequence(seed).spawn(2)
    agent = make_agent(config, agent_ss)
    providers = make_providers(config, target, sources)
    if config.variant == "target_only":
        agent.fit(target)
    elif config.kappa is not None:
        agent.fit(target, providers=providers, source_tasks=sources, kappa=config.kappa)
    else:
        if config.source_path:
            pools = load_buffers(config.source_path)
        else:
            pools = collect_source_pool(sources, config.source_episodes, np.random.default_rng(source_ss))
        agent.fit(target, pools, providers)
    diags = list(getattr(agent, "diagnostics_", []))
    return SeedRun(seed, agent.records_, agent if keep_agent else None, diags)


def run_episode_loop(config: ExperimentConfig, seed: int) -> list[EpisodeRecord]:
    return run_seed(config, seed).records


@dataclass
class SeedAggregate:
    """Pointwise mean and standard error (``ddof = 1``) across seeds."""

    mean: np.ndarray
    stderr: np.ndarray
    num_seeds: int


def aggregate_seeds(runs: Sequence[Sequence[float]]) -> SeedAggregate:
    curves = [np.asarray(r, dtype=float) for r in runs]
    if not curves:
        raise ValueError("need at least one run")
    if len({len(c) for c in curves}) != 1:
        raise ValueError(f"runs have different lengths: {sorted({len(c) for c in curves})}")
    X = np.stack(curves)
    k = len(X)
    stderr = X.std(axis=0, ddof=1) / np.sqrt(k) if k > 1 else np.zeros(X.shape[1])
    return SeedAggregate(X.mean(axis=0), stderr, k)


def final_window_stats(runs: Sequence[SeedRun], window: int) -> tuple[float, float]:
    """Mean and standard error across seeds of the per-seed mean return over the last ``window`` episodes."""
    vals = np.array([r.returns[-window:].mean() for r in runs])
    se = vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else 0.0
    return float(vals.mean()), float(se)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list[SeedRun]
    env_hash: str

    @property
    def returns(self) -> SeedAggregate:
        return aggregate_seeds([r.returns for r in self.runs])

    @property
    def cum_regret(self) -> SeedAggregate:
        return aggregate_seeds([np.cumsum(r.regrets) for r in self.runs])

    def summary(self) -> dict:
        ret, reg = self.returns, self.cum_regret
        fw_mean, fw_se = final_window_stats(self.runs, self.config.final_window)
        out = {
            "variant": self.config.variant,
            "seeds": [r.seed for r in self.runs],
            "env_hash": self.env_hash,
            "config_hash": self.config.hash(),
            "episodes": list(range(1, len(ret.mean) + 1)),
            "return_mean": ret.mean,
            "return_stderr": ret.stderr,
            "cum_regret_mean": reg.mean,
            "cum_regret_stderr": reg.stderr,
            "final_window": self.config.final_window,
            "final_return_mean": fw_mean,
            "final_return_stderr": fw_se,
        }
        if any(r.diagnostics for r in self.runs):
            out["diagnostics"] = {r.seed: r.diagnostics for r in self.runs}
        return out


def run_experiment(config: ExperimentConfig, jobs: int = 1, keep_agents: bool = False) -> ExperimentResult:
    """Run every seed of ``config``; seeds are independent and run in parallel when ``jobs != 1``."""
    env = build_environment(config)
    if jobs == 1:
        runs = [run_seed(config, s, env, keep_agents) for s in config.seeds]
    else:
        runs = joblib.Parallel(n_jobs=jobs)(
            joblib.delayed(run_seed)(config, s, env, keep_agents) for s in config.seeds
        )
    return ExperimentResult(config, list(runs), mdp_hash([env[0], *env[1]]))


def manifest(config: ExperimentConfig, env_hash: str) -> dict:
    import scipy
    import sklearn

    return {
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "env_hash": env_hash,
        "seeds": config.seeds,
        "versions": {
            "rwtq": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__,
            "joblib": joblib.__version__,
        },
    }

"""Episodic driver shared by all agents."""
from __future__ import annotations

import time
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..align import DensityRatioProvider
from ..data import ReplayBuffer
from ..env import EpisodicMdp, evaluate_policy, greedy_policy, rollout, uniform_policy, value_iteration
from ..records import DivergenceError, EpisodeRecord
from .exploration import ExplorationSchedule, select_action


class BaseAgent(BaseEstimator):
    """Online learner on a target task with optional source replay data.

    Subclasses implement ``_setup``, ``q_values`` and ``_update_stage``.
    :meth:`fit` runs the episodic loop: roll out on the target, then update
    stages ``H-1, ..., 0`` in that order, each stage reading the values the
    same pass just produced for the stage after it.
    """

    # set by subclasses through __init__ params
    episodes: int
    schedule: str
    eps_start: float
    eps_end: float
    random_state: object
    divergence_factor: float

    def _schedule(self) -> ExplorationSchedule:
        return ExplorationSchedule(self.schedule, self.eps_start, self.eps_end, self.episodes)

    def fit(
        self,
        target: EpisodicMdp,
        source_buffers: Sequence[ReplayBuffer] = (),
        providers: Sequence[DensityRatioProvider] | DensityRatioProvider | None = None,
        *,
        source_tasks: Sequence[EpisodicMdp] | None = None,
        kappa: float | None = None,
        callback: Callable[["BaseAgent", int], None] | None = None,
    ):
        """Run the online loop on ``target``.

        Parameters
        ----------
        target : EpisodicMdp
        source_buffers : sequence of ReplayBuffer
            One static pool per source task; never modified unless ``kappa``
            is given.
        providers : DensityRatioProvider or sequence, optional
            Ratio per source; identity when omitted.
        source_tasks, kappa : optional
            Growth mode: before the update of episode ``n`` each source pool is
            topped up with uniform-random episodes to ``floor(kappa * n)``.
        callback : callable, optional
            Called as ``callback(agent, n)`` before the rollout of episode ``n``.
        """
        if kappa is not None and source_tasks is None:
            raise ValueError("kappa growth mode needs source_tasks")
        self.target_ = target
        self.horizon_ = target.horizon
        if kappa is not None:
            source_buffers = [ReplayBuffer(target.horizon, task_id=m + 1) for m in range(len(source_tasks))]
        self.source_buffers_ = list(source_buffers)
        if providers is None:
            providers = [DensityRatioProvider.identity()] * len(self.source_buffers_)
        elif isinstance(providers, DensityRatioProvider):
            providers = [providers] * len(self.source_buffers_)
        if len(providers) != len(self.source_buffers_):
            raise ValueError("need one ratio provider per source buffer")
        self.providers_ = list(providers)
        self.target_buffer_ = ReplayBuffer(target.horizon, task_id=0)
        ss = _seed_sequence(self.random_state)
        rollout_ss, agent_ss, source_ss = ss.spawn(3)
        rollout_rng = np.random.default_rng(rollout_ss)
        self.rng_ = np.random.default_rng(agent_ss)
        source_rng = np.random.default_rng(source_ss)

        max_r = max([np.max(np.abs(target.rewards))] + [_max_abs_reward(b) for b in self.source_buffers_])
        if source_tasks is not None:
            max_r = max([max_r] + [np.max(np.abs(t.rewards)) for t in source_tasks])
        self.divergence_bound_ = self.divergence_factor * target.horizon * max(max_r, 1.0)

        self._setup()
        _, vstar = value_iteration(target)
        s0 = target.initial_state
        self.optimal_value_ = float(vstar[0, s0])
        schedule = self._schedule()
        self.records_: list[EpisodeRecord] = []
        self.update_log_: list[tuple[int, int]] = []

        for n in range(1, self.episodes + 1):
            t0 = time.perf_counter()
            if callback is not None:
                callback(self, n)
            Q = self.q_values()
            regret = self.optimal_value_ - float(evaluate_policy(target, greedy_policy(Q))[0, s0])
            eps = schedule.epsilon(n)

            def policy(h, s, rng, Q=Q, n=n):
                return select_action(Q[h, s], schedule, n, rng)

            traj = rollout(target, policy, rollout_rng, task_id=0)
            self.target_buffer_.add_trajectory(traj)
            if kappa is not None:
                for m, (task, buf) in enumerate(zip(source_tasks, self.source_buffers_)):
                    want = int(np.floor(kappa * n))
                    have = buf.size(0)
                    for _ in range(want - have):
                        buf.add_trajectory(rollout(task, uniform_policy(task.num_actions), source_rng, task_id=m + 1))
            self._begin_update(n)
            for h in range(target.horizon - 1, -1, -1):
                self._update_stage(n, h)
                self.update_log_.append((n, h))
                self._guard(n, h)
            self.records_.append(
                EpisodeRecord(n, traj.total_reward, regret, eps, 1e3 * (time.perf_counter() - t0))
            )
        return self

    def _begin_update(self, n: int) -> None:
        pass

    def _guard(self, n: int, h: int) -> None:
        vals = self.stage_values(h)
        if not np.all(np.isfinite(vals)):
            raise DivergenceError(f"non-finite value at episode {n}, stage {h}", n, h)
        peak = float(np.max(np.abs(vals)))
        if peak > self.divergence_bound_:
            raise DivergenceError(
                f"|Q| = {peak:.3g} exceeds bound {self.divergence_bound_:.3g} at episode {n}, stage {h}", n, h
            )

    def stage_values(self, h: int) -> np.ndarray:
        return self.q_values()[h]

    def next_values(self, h: int) -> np.ndarray:
        """``V(s) = max_a Q_{h+1}(s, a)``, zero after the last stage."""
        if h + 1 >= self.horizon_:
            return np.zeros(self.target_.num_states)
        return self.stage_values(h + 1).max(axis=1)

    def predict(self, states, stage: int = 0) -> np.ndarray:
        """Greedy actions for ``states`` at ``stage``."""
        check_is_fitted(self, "records_")
        return np.argmax(self.q_values()[stage][np.asarray(states)], axis=-1)

    @property
    def returns_(self) -> np.ndarray:
        return np.array([r.ret for r in self.records_])

    @property
    def regrets_(self) -> np.ndarray:
        return np.array([r.regret for r in self.records_])


def _seed_sequence(random_state) -> np.random.SeedSequence:
    if isinstance(random_state, np.random.SeedSequence):
        # fresh copy: spawn() mutates its parent, and refits must replay the same streams
        return np.random.SeedSequence(random_state.entropy, spawn_key=random_state.spawn_key)
    return np.random.SeedSequence(None if random_state is None else int(random_state))


def _max_abs_reward(buf: ReplayBuffer) -> float:
    vals = [np.max(np.abs(buf.stage(h).rewards)) for h in range(buf.horizon) if buf.size(h)]
    return float(max(vals)) if vals else 0.0


def sample_indices(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    if n == 0 or size == 0:
        return np.empty(0, dtype=np.int64)
    return rng.integers(n, size=size)

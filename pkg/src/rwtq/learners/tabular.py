"""Tabular two-stage RWT learner and the target-only / naive-pooled baselines."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..align import DensityRatioProvider, pseudo_labels, ratio, residual_labels
from ..data import StageBatch
from .base import BaseAgent, sample_indices

VARIANTS = ("rwt", "target_only", "naive_pooled")
STAGE1_MODES = ("ridge", "incremental")


@dataclass
class TabularQ:
    """Stage-indexed lookup table ``values[h, s, a]``."""

    values: np.ndarray
    init_value: float = 0.0

    @classmethod
    def zeros(cls, horizon: int, num_states: int, num_actions: int, init_value: float = 0.0) -> "TabularQ":
        return cls(np.full((horizon, num_states, num_actions), float(init_value)), float(init_value))

    def V(self, h: int) -> np.ndarray:
        if h >= self.values.shape[0]:
            return np.zeros(self.values.shape[1])
        return self.values[h].max(axis=1)


def _sequential_step(table: np.ndarray, s: np.ndarray, a: np.ndarray, targets: np.ndarray, lr: float) -> None:
    """``table[s_i, a_i] += lr * (target_i - table[s_i, a_i])`` applied one sample at a time."""
    if lr == 0:
        return
    for si, ai, yi in zip(s.tolist(), a.tolist(), targets.tolist()):
        table[si, ai] += lr * (yi - table[si, ai])


def _source_labels(batches, providers, h, V_next, gamma):
    """Pseudo-labels for every transition in ``batches`` (one batch per source)."""
    labels = []
    for batch, prov in zip(batches, providers):
        if len(batch) == 0:
            labels.append(np.zeros(0))
            continue
        omega = ratio(prov, h, batch.states, batch.actions, batch.next_states)
        labels.append(pseudo_labels(batch.rewards, omega, V_next[batch.next_states], gamma))
    return labels


def _as_providers(providers, n):
    if providers is None:
        return [DensityRatioProvider.identity()] * n
    if isinstance(providers, DensityRatioProvider):
        return [providers] * n
    return list(providers)


def tabular_two_stage_update(
    q_base: np.ndarray,
    delta: np.ndarray,
    h: int,
    source_batches: Sequence[StageBatch],
    target_batch: StageBatch,
    providers,
    gamma: float,
    lr: float,
) -> None:
    """Incremental two-stage update of stage ``h`` in place.

    ``q_base`` and ``delta`` are full ``(H, S, A)`` tables. Source samples move
    ``q_base[h]`` toward their aligned pseudo-labels, then target samples move
    ``delta[h]`` toward residuals against the updated baseline. The
    continuation value is ``max_a (q_base + delta)[h + 1]``.
    """
    H = q_base.shape[0]
    V_next = (q_base[h + 1] + delta[h + 1]).max(axis=1) if h + 1 < H else np.zeros(q_base.shape[1])
    providers = _as_providers(providers, len(source_batches))
    for batch, y in zip(source_batches, _source_labels(source_batches, providers, h, V_next, gamma)):
        _sequential_step(q_base[h], batch.states, batch.actions, y, lr)
    tb = target_batch
    if len(tb):
        z = residual_labels(tb.rewards, V_next[tb.next_states], q_base[h][tb.states, tb.actions], gamma)
        _sequential_step(delta[h], tb.states, tb.actions, z, lr)


def tabular_ridge_baseline(
    h: int,
    source_batches: Sequence[StageBatch],
    providers,
    V_next: np.ndarray,
    gamma: float,
    ridge: float,
    shape: tuple[int, int],
) -> np.ndarray:
    """Exact Stage-I fit on a finite domain: per-cell ``sum(y) / (count + ridge)``.

    This is kernel ridge regression with the delta kernel, solved in closed form.
    """
    S, A = shape
    sums = np.zeros(S * A)
    counts = np.zeros(S * A)
    providers = _as_providers(providers, len(source_batches))
    for batch, y in zip(source_batches, _source_labels(source_batches, providers, h, V_next, gamma)):
        cell = batch.states * A + batch.actions
        sums += np.bincount(cell, weights=y, minlength=S * A)
        counts += np.bincount(cell, minlength=S * A)
    return (sums / (counts + ridge)).reshape(S, A)


def tabular_baseline_update(q: np.ndarray, h: int, batch: StageBatch, gamma: float, lr: float) -> None:
    """Sample-based Q-learning step on stage ``h`` of ``q`` (in place)."""
    if len(batch) == 0:
        return
    H = q.shape[0]
    V_next = q[h + 1].max(axis=1) if h + 1 < H else np.zeros(q.shape[1])
    targets = batch.rewards + gamma * V_next[batch.next_states]
    _sequential_step(q[h], batch.states, batch.actions, targets, lr)


class TabularQAgent(BaseAgent):
    """Tabular Q-learning agent with replayed minibatches.

    Parameters
    ----------
    variant : {"rwt", "target_only", "naive_pooled"}
        ``rwt`` keeps a source baseline plus a target-only correction;
        ``target_only`` ignores the sources; ``naive_pooled`` trains one table
        on the union of source and target samples.
    episodes : int
    lr : float
        Step size of every incremental update.
    batch_size : int
        Samples drawn per stage update.
    stage1 : {"ridge", "incremental"}
        How ``rwt`` fits the baseline. ``ridge`` refits it exactly over the
        whole source pool every pass; ``incremental`` spends a share of the
        minibatch, proportional to buffer sizes, on step-size updates.
    ridge : float
        Ridge for the exact baseline fit.
    schedule, eps_start, eps_end : exploration schedule.
    init_value : float
        Initial table entries.
    divergence_factor : float
        Abort when ``|Q|`` exceeds ``factor * H * max|r|``.
    random_state : int, SeedSequence or None
    """

    def __init__(
        self,
        variant: str = "rwt",
        episodes: int = 300,
        lr: float = 5e-2,
        batch_size: int = 64,
        stage1: str = "ridge",
        ridge: float = 1.0,
        schedule: str = "epsilon_greedy_linear",
        eps_start: float = 1.0,
        eps_end: float = 0.0,
        init_value: float = 0.0,
        divergence_factor: float = 10.0,
        random_state=None,
    ):
        self.variant = variant
        self.episodes = episodes
        self.lr = lr
        self.batch_size = batch_size
        self.stage1 = stage1
        self.ridge = ridge
        self.schedule = schedule
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.init_value = init_value
        self.divergence_factor = divergence_factor
        self.random_state = random_state

    def _setup(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.stage1 not in STAGE1_MODES:
            raise ValueError(f"stage1 must be one of {STAGE1_MODES}, got {self.stage1!r}")
        t = self.target_
        shape = (t.horizon, t.num_states, t.num_actions)
        self.q_ = np.full(shape, float(self.init_value))
        # rwt: q_ holds the baseline, delta_ the correction
        self.delta_ = np.zeros(shape)

    def q_values(self) -> np.ndarray:
        if self.variant == "rwt":
            return self.q_ + self.delta_
        return self.q_

    def stage_values(self, h: int) -> np.ndarray:
        if self.variant == "rwt":
            return self.q_[h] + self.delta_[h]
        return self.q_[h]

    def _draw(self, batch: StageBatch, size: int) -> StageBatch:
        return batch.take(sample_indices(self.rng_, len(batch), size))

    def _update_stage(self, n: int, h: int) -> None:
        gamma = self.target_.discount
        target = self.target_buffer_.stage(h)
        sources = [b.stage(h) for b in self.source_buffers_]
        if self.variant == "target_only":
            tabular_baseline_update(self.q_, h, self._draw(target, self.batch_size), gamma, self.lr)
        elif self.variant == "naive_pooled":
            pooled = StageBatch.concat(sources + [target])
            tabular_baseline_update(self.q_, h, self._draw(pooled, self.batch_size), gamma, self.lr)
        elif self.stage1 == "ridge":
            V_next = self.next_values(h)
            S, A = self.target_.num_states, self.target_.num_actions
            self.q_[h] = tabular_ridge_baseline(h, sources, self.providers_, V_next, gamma, self.ridge, (S, A))
            tb = self._draw(target, self.batch_size)
            z = residual_labels(tb.rewards, V_next[tb.next_states], self.q_[h][tb.states, tb.actions], gamma)
            _sequential_step(self.delta_[h], tb.states, tb.actions, z, self.lr)
        else:
            sizes = np.array([len(b) for b in sources] + [len(target)], dtype=float)
            counts = self.rng_.multinomial(self.batch_size, sizes / sizes.sum())
            src = [self._draw(b, c) for b, c in zip(sources, counts[:-1])]
            tabular_two_stage_update(
                self.q_, self.delta_, h, src, self._draw(target, counts[-1]), self.providers_, gamma, self.lr
            )

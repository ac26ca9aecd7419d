"""Transition samples, trajectories and stage-indexed replay buffers."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np


class TransitionSample(NamedTuple):
    task_id: int
    stage: int
    state: int
    action: int
    reward: float
    next_state: int


@dataclass
class Trajectory:
    samples: list[TransitionSample]

    def __post_init__(self):
        for k, smp in enumerate(self.samples):
            if smp.stage != k:
                raise ValueError(f"sample {k} has stage {smp.stage}")
            if smp.task_id != self.samples[0].task_id:
                raise ValueError("trajectory mixes task ids")
            if k and self.samples[k - 1].next_state != smp.state:
                raise ValueError(f"trajectory broken between stages {k - 1} and {k}")

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def total_reward(self) -> float:
        return float(sum(s.reward for s in self.samples))


class StageBatch(NamedTuple):
    """Column view of all samples stored for one stage."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray

    def __len__(self):
        return len(self.states)

    def take(self, idx: np.ndarray) -> "StageBatch":
        return StageBatch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])

    @classmethod
    def concat(cls, batches: Iterable["StageBatch"]) -> "StageBatch":
        batches = list(batches)
        if not batches:
            return cls.empty()
        return cls(*(np.concatenate(cols) for cols in zip(*batches)))

    @classmethod
    def empty(cls) -> "StageBatch":
        return cls(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0), np.empty(0, np.int64))


class ReplayBuffer:
    """Append-only per-stage storage for one task.

    Column arrays are grown geometrically so ``stage(h)`` is O(1).
    """

    def __init__(self, horizon: int, task_id: int = 0, capacity: int = 64):
        self.horizon = horizon
        self.task_id = task_id
        self._n = np.zeros(horizon, dtype=np.int64)
        self._s = np.zeros((horizon, capacity), dtype=np.int64)
        self._a = np.zeros((horizon, capacity), dtype=np.int64)
        self._r = np.zeros((horizon, capacity))
        self._s2 = np.zeros((horizon, capacity), dtype=np.int64)

    def __len__(self):
        return int(self._n.sum())

    def size(self, h: int) -> int:
        return int(self._n[h])

    def add(self, sample: TransitionSample) -> None:
        h = sample.stage
        if not 0 <= h < self.horizon:
            raise IndexError(f"stage {h} outside horizon {self.horizon}")
        i = self._n[h]
        if i == self._s.shape[1]:
            self._grow()
        self._s[h, i], self._a[h, i] = sample.state, sample.action
        self._r[h, i], self._s2[h, i] = sample.reward, sample.next_state
        self._n[h] += 1

    def add_trajectory(self, traj: Trajectory) -> None:
        for smp in traj:
            self.add(smp)

    def _grow(self):
        cap = 2 * self._s.shape[1]
        for name in ("_s", "_a", "_r", "_s2"):
            old = getattr(self, name)
            new = np.zeros((self.horizon, cap), dtype=old.dtype)
            new[:, : old.shape[1]] = old
            setattr(self, name, new)

    def stage(self, h: int) -> StageBatch:
        n = self._n[h]
        return StageBatch(self._s[h, :n], self._a[h, :n], self._r[h, :n], self._s2[h, :n])

    def samples(self) -> list[TransitionSample]:
        out = []
        for h in range(self.horizon):
            b = self.stage(h)
            out.extend(
                TransitionSample(self.task_id, h, int(s), int(a), float(r), int(s2))
                for s, a, r, s2 in zip(*b)
            )
        return out

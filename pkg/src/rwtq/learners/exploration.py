"""Exploration schedules and action selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCHEDULE_KINDS = ("epsilon_greedy_linear", "ucb_greedy")


@dataclass(frozen=True)
class ExplorationSchedule:
    kind: str = "epsilon_greedy_linear"
    eps_start: float = 1.0
    eps_end: float = 0.0
    total_episodes: int = 300

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"schedule kind must be one of {SCHEDULE_KINDS}")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")
        if self.total_episodes < 1:
            raise ValueError("total_episodes must be >= 1")

    def epsilon(self, episode: int) -> float:
        """Exploration rate for 1-based ``episode``; linear from start to end."""
        if self.kind == "ucb_greedy":
            return 0.0
        if self.total_episodes == 1:
            return self.eps_start
        frac = (min(max(episode, 1), self.total_episodes) - 1) / (self.total_episodes - 1)
        return self.eps_start + (self.eps_end - self.eps_start) * frac


def greedy_action(q_values) -> int:
    # np.argmax returns the first maximiser, i.e. lowest-index tie-break
    return int(np.argmax(q_values))


def select_action(q_values, schedule: ExplorationSchedule, episode: int, rng: np.random.Generator) -> int:
    q_values = np.asarray(q_values)
    if q_values.size == 0:
        raise ValueError("need at least one action")
    eps = schedule.epsilon(episode)
    if eps > 0 and rng.random() < eps:
        return int(rng.integers(q_values.size))
    return greedy_action(q_values)

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class EpisodeRecord:
    episode: int
    ret: float
    regret: float
    epsilon: float
    wall_ms: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


class DivergenceError(RuntimeError):
    """Value estimates became non-finite or exceeded the divergence bound."""

    def __init__(self, message: str, episode: int | None = None, stage: int | None = None):
        super().__init__(message)
        self.episode = episode
        self.stage = stage

    def report(self) -> dict:
        return {"error": "divergence", "message": str(self), "episode": self.episode, "stage": self.stage}

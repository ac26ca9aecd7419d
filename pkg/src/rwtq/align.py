"""Re-weighted targeting: density ratios and Bellman-aligned regression labels.

A source transition ``(s, a, r, s')`` from task ``m`` is turned into a label
for the target task by evaluating the *target* continuation value at ``s'``
and re-weighting it by ``p0(s'|s,a) / pm(s'|s,a)``. In expectation the label
then equals the target Bellman backup minus the one-step reward difference
``R0(s,a) - Rm(s,a)``, whatever continuation value is plugged in.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import TransitionSample
from .env import EpisodicMdp


class AbsoluteContinuityError(ValueError):
    """Target puts mass on a successor the source never produces."""


@dataclass(frozen=True, eq=False)
class DensityRatioProvider:
    """Source-to-target transition density ratio ``omega_h(s'|s,a)``.

    Build with :meth:`identity`, :meth:`exact` or :meth:`from_table`.
    """

    mode: str
    target: EpisodicMdp | None = None
    source: EpisodicMdp | None = None
    table: np.ndarray | None = None

    @classmethod
    def identity(cls) -> "DensityRatioProvider":
        return cls("identity")

    @classmethod
    def exact(cls, target: EpisodicMdp, source: EpisodicMdp) -> "DensityRatioProvider":
        if (target.num_states, target.num_actions, target.horizon) != (
            source.num_states, source.num_actions, source.horizon
        ):
            raise ValueError("target and source must share state/action spaces and horizon")
        return cls("exact_tabular", target=target, source=source)

    @classmethod
    def from_table(cls, table: np.ndarray) -> "DensityRatioProvider":
        table = np.asarray(table, dtype=float)
        if table.ndim != 4:
            raise ValueError("ratio table must have shape (H, S, A, S)")
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ValueError("ratio table entries must be finite and non-negative")
        table = table.copy()
        table.setflags(write=False)
        return cls("table", table=table)

    def __call__(self, h, s, a, s_next):
        return ratio(self, h, s, a, s_next)


def ratio(provider: DensityRatioProvider, h, s, a, s_next):
    """Evaluate ``omega_h(s'|s,a)``; scalar or broadcast array inputs.

    For exact ratios a successor with zero probability under both kernels
    gets ratio 0, since the source never samples it.
    """
    if provider.mode == "identity":
        out = np.ones(np.broadcast(h, s, a, s_next).shape)
        return float(out) if out.ndim == 0 else out
    if provider.mode == "table":
        out = provider.table[h, s, a, s_next]
        return float(out) if np.ndim(out) == 0 else out
    if provider.mode != "exact_tabular":
        raise ValueError(f"unknown ratio mode {provider.mode!r}")
    p0 = _probs(provider.target, h, s, a, s_next)
    pm = _probs(provider.source, h, s, a, s_next)
    bad = (pm == 0) & (p0 > 0)
    if np.any(bad):
        raise AbsoluteContinuityError(
            "target kernel is not absolutely continuous w.r.t. the source kernel "
            f"at {np.argwhere(np.atleast_1d(bad)).ravel()[:5].tolist()}"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(pm > 0, p0 / np.where(pm > 0, pm, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def _probs(mdp: EpisodicMdp, h, s, a, s_next) -> np.ndarray:
    if mdp.transitions is not None:
        return np.asarray(mdp.transitions[h, s, a, s_next], dtype=float)
    return (np.asarray(mdp.next_states[h, s, a]) == np.asarray(s_next)).astype(float)


def ratio_table(provider: DensityRatioProvider, h: int, num_states: int, num_actions: int) -> np.ndarray:
    """Materialise ``omega_h`` as an ``(S, A, S)`` array."""
    s, a, s2 = np.indices((num_states, num_actions, num_states))
    return np.broadcast_to(ratio(provider, h, s, a, s2), (num_states, num_actions, num_states))


class PseudoLabel(NamedTuple):
    value: float
    sample: TransitionSample
    stage: int


class ResidualLabel(NamedTuple):
    value: float
    sample: TransitionSample
    stage: int


def rwt_pseudo_label(sample: TransitionSample, omega: float, V_next, gamma: float) -> PseudoLabel:
    """``y = r + gamma * omega * V_next(s')`` for one source transition."""
    v = _value_at(V_next, sample.next_state)
    return PseudoLabel(float(sample.reward + gamma * omega * v), sample, sample.stage)


def residual_label(sample: TransitionSample, q_base, V_next, gamma: float) -> ResidualLabel:
    """``z = r + gamma * V_next(s') - q_base(s, a)`` for one target transition."""
    v = _value_at(V_next, sample.next_state)
    qb = q_base(sample.state, sample.action) if callable(q_base) else q_base[sample.state, sample.action]
    return ResidualLabel(float(sample.reward + gamma * v - qb), sample, sample.stage)


def _value_at(V, s):
    if V is None:
        return 0.0
    return float(V(s)) if callable(V) else float(V[s])


def pseudo_labels(rewards, omegas, next_values, gamma: float) -> np.ndarray:
    """Vectorised pseudo-labels for a batch of source transitions."""
    return np.asarray(rewards) + gamma * np.asarray(omegas) * np.asarray(next_values)


def residual_labels(rewards, next_values, base_values, gamma: float) -> np.ndarray:
    """Vectorised residual labels for a batch of target transitions."""
    return np.asarray(rewards) + gamma * np.asarray(next_values) - np.asarray(base_values)


def target_backup(target: EpisodicMdp, V_next: np.ndarray, h: int) -> np.ndarray:
    """Standard target Bellman backup at stage ``h`` as an ``(S, A)`` array."""
    return target.rewards[h] + target.discount * target.expected_next(h, V_next)


def rwt_backup_exact(
    source: EpisodicMdp,
    provider: DensityRatioProvider,
    V_target_next: np.ndarray,
    h: int,
    s: int | None = None,
    a: int | None = None,
):
    """Exact aligned backup ``Rm + gamma * sum_s' Pm(s'|s,a) omega(s'|s,a) V(s')``.

    Returns the full ``(S, A)`` table when ``s`` and ``a`` are omitted.
    Brute-force summation over successors, meant as a test oracle.
    """
    S, A = source.num_states, source.num_actions
    V = np.asarray(V_target_next, dtype=float)
    Pm = source.transition_matrix(h)
    omega = ratio_table(provider, h, S, A)
    out = source.rewards[h] + source.discount * np.einsum("sat,sat,t->sa", Pm, omega, V)
    if s is None and a is None:
        return out
    return float(out[s, a])


def ratio_error_diagnostic(estimates, truths) -> float:
    """Root-mean-square error between estimated and true ratios (0 when empty)."""
    est = np.asarray(estimates, dtype=float).ravel()
    tru = np.asarray(truths, dtype=float).ravel()
    if est.shape != tru.shape:
        raise ValueError("estimates and truths must have equal length")
    if est.size == 0:
        return 0.0
    return float(np.sqrt(np.mean((est - tru) ** 2)))

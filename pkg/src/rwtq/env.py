"""Finite episodic MDPs, the random-reward grid world, and exact DP oracles.

Stages are 0-based throughout: a horizon-``H`` task has stages ``0..H-1`` and
the continuation value after the last stage is identically zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .data import TransitionSample, Trajectory

Policy = Union[np.ndarray, Callable[[int, int, np.random.Generator], int]]


@dataclass(frozen=True, eq=False)
class EpisodicMdp:
    """Finite-horizon task with stage-indexed dynamics and rewards.

    Exactly one of ``transitions`` (dense, shape ``(H, S, A, S)``) or
    ``next_states`` (deterministic, shape ``(H, S, A)``) is set.
    ``rewards`` has shape ``(H, S, A)``.
    """

    num_states: int
    num_actions: int
    horizon: int
    discount: float
    rewards: np.ndarray
    transitions: np.ndarray | None = None
    next_states: np.ndarray | None = None
    initial_state: int = 0
    state_features: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        S, A, H = self.num_states, self.num_actions, self.horizon
        if min(S, A, H) < 1:
            raise ValueError("num_states, num_actions and horizon must be positive")
        # gamma = 0 is accepted for myopic oracle checks
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError(f"discount must lie in [0, 1], got {self.discount}")
        if (self.transitions is None) == (self.next_states is None):
            raise ValueError("set exactly one of transitions / next_states")
        rewards = np.asarray(self.rewards, dtype=float)
        if rewards.shape != (H, S, A):
            raise ValueError(f"rewards must have shape {(H, S, A)}, got {rewards.shape}")
        if not np.all(np.isfinite(rewards)):
            raise ValueError("rewards must be finite")
        object.__setattr__(self, "rewards", _frozen(rewards))
        if self.transitions is not None:
            P = np.asarray(self.transitions, dtype=float)
            if P.shape != (H, S, A, S):
                raise ValueError(f"transitions must have shape {(H, S, A, S)}, got {P.shape}")
            if np.any(P < 0) or np.max(np.abs(P.sum(axis=-1) - 1.0)) > 1e-12:
                raise ValueError("transition rows must be non-negative and sum to 1")
            object.__setattr__(self, "transitions", _frozen(P))
        else:
            nxt = np.asarray(self.next_states)
            if nxt.shape != (H, S, A):
                raise ValueError(f"next_states must have shape {(H, S, A)}, got {nxt.shape}")
            if nxt.min() < 0 or nxt.max() >= S:
                raise ValueError("next_states out of range")
            object.__setattr__(self, "next_states", _frozen(nxt.astype(np.int64)))
        if not 0 <= self.initial_state < S:
            raise ValueError("initial_state out of range")
        feats = self.state_features
        if feats is None:
            feats = np.eye(S)
        feats = np.asarray(feats, dtype=float)
        if feats.ndim != 2 or feats.shape[0] != S:
            raise ValueError("state_features must have shape (num_states, d)")
        object.__setattr__(self, "state_features", _frozen(feats))

    @property
    def deterministic(self) -> bool:
        return self.next_states is not None

    def transition_probs(self, h: int, s: int, a: int) -> np.ndarray:
        self._check(h, s, a)
        if self.transitions is not None:
            return self.transitions[h, s, a]
        p = np.zeros(self.num_states)
        p[self.next_states[h, s, a]] = 1.0
        return p

    def transition_matrix(self, h: int) -> np.ndarray:
        """Dense ``(S, A, S)`` kernel for stage ``h`` (materialised if deterministic)."""
        if self.transitions is not None:
            return self.transitions[h]
        P = np.zeros((self.num_states, self.num_actions, self.num_states))
        s_idx, a_idx = np.indices((self.num_states, self.num_actions))
        P[s_idx, a_idx, self.next_states[h]] = 1.0
        return P

    def expected_next(self, h: int, V: np.ndarray) -> np.ndarray:
        """``E[V(s') | s, a]`` at stage ``h`` as an ``(S, A)`` array."""
        if self.transitions is not None:
            return self.transitions[h] @ V
        return V[self.next_states[h]]

    def _check(self, h, s, a):
        if not 0 <= h < self.horizon:
            raise IndexError(f"stage {h} outside [0, {self.horizon})")
        if not 0 <= s < self.num_states:
            raise IndexError(f"state {s} outside [0, {self.num_states})")
        if not 0 <= a < self.num_actions:
            raise IndexError(f"action {a} outside [0, {self.num_actions})")


def _frozen(x: np.ndarray) -> np.ndarray:
    x = np.array(x, copy=True)
    x.setflags(write=False)
    return x


@dataclass(frozen=True)
class GridWorldSpec:
    """Random-reward grid world. Defaults reproduce the 4-D, side-9 study."""

    dims: int = 4
    side: int = 9
    horizon: int = 8
    num_actions: int = 4
    target_reward_std: float = 1.0
    delta_std: float = 3.0
    num_sources: int = 1
    seed: int = 0
    discount: float = 0.99
    normalize_rewards: bool = False

    @property
    def num_states(self) -> int:
        return self.side**self.dims


def grid_next_states(dims: int, side: int, num_actions: int) -> np.ndarray:
    """Deterministic successor table ``(S, A)``.

    Action ``i < dims`` increments coordinate ``i``; action ``dims + i``
    (only when ``num_actions == 2 * dims``) decrements it. Moves that would
    leave the grid keep the agent in place.
    """
    if num_actions not in (dims, 2 * dims):
        raise ValueError(f"num_actions must be dims or 2*dims, got {num_actions} for dims={dims}")
    shape = (side,) * dims
    coords = np.stack(np.unravel_index(np.arange(side**dims), shape), axis=1)
    nxt = np.empty((side**dims, num_actions), dtype=np.int64)
    for a in range(num_actions):
        c = coords.copy()
        axis, sign = a % dims, (1 if a < dims else -1)
        c[:, axis] = np.clip(c[:, axis] + sign, 0, side - 1)
        nxt[:, a] = np.ravel_multi_index(tuple(c.T), shape)
    return nxt


def build_random_reward_grid(spec: GridWorldSpec) -> tuple[EpisodicMdp, list[EpisodicMdp]]:
    """Target task plus ``num_sources`` reward-perturbed source tasks.

    Target rewards are one i.i.d. Gaussian ``(S, A)`` table replicated over
    stages; each source adds an independent ``N(0, delta_std**2)`` table.
    All tasks share the deterministic grid dynamics and start at the origin.
    With ``normalize_rewards`` every table is mapped by one shared affine map
    onto ``[0, 1]``, which keeps the reward differences additive.
    """
    if spec.dims < 1 or spec.side < 2:
        raise ValueError(f"invalid grid: dims={spec.dims}, side={spec.side}")
    if spec.horizon < 1 or spec.num_sources < 0:
        raise ValueError("horizon must be >= 1 and num_sources >= 0")
    if spec.delta_std < 0 or spec.target_reward_std < 0:
        raise ValueError("reward standard deviations must be non-negative")
    rng = np.random.default_rng(spec.seed)
    S, A, H = spec.num_states, spec.num_actions, spec.horizon
    nxt = grid_next_states(spec.dims, spec.side, A)
    base = spec.target_reward_std * rng.standard_normal((S, A))
    tables = [base]
    for _ in range(spec.num_sources):
        tables.append(base + spec.delta_std * rng.standard_normal((S, A)))
    if spec.normalize_rewards:
        lo = min(t.min() for t in tables)
        hi = max(t.max() for t in tables)
        span = hi - lo if hi > lo else 1.0
        tables = [(t - lo) / span for t in tables]

    coords = np.stack(np.unravel_index(np.arange(S), (spec.side,) * spec.dims), axis=1)
    feats = coords / (spec.side - 1)
    nxt_h = np.broadcast_to(nxt, (H, S, A))
    meta = {"kind": "random_reward_grid", "dims": spec.dims, "side": spec.side, "seed": spec.seed}
    tasks = [
        EpisodicMdp(
            num_states=S,
            num_actions=A,
            horizon=H,
            discount=spec.discount,
            rewards=np.broadcast_to(t, (H, S, A)),
            next_states=nxt_h,
            initial_state=0,
            state_features=feats,
            meta=dict(meta, task_id=m),
        )
        for m, t in enumerate(tables)
    ]
    return tasks[0], tasks[1:]


def random_mdp(
    rng: np.random.Generator,
    num_states: int,
    num_actions: int,
    horizon: int,
    discount: float = 0.99,
    deterministic: bool = False,
    reward_low: float = 0.0,
    reward_high: float = 1.0,
) -> EpisodicMdp:
    """Random tabular MDP; stochastic kernels are Dirichlet(1) with full support."""
    S, A, H = num_states, num_actions, horizon
    R = rng.uniform(reward_low, reward_high, size=(H, S, A))
    if deterministic:
        return EpisodicMdp(S, A, H, discount, R, next_states=rng.integers(S, size=(H, S, A)))
    P = rng.dirichlet(np.ones(S), size=(H, S, A))
    P /= P.sum(axis=-1, keepdims=True)
    return EpisodicMdp(S, A, H, discount, R, transitions=P)


def related_source(
    target: EpisodicMdp,
    rng: np.random.Generator,
    reward_shift_std: float = 0.5,
    resample_transitions: bool = True,
) -> EpisodicMdp:
    """Source task differing from ``target`` in rewards and (optionally) dynamics."""
    R = target.rewards + reward_shift_std * rng.standard_normal(target.rewards.shape)
    if target.deterministic or not resample_transitions:
        return EpisodicMdp(
            target.num_states, target.num_actions, target.horizon, target.discount, R,
            transitions=target.transitions, next_states=target.next_states,
            initial_state=target.initial_state, state_features=target.state_features,
        )
    H, S, A = target.horizon, target.num_states, target.num_actions
    P = rng.dirichlet(np.ones(S), size=(H, S, A))
    P /= P.sum(axis=-1, keepdims=True)
    return EpisodicMdp(
        S, A, H, target.discount, R, transitions=P,
        initial_state=target.initial_state, state_features=target.state_features,
    )


def two_state_benchmark(seed: int, discount: float = 0.99) -> tuple[EpisodicMdp, EpisodicMdp]:
    """2-state / 2-action / H=2 target-source pair with stochastic dynamics.

    Target rewards lie in ``[0, 1]``; the source has its own full-support
    transition kernel so exact density ratios are non-trivial.
    """
    rng = np.random.default_rng(seed)
    target = random_mdp(rng, 2, 2, 2, discount=discount)
    source = related_source(target, rng, reward_shift_std=0.2)
    return target, source


def step(mdp: EpisodicMdp, s: int, a: int, h: int, rng: np.random.Generator) -> tuple[float, int]:
    mdp._check(h, s, a)
    r = float(mdp.rewards[h, s, a])
    if mdp.next_states is not None:
        return r, int(mdp.next_states[h, s, a])
    return r, int(rng.choice(mdp.num_states, p=mdp.transitions[h, s, a]))


def _act(policy: Policy, h: int, s: int, rng: np.random.Generator) -> int:
    if isinstance(policy, np.ndarray):
        return int(policy[h, s])
    return int(policy(h, s, rng))


def rollout(mdp: EpisodicMdp, policy: Policy, rng: np.random.Generator, task_id: int = 0) -> Trajectory:
    """One episode from the initial state.

    ``policy`` is either an ``(H, S)`` action table or a callable
    ``policy(h, s, rng) -> action``.
    """
    s = mdp.initial_state
    samples = []
    for h in range(mdp.horizon):
        a = _act(policy, h, s, rng)
        r, s2 = step(mdp, s, a, h, rng)
        samples.append(TransitionSample(task_id, h, s, a, r, s2))
        s = s2
    return Trajectory(samples)


def uniform_policy(num_actions: int) -> Callable[[int, int, np.random.Generator], int]:
    def policy(h, s, rng):
        return int(rng.integers(num_actions))

    return policy


def value_iteration(mdp: EpisodicMdp) -> tuple[np.ndarray, np.ndarray]:
    """Backward induction; returns ``Q*`` of shape (H, S, A) and ``V*`` of shape (H, S)."""
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    Q = np.empty((H, S, A))
    V = np.empty((H, S))
    v_next = np.zeros(S)
    for h in range(H - 1, -1, -1):
        Q[h] = mdp.rewards[h] + mdp.discount * mdp.expected_next(h, v_next)
        V[h] = Q[h].max(axis=1)
        v_next = V[h]
    return Q, V


def evaluate_policy(mdp: EpisodicMdp, policy: np.ndarray) -> np.ndarray:
    """Exact ``V^pi`` of shape (H, S).

    ``policy`` is an ``(H, S)`` integer action table or an ``(H, S, A)`` table
    of action probabilities.
    """
    policy = np.asarray(policy)
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    if policy.shape == (H, S):
        probs = np.zeros((H, S, A))
        probs[np.arange(H)[:, None], np.arange(S)[None, :], policy] = 1.0
    elif policy.shape == (H, S, A):
        probs = policy
    else:
        raise ValueError(f"policy must have shape {(H, S)} or {(H, S, A)}, got {policy.shape}")
    V = np.empty((H, S))
    v_next = np.zeros(S)
    for h in range(H - 1, -1, -1):
        q = mdp.rewards[h] + mdp.discount * mdp.expected_next(h, v_next)
        V[h] = np.sum(probs[h] * q, axis=1)
        v_next = V[h]
    return V


def greedy_policy(Q: np.ndarray) -> np.ndarray:
    """``(H, S)`` argmax table with lowest-index tie-break."""
    return np.argmax(Q, axis=-1)

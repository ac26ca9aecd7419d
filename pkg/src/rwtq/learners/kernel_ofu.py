"""Kernel two-stage RWT learner with optimism (OFU)."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..align import ratio, residual_labels
from ..data import StageBatch
from ..diagnostics import coverage_constant, empirical_effective_dimension
from ..kernels import KernelSpec, all_state_actions, encode_state_actions, gram_matrix
from ..krr import KernelRidge
from .base import BaseAgent
from .bonus import BonusParams, beta_values, bonus_from_variances, clip_values


def _pooled_source(batches: Sequence[StageBatch], providers, h: int):
    pooled = StageBatch.concat(batches)
    omegas = [
        ratio(p, h, b.states, b.actions, b.next_states) if len(b) else np.zeros(0)
        for b, p in zip(batches, providers)
    ]
    return pooled, (np.concatenate(omegas) if omegas else np.zeros(0))


def stage1_fit_kernel(
    source_batches: Sequence[StageBatch],
    providers,
    h: int,
    V_next: np.ndarray,
    gamma: float,
    state_features: np.ndarray,
    num_actions: int,
    kernel: KernelSpec,
    ridge: float,
) -> KernelRidge:
    """Kernel ridge fit of the baseline on aligned pseudo-labels pooled over sources."""
    batch, omega = _pooled_source(source_batches, providers, h)
    X = encode_state_actions(state_features, batch.states, batch.actions, num_actions)
    y = batch.rewards + gamma * omega * V_next[batch.next_states]
    return KernelRidge(kernel=kernel, ridge=ridge).fit(X, y)


def stage2_fit_kernel(
    target_batch: StageBatch,
    q_base,
    V_next: np.ndarray,
    gamma: float,
    state_features: np.ndarray,
    num_actions: int,
    kernel_tilde: KernelSpec,
    ridge_tilde: float,
) -> KernelRidge:
    """Kernel ridge fit of the correction on residual labels.

    ``q_base`` is an ``(S, A)`` array or a fitted baseline model.
    """
    tb = target_batch
    X = encode_state_actions(state_features, tb.states, tb.actions, num_actions)
    if isinstance(q_base, KernelRidge):
        base = q_base.predict(X) if len(tb) else np.zeros(0)
    else:
        base = np.asarray(q_base)[tb.states, tb.actions]
    z = residual_labels(tb.rewards, V_next[tb.next_states], base, gamma)
    return KernelRidge(kernel=kernel_tilde, ridge=ridge_tilde).fit(X, z)


class KernelOFUAgent(BaseAgent):
    """Optimistic two-stage kernel learner.

    Each backward pass fits, per stage, a baseline by kernel ridge regression
    on re-weighted source pseudo-labels and a correction on target residuals
    in the smaller kernel, then sets
    ``Q = clip(baseline + correction + bonus, 0, H - h)``.

    Parameters
    ----------
    kernel : KernelSpec
        Baseline kernel on ``[state features, one-hot action]``.
    kernel_tilde : KernelSpec, optional
        Correction kernel; defaults to ``tilde_factor * kernel``.
    tilde_factor : float
    ridge, ridge_tilde : float
    c_source, c_target : float
        Bonus multipliers.
    bonus_mode : {"practical", "theoretical"}
    alpha0, alpha1, beta1 : float
        Exponents used only by the theoretical bonus.
    clip : bool
        Clip optimistic values to ``[0, H - h]``.
    init_value : float, optional
        Initial values; ``None`` means ``H``.
    record_diagnostics : bool
        Keep per-stage complexity records in ``diagnostics_``.
    """

    def __init__(
        self,
        kernel: KernelSpec | None = None,
        kernel_tilde: KernelSpec | None = None,
        tilde_factor: float = 1.0,
        ridge: float = 1.0,
        ridge_tilde: float = 1.0,
        c_source: float = 1.0,
        c_target: float = 1.0,
        bonus_mode: str = "practical",
        alpha0: float = 0.5,
        alpha1: float = 0.5,
        beta1: float = 0.5,
        clip: bool = True,
        init_value: float | None = None,
        episodes: int = 100,
        schedule: str = "ucb_greedy",
        eps_start: float = 0.0,
        eps_end: float = 0.0,
        record_diagnostics: bool = False,
        divergence_factor: float = 10.0,
        random_state=None,
    ):
        self.kernel = kernel
        self.kernel_tilde = kernel_tilde
        self.tilde_factor = tilde_factor
        self.ridge = ridge
        self.ridge_tilde = ridge_tilde
        self.c_source = c_source
        self.c_target = c_target
        self.bonus_mode = bonus_mode
        self.alpha0 = alpha0
        self.alpha1 = alpha1
        self.beta1 = beta1
        self.clip = clip
        self.init_value = init_value
        self.episodes = episodes
        self.schedule = schedule
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.record_diagnostics = record_diagnostics
        self.divergence_factor = divergence_factor
        self.random_state = random_state

    @property
    def bonus_params_(self) -> BonusParams:
        return BonusParams(
            self.ridge, self.ridge_tilde, self.c_source, self.c_target, self.bonus_mode,
            self.horizon_, self.alpha0, self.alpha1, self.beta1, self.clip,
        )

    def _setup(self):
        t = self.target_
        self.kernel_ = self.kernel if self.kernel is not None else KernelSpec("rbf", lengthscale=0.5)
        self.kernel_tilde_ = (
            self.kernel_tilde if self.kernel_tilde is not None else KernelSpec.scaled_from(self.kernel_, self.tilde_factor)
        )
        self._bonus = self.bonus_params_
        self.X_all_ = all_state_actions(t.state_features, t.num_actions)
        H, S, A = t.horizon, t.num_states, t.num_actions
        init = float(H if self.init_value is None else self.init_value)
        Q = np.full((H, S, A), init)
        if self.clip:
            for h in range(H):
                Q[h] = clip_values(Q[h], h, H)
        self.Q_ = Q
        self.Q_raw_ = np.full((H, S, A), init)
        self.q_base_ = np.zeros((H, S, A))
        self.delta_ = np.zeros((H, S, A))
        self.bonus_ = np.zeros((H, S, A))
        self._src = [None] * H
        self._tgt = [None] * H
        self.diagnostics_: list[dict] = []

    def q_values(self) -> np.ndarray:
        # acting ranks the unclipped optimistic values: clipping would tie every
        # action at the cap H - h and freeze the greedy choice on action 0
        return self.Q_raw_

    def stage_values(self, h: int) -> np.ndarray:
        return self.Q_[h]

    def _source_state(self, h: int):
        """(model, cross-gram, variance, n, effective dimension) for the current source pool."""
        batches = [b.stage(h) for b in self.source_buffers_]
        n_src = sum(len(b) for b in batches)
        cached = self._src[h]
        if cached is not None and cached["n"] == n_src:
            return cached, batches
        t = self.target_
        batch, omega = _pooled_source(batches, self.providers_, h)
        X = encode_state_actions(t.state_features, batch.states, batch.actions, t.num_actions)
        if cached is not None and len(batches) == 1 and cached["n"] < n_src:
            # single growing pool: rows are only appended, so extend the factor
            model = cached["model"]
            model.extend(X[cached["n"]:], np.zeros(n_src))
            Kq = np.hstack([cached["Kq"], gram_matrix(self.kernel_, self.X_all_, X[cached["n"]:])])
        else:
            model = KernelRidge(kernel=self.kernel_, ridge=self.ridge).fit(X, np.zeros(len(X)))
            Kq = model.cross_gram(self.X_all_)
        var = model.posterior_variance(self.X_all_, cross_gram=Kq)
        eff = empirical_effective_dimension(model.kernel_(X), self.ridge) if self.record_diagnostics else float("nan")
        cached = dict(n=n_src, model=model, Kq=Kq, var=var, batch=batch, omega=omega, eff=eff)
        self._src[h] = cached
        return cached, batches

    def _update_stage(self, n: int, h: int) -> None:
        t = self.target_
        S, A = t.num_states, t.num_actions
        gamma = t.discount
        V_next = self.next_values(h)

        src, _ = self._source_state(h)
        if src["n"]:
            b = src["batch"]
            y = b.rewards + gamma * src["omega"] * V_next[b.next_states]
            src["model"].refit_targets(y)
            q_base = (src["Kq"] @ src["model"].dual_coef_).reshape(S, A)
        else:
            q_base = np.zeros((S, A))
        var_src = src["var"].reshape(S, A)

        tb = self.target_buffer_.stage(h)
        z = residual_labels(tb.rewards, V_next[tb.next_states], q_base[tb.states, tb.actions], gamma)
        state = self._tgt[h]
        if state is None:
            model = KernelRidge(kernel=self.kernel_tilde_, ridge=self.ridge_tilde).fit(
                encode_state_actions(t.state_features, tb.states, tb.actions, A), z
            )
            state = dict(model=model, Kq=model.cross_gram(self.X_all_))
            self._tgt[h] = state
        else:
            model = state["model"]
            m_old = len(model.X_fit_)
            X_new = encode_state_actions(t.state_features, tb.states[m_old:], tb.actions[m_old:], A)
            model.extend(X_new, z)
            state["Kq"] = np.hstack([state["Kq"], gram_matrix(self.kernel_tilde_, self.X_all_, X_new)])
        delta = model.predict(None, cross_gram=state["Kq"]).reshape(S, A)
        var_tgt = model.posterior_variance(None, cross_gram=state["Kq"]).reshape(S, A)

        beta_s, beta_t = beta_values(self._bonus, n, src["n"])
        bonus = bonus_from_variances(var_src if src["n"] else 0.0, var_tgt, beta_s, beta_t)
        raw = q_base + delta + bonus
        Q = clip_values(raw, h, t.horizon) if self.clip else raw
        self.q_base_[h], self.delta_[h], self.bonus_[h] = q_base, delta, bonus
        self.Q_[h], self.Q_raw_[h] = Q, raw

        if self.record_diagnostics:
            self.diagnostics_.append(
                dict(
                    episode=n,
                    stage=h,
                    n=len(tb),
                    effective_dimension=src["eff"],
                    information_gain=model.information_gain(),
                    coverage_constant=coverage_constant(src["var"], src["n"]),
                )
            )

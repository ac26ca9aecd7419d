"""Two-stage exploration bonus and optimistic values."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..krr import KernelRidge

BONUS_MODES = ("practical", "theoretical")


@dataclass(frozen=True)
class BonusParams:
    """Confidence-width configuration.

    ``practical`` uses ``beta_source = c_source * H`` and
    ``beta_target = c_target * H``. ``theoretical`` evaluates the closed-form
    widths with the configured exponents; those carry unknown universal
    constants and are only meaningful for diagnostic plots.
    """

    ridge: float = 1.0
    ridge_tilde: float = 1.0
    c_source: float = 1.0
    c_target: float = 1.0
    mode: str = "practical"
    horizon: int = 1
    alpha0: float = 0.5
    alpha1: float = 0.5
    beta1: float = 0.5
    clip: bool = True

    def __post_init__(self):
        if self.ridge <= 0 or self.ridge_tilde <= 0:
            raise ValueError("ridges must be positive")
        if self.c_source < 0 or self.c_target < 0:
            raise ValueError("bonus multipliers must be non-negative")
        if self.mode not in BONUS_MODES:
            raise ValueError(f"bonus mode must be one of {BONUS_MODES}")


def beta_values(params: BonusParams, n: int, n_source: int, ratio_sq_error: float = 0.0) -> tuple[float, float]:
    """``(beta_source, beta_target)`` for episode ``n`` and ``n_source`` source samples."""
    H = params.horizon
    if params.mode == "practical":
        return params.c_source * H, params.c_target * H
    n = max(n, 1)
    lt = params.ridge_tilde
    beta_t = H * np.sqrt(lt + n**params.beta1 / lt**2 + np.log(n * H) + (lt / n) ** (-params.alpha1))
    if n_source == 0:
        beta_s = 0.0
    else:
        lam = params.ridge
        beta_s = H * np.sqrt(lam + (lam / n_source) ** (-params.alpha0) + ratio_sq_error)
    return params.c_source * float(beta_s), params.c_target * float(beta_t)


def bonus_from_variances(var_source, var_target, beta_source: float, beta_target: float) -> np.ndarray:
    return beta_source * np.sqrt(np.maximum(var_source, 0.0)) + beta_target * np.sqrt(np.maximum(var_target, 0.0))


def compute_bonus(
    source_state: KernelRidge | None,
    target_state: KernelRidge,
    x,
    params: BonusParams,
    n: int,
    n_source: int,
    ratio_sq_error: float = 0.0,
):
    """``beta_s * sqrt(var_source(x)) + beta_t * sqrt(var_target(x))``.

    ``source_state`` may be ``None`` when there is no source data; its term
    then vanishes.
    """
    if n < 1:
        raise ValueError("episode index must be >= 1")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    beta_s, beta_t = beta_values(params, n, n_source, ratio_sq_error)
    var_s = np.zeros(len(X)) if source_state is None else source_state.posterior_variance(X)
    out = bonus_from_variances(var_s, target_state.posterior_variance(X), beta_s, beta_t)
    return float(out[0]) if single else out


@dataclass
class TwoStageEstimate:
    """Baseline and correction evaluated on one stage's ``(S, A)`` domain."""

    q_base: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        if np.shape(self.q_base) != np.shape(self.delta):
            raise ValueError("baseline and correction must share the (s, a) domain")

    @property
    def q_trans(self) -> np.ndarray:
        return self.q_base + self.delta


def clip_values(values, h: int, horizon: int):
    """Clip to ``[0, H - h]`` (0-based stage ``h``)."""
    return np.clip(values, 0.0, horizon - h)


def optimistic_q(estimate: TwoStageEstimate, bonus, h: int, s: int, a: int, horizon: int, clip: bool = True) -> float:
    b = bonus(s, a) if callable(bonus) else np.asarray(bonus)[s, a] if np.ndim(bonus) else bonus
    val = float(estimate.q_trans[s, a] + b)
    return float(clip_values(val, h, horizon)) if clip else val

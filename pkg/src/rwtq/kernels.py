"""Kernels on state-action encodings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

KINDS = ("rbf", "tabular_delta", "scaled")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel description.

    ``scaled`` wraps ``base`` and multiplies it by ``factor``; with
    ``factor <= 1`` every Gram eigenvalue of the wrapped kernel is dominated
    by the base kernel's, which is how the correction space is made smaller
    than the baseline space.
    """

    kind: str = "rbf"
    lengthscale: float = 1.0
    scale: float = 1.0
    base: "KernelSpec | None" = None
    factor: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kernel kind must be one of {KINDS}, got {self.kind!r}")
        if self.lengthscale <= 0 or self.scale <= 0:
            raise ValueError("lengthscale and scale must be positive")
        if self.kind == "scaled":
            if self.base is None:
                raise ValueError("scaled kernel needs a base kernel")
            if self.factor <= 0:
                raise ValueError("scaled kernel factor must be positive")

    @classmethod
    def scaled_from(cls, base: "KernelSpec", factor: float) -> "KernelSpec":
        return cls(kind="scaled", base=base, factor=factor)

    @property
    def diagonal(self) -> float:
        """``k(x, x)``, constant for every supported kind."""
        if self.kind == "scaled":
            return self.factor * self.base.diagonal
        return self.scale

    def __call__(self, X, Y=None) -> np.ndarray:
        return gram_matrix(self, X, Y)


def gram_matrix(spec: KernelSpec, X, Y=None) -> np.ndarray:
    """Cross-Gram matrix ``k(X_i, Y_j)``; ``Y`` defaults to ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[0] == 0 or Y.shape[0] == 0:
        return np.zeros((X.shape[0], Y.shape[0]))
    if spec.kind == "scaled":
        return spec.factor * gram_matrix(spec.base, X, Y)
    if spec.kind == "tabular_delta":
        return spec.scale * (cdist(X, Y, "sqeuclidean") == 0).astype(float)
    d2 = cdist(X, Y, "sqeuclidean")
    return spec.scale * np.exp(-0.5 * d2 / spec.lengthscale**2)


def kernel_eval(spec: KernelSpec, x, x_prime) -> float:
    return float(gram_matrix(spec, np.atleast_1d(x)[None, :], np.atleast_1d(x_prime)[None, :])[0, 0])


def encode_state_actions(state_features: np.ndarray, states, actions, num_actions: int) -> np.ndarray:
    """Concatenate state features with a one-hot action block."""
    states = np.asarray(states, dtype=np.int64).ravel()
    actions = np.asarray(actions, dtype=np.int64).ravel()
    onehot = np.zeros((len(actions), num_actions))
    onehot[np.arange(len(actions)), actions] = 1.0
    return np.hstack([state_features[states], onehot])


def all_state_actions(state_features: np.ndarray, num_actions: int) -> np.ndarray:
    """Encodings of every ``(s, a)`` in row-major ``s * A + a`` order."""
    S = state_features.shape[0]
    s, a = np.divmod(np.arange(S * num_actions), num_actions)
    return encode_state_actions(state_features, s, a, num_actions)

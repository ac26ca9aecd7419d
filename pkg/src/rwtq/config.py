"""Flat ``key = value`` experiment configuration."""
from __future__ import annotations

import hashlib
import typing
from dataclasses import asdict, dataclass, fields, replace

VARIANTS = ("rwt_tabular", "rwt_kernel_ofu", "target_only", "naive_pooled")
RATIO_MODES = ("identity", "exact")
TILDE_KINDS = ("scaled", "rbf")


class ConfigError(ValueError):
    """Invalid configuration; ``keys`` names the offending entries."""

    def __init__(self, message: str, keys: typing.Sequence[str] = ()):
        super().__init__(message)
        self.keys = list(keys)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a multi-seed run.

    Defaults reproduce the tabular grid study: a 4-D grid of side 9, ``H = 8``,
    ``sigma_delta = 3``, 300 episodes, step size 5e-2, minibatch 64, epsilon
    decaying linearly 1 -> 0 and 1024 uniform-random source episodes.

    Exactly one of ``source_episodes`` (static pool) and ``kappa`` (growth
    mode) must be set. Run seeds are ``seed, seed + 1, ..., seed + num_seeds - 1``.
    """

    variant: str = "rwt_tabular"
    # environment
    env_path: str | None = None
    dims: int = 4
    side: int = 9
    horizon: int = 8
    num_actions: int = 4
    target_reward_std: float = 1.0
    delta_std: float = 3.0
    num_sources: int = 1
    env_seed: int = 0
    discount: float = 0.99
    normalize_rewards: bool = False
    # source supply
    source_episodes: int | None = 1024
    kappa: float | None = None
    source_path: str | None = None
    ratio: str = "identity"
    # training loop
    episodes: int = 300
    lr: float = 0.05
    batch_size: int = 64
    stage1: str = "ridge"
    schedule: str = "epsilon_greedy_linear"
    eps_start: float = 1.0
    eps_end: float = 0.0
    init_value: float | None = 0.0
    divergence_factor: float = 10.0
    # kernel learner
    kernel: str = "rbf"
    lengthscale: float = 0.5
    kernel_scale: float = 1.0
    tilde_kind: str = "scaled"
    tilde_factor: float = 1.0
    tilde_lengthscale: float = 1.0
    ridge: float = 1.0
    ridge_tilde: float = 1.0
    c_source: float = 1.0
    c_target: float = 1.0
    bonus_mode: str = "practical"
    alpha0: float = 0.5
    alpha1: float = 0.5
    beta1: float = 0.5
    clip: bool = False
    record_diagnostics: bool = False
    # seeds
    seed: int = 0
    num_seeds: int = 10
    final_window: int = 50

    def __post_init__(self):
        bad = []
        if self.variant not in VARIANTS:
            bad.append(("variant", f"must be one of {VARIANTS}"))
        if self.episodes < 1:
            bad.append(("episodes", "must be >= 1"))
        if self.num_seeds < 1:
            bad.append(("num_seeds", "must be >= 1"))
        if (self.source_episodes is None) == (self.kappa is None):
            bad.append(("source_episodes", "set exactly one of source_episodes and kappa"))
        if self.source_episodes is not None and self.source_episodes < 0:
            bad.append(("source_episodes", "must be >= 0"))
        if self.kappa is not None and self.kappa < 0:
            bad.append(("kappa", "must be >= 0"))
        if self.ratio not in RATIO_MODES:
            bad.append(("ratio", f"must be one of {RATIO_MODES}"))
        if self.tilde_kind not in TILDE_KINDS:
            bad.append(("tilde_kind", f"must be one of {TILDE_KINDS}"))
        if not 0 < self.discount <= 1:
            bad.append(("discount", "must lie in (0, 1]"))
        if self.final_window < 1:
            bad.append(("final_window", "must be >= 1"))
        if bad:
            raise ConfigError("; ".join(f"{k}: {m}" for k, m in bad), [k for k, _ in bad])

    @property
    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.num_seeds)]

    def to_dict(self) -> dict:
        return asdict(self)

    def with_updates(self, **kw) -> "ExperimentConfig":
        unknown = sorted(set(kw) - set(_field_types()))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}", unknown)
        # naming one source-supply mode switches the other off
        if kw.get("kappa") is not None and "source_episodes" not in kw:
            kw["source_episodes"] = None
        if kw.get("source_episodes") is not None and "kappa" not in kw:
            kw["kappa"] = None
        return replace(self, **kw)

    def hash(self) -> str:
        return hashlib.sha256(serialize_config(self).encode()).hexdigest()


def _field_types() -> dict[str, type]:
    hints = typing.get_type_hints(ExperimentConfig)
    return {f.name: hints[f.name] for f in fields(ExperimentConfig)}


def _parse_value(key: str, text: str, tp):
    text = text.strip()
    args = typing.get_args(tp)
    optional = type(None) in args
    base = next((a for a in args if a is not type(None)), tp) if args else tp
    if optional and text.lower() in ("none", ""):
        return None
    try:
        if base is bool:
            low = text.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if base is int:
            return int(text)
        if base is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {base.__name__}", [key]) from None


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_pairs(pairs: typing.Iterable[str]) -> dict:
    """Parse ``key=value`` strings into typed values; unknown keys are rejected."""
    types = _field_types()
    out, unknown = {}, []
    for raw in pairs:
        if "=" not in raw:
            raise ConfigError(f"expected key=value, got {raw!r}", [raw])
        key, value = (p.strip() for p in raw.split("=", 1))
        if key not in types:
            unknown.append(key)
            continue
        out[key] = _parse_value(key, value, types[key])
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", unknown)
    return out


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a config file body; blank lines and ``#`` comments are ignored."""
    lines = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    return (base or ExperimentConfig()).with_updates(**parse_pairs(lines))


def serialize_config(config: ExperimentConfig) -> str:
    return "".join(f"{k} = {_format_value(v)}\n" for k, v in asdict(config).items())


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", ["config"]) from None
    return parse_config(text, base)


def save_config(config: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_config(config))


PRESETS: dict[str, ExperimentConfig] = {
    "tabular-grid": ExperimentConfig(),
    # reduced grid for the kernel learner; rewards mapped onto [0, 1] so the
    # optimistic clip at H - h is a valid upper bound
    "kernel-reduced": ExperimentConfig(
        variant="rwt_kernel_ofu",
        dims=2,
        side=5,
        horizon=4,
        delta_std=0.5,
        normalize_rewards=True,
        source_episodes=256,
        episodes=400,
        schedule="ucb_greedy",
        eps_start=0.0,
        eps_end=0.0,
        init_value=None,
        lengthscale=0.2,
        c_source=0.1,
        c_target=0.1,
        clip=True,
        num_seeds=20,
    ),
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}", ["preset"]) from None

"""Re-weighted targeting (RWT) Q-learning for transfer in episodic MDPs."""
__version__ = "0.1.0"

from .align import DensityRatioProvider, rwt_backup_exact, rwt_pseudo_label, residual_label
from .config import ExperimentConfig, load_config, preset
from .env import EpisodicMdp, GridWorldSpec, build_random_reward_grid, evaluate_policy, value_iteration
from .harness import run_experiment, run_seed
from .kernels import KernelSpec
from .krr import KernelRidge
from .learners import KernelOFUAgent, TabularQAgent

__all__ = [
    "DensityRatioProvider",
    "EpisodicMdp",
    "ExperimentConfig",
    "GridWorldSpec",
    "KernelOFUAgent",
    "KernelRidge",
    "KernelSpec",
    "TabularQAgent",
    "build_random_reward_grid",
    "evaluate_policy",
    "load_config",
    "preset",
    "residual_label",
    "rwt_backup_exact",
    "run_experiment",
    "run_seed",
    "rwt_pseudo_label",
    "value_iteration",
]

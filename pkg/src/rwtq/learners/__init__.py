from .base import BaseAgent
from .bonus import BonusParams, TwoStageEstimate, beta_values, compute_bonus, optimistic_q
from .exploration import ExplorationSchedule, select_action
from .kernel_ofu import KernelOFUAgent, stage1_fit_kernel, stage2_fit_kernel
from .tabular import (
    TabularQ,
    TabularQAgent,
    tabular_baseline_update,
    tabular_ridge_baseline,
    tabular_two_stage_update,
)

__all__ = [
    "BaseAgent",
    "BonusParams",
    "ExplorationSchedule",
    "KernelOFUAgent",
    "TabularQ",
    "TabularQAgent",
    "TwoStageEstimate",
    "beta_values",
    "compute_bonus",
    "optimistic_q",
    "select_action",
    "stage1_fit_kernel",
    "stage2_fit_kernel",
    "tabular_baseline_update",
    "tabular_ridge_baseline",
    "tabular_two_stage_update",
]

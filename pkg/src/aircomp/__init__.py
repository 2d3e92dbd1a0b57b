"""Multi-cluster over-the-air computation toolkit.

Alternating optimization with successive convex approximation, an unfolded
graph-network solver trained unsupervised, closed-form baselines, and batch
orchestration with CSV artifacts.
"""

from .scenario import (NetworkRealization, ScenarioConfig,
                       deserialize_realization, sample_realization,
                       serialize_realization)
from .metrics import (RateReport, TransceiverStrategy, analytic_mse,
                      empirical_mse, weighted_sum_rate)
from .ao import alternating_optimize, transmit_optimize
from .baselines import apt_strategy, fpt_strategy
from .model import (ModelConfig, ModelParams, init_params, load_params,
                    model_forward, save_params)
from .training import TrainConfig, TrainLog, evaluate, train

__all__ = [
    "NetworkRealization", "ScenarioConfig", "deserialize_realization",
    "sample_realization", "serialize_realization",
    "RateReport", "TransceiverStrategy", "analytic_mse", "empirical_mse",
    "weighted_sum_rate",
    "alternating_optimize", "transmit_optimize",
    "apt_strategy", "fpt_strategy",
    "ModelConfig", "ModelParams", "init_params", "load_params",
    "model_forward", "save_params",
    "TrainConfig", "TrainLog", "evaluate", "train",
]

__version__ = "0.1.0"

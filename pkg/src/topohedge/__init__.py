"""Deep hedging of a cliquet under Heston with topological input features."""

from .cliquet import CliquetSpec, cliquet_payout, payout_series
from .heston import HestonParams, PathSet, correlated_normals, simulate_paths
from .network import PolicyParams, PolicyState, init_params, policy_step, unroll_episode
from .tda import PersistenceDiagram, diagram_norms, rips_persistence_0d, rolling_tda_features
from .trainer import TrainConfig, build_features, hedge_pnl, train, train_step, variance_loss

__all__ = [
    "CliquetSpec", "cliquet_payout", "payout_series",
    "HestonParams", "PathSet", "correlated_normals", "simulate_paths",
    "PolicyParams", "PolicyState", "init_params", "policy_step", "unroll_episode",
    "PersistenceDiagram", "diagram_norms", "rips_persistence_0d", "rolling_tda_features",
    "TrainConfig", "build_features", "hedge_pnl", "train", "train_step", "variance_loss",
]
__version__ = "0.1.0"

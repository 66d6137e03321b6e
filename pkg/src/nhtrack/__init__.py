"""Online-learning tracker built on NormalHedge, with Bayes and particle-filter baselines."""

from .hedge import NormalHedge, compute_weights, quantile_regret, solve_potential, update_regrets

__all__ = ["NormalHedge", "compute_weights", "quantile_regret", "solve_potential", "update_regrets"]
__version__ = "0.1.0"

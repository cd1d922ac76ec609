"""Similarity-aware test suite minimization with a masked PPO agent."""

__version__ = "0.1.0"

from .agent import TrainConfig, train
from .embed import compute_embeddings, compute_similarity
from .evalkit import compute_metrics, fit_runtime_model
from .graph import build_graph, neighbors
from .instance import TsmInstance, generate_synthetic, load_instance, save_instance, validate
from .model import (
    Selection,
    bicriteria_objective,
    evaluate_objective,
    is_feasible,
    solve_greedy,
    solve_oracle,
    trip_objective,
)

__all__ = [
    "TrainConfig", "train", "compute_embeddings", "compute_similarity", "compute_metrics",
    "fit_runtime_model", "build_graph", "neighbors", "TsmInstance", "generate_synthetic",
    "load_instance", "save_instance", "validate", "Selection", "bicriteria_objective",
    "evaluate_objective", "is_feasible", "solve_greedy", "solve_oracle", "trip_objective",
]

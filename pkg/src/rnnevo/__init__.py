"""Neuroevolution of recurrent networks with island extinction and repopulation."""
from .config import ConfigError, DataConfig, ExperimentConfig, RunConfig, load_config
from .data import DataError, TimeSeriesSet, from_arrays, load_csv, synthetic_series
from .engine import ExperimentRecord, run
from .genome import (EdgeGene, Genome, InnovationCounter, NodeGene, NodeKind, load_genome,
                     minimal_genome, save_genome, structural_distance, validate)
from .islands import ExtinctionPolicy, IslandPopulation
from .neat import NeatConfig, NeatPopulation
from .operators import EvoConfig, crossover, mutate
from .runtime import TrainConfig, evaluate_mse, train, unroll
from .stats import mann_whitney_u, summarize

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataConfig", "DataError", "EdgeGene", "EvoConfig", "ExperimentConfig",
    "ExperimentRecord", "ExtinctionPolicy", "Genome", "InnovationCounter", "IslandPopulation",
    "NeatConfig", "NeatPopulation", "NodeGene", "NodeKind", "RunConfig", "TimeSeriesSet",
    "TrainConfig", "crossover", "evaluate_mse", "from_arrays", "load_config", "load_csv",
    "load_genome", "mann_whitney_u", "minimal_genome", "mutate", "run", "save_genome",
    "structural_distance", "summarize", "synthetic_series", "train", "unroll", "validate",
]

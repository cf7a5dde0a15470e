"""Spatially-structured evolutionary algorithms on complex network topologies."""
from .engine import EdgeWeights, EngineConfig, GenerationEvent, Population, run
from .metrics import RunMetrics, genotypic_entropy, phenotypic_entropy
from .problems import Kind, ProblemSpec
from .topology import Graph, GraphStats, gen_complete, gen_er, gen_scale_free, gen_small_world, stats

__all__ = [
    "EdgeWeights", "EngineConfig", "GenerationEvent", "Graph", "GraphStats", "Kind",
    "Population", "ProblemSpec", "RunMetrics", "gen_complete", "gen_er", "gen_scale_free",
    "gen_small_world", "genotypic_entropy", "phenotypic_entropy", "run", "stats",
]

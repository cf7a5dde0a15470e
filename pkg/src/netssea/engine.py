"""Synchronous spatially-structured EA.

One generation: every node ``i`` picks a neighbour (uniformly, or in
proportion to edge weights), mutates a copy of it bitwise, and takes the copy
if its fitness is at least its own. All nodes read generation ``t`` and the
results become generation ``t+1`` together.

Random draws are vectorized but consumed in a fixed order per generation:
``n`` selection uniforms, then ``n`` binomial flip counts, then flip
positions row by row. A run is therefore bit-reproducible from its seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .problems import ProblemSpec, random_genomes
from .topology import Graph, GraphError

# above this per-bit rate a dense Bernoulli mask is cheaper than sparse positions
_DENSE_RATE = 0.05


class TopologyError(GraphError):
    """Graph cannot host a run (isolated or disconnected nodes)."""


@dataclass
class Population:
    genomes: np.ndarray
    fitness: np.ndarray
    block_ones: np.ndarray
    generation: int = 0

    @classmethod
    def from_genomes(cls, genomes, spec: ProblemSpec, generation: int = 0) -> "Population":
        genomes = np.ascontiguousarray(genomes, dtype=np.uint8)
        blocks = spec.block_ones(genomes)
        return cls(genomes, spec.fitness_from_blocks(blocks), blocks, generation)

    @property
    def size(self) -> int:
        return self.genomes.shape[0]

    def n_optimal(self, spec: ProblemSpec) -> int:
        return int(np.count_nonzero(self.fitness == spec.max_fitness))


@dataclass(frozen=True, eq=False)
class EdgeWeights:
    """One weight per directed edge, aligned with ``graph.indices``."""
    graph: Graph
    w: np.ndarray

    @classmethod
    def ones(cls, graph: Graph) -> "EdgeWeights":
        if graph.is_complete:
            raise TopologyError("weighted selection needs an explicit graph")
        return cls(graph, np.ones(graph.indices.size))

    @classmethod
    def from_undirected(cls, graph: Graph, weights: dict) -> "EdgeWeights":
        src = np.repeat(np.arange(graph.n), graph.degrees)
        w = np.array([weights[(min(a, b), max(a, b))] for a, b in zip(src.tolist(), graph.indices.tolist())],
                     dtype=float)
        return cls(graph, w)

    def weight(self, i: int, j: int) -> float:
        nb = self.graph.neighbors(i)
        pos = np.searchsorted(nb, j)
        if pos >= nb.size or nb[pos] != j:
            raise KeyError((i, j))
        return float(self.w[self.graph.indptr[i] + pos])

    def probabilities(self, i: int) -> np.ndarray:
        """Selection probabilities over ``graph.neighbors(i)``."""
        seg = self.w[self.graph.indptr[i]:self.graph.indptr[i + 1]]
        if np.any(seg < 0):
            raise AssertionError(f"negative edge weight at node {i}")
        total = seg.sum()
        if total <= 0:
            return np.full(seg.size, 1.0 / seg.size)
        return seg / total


@dataclass
class EngineConfig:
    problem: ProblemSpec
    graph: Graph
    mutation_rate: float | None = None
    alpha: float = 0.0
    max_generations: int = 5000
    freeze_mutation_after_fht: bool = False
    early_stop_on_fct: bool = True
    seed: int | None = None

    def __post_init__(self):
        if self.mutation_rate is None:
            self.mutation_rate = 1.0 / self.problem.length
        if not 0 < self.mutation_rate <= 1:
            raise ValueError(f"mutation_rate must be in (0, 1], got {self.mutation_rate}")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")


@dataclass
class GenerationEvent:
    generation: int
    replaced: np.ndarray
    newly_optimal: np.ndarray
    frozen: bool = False

    def record(self) -> dict:
        return {
            "generation": self.generation,
            "replaced": int(np.count_nonzero(self.replaced)),
            "newly_optimal": int(self.newly_optimal.size),
        }

    def to_json(self) -> str:
        return json.dumps(self.record(), separators=(",", ":"))


def check_topology(g: Graph) -> None:
    if g.n < 2:
        raise TopologyError(f"a run needs at least 2 nodes, got {g.n}")
    if g.is_complete:
        return
    isolated = np.flatnonzero(g.degrees == 0)
    if isolated.size:
        raise TopologyError(f"{isolated.size} isolated node(s), first is {isolated[0]}")
    if not g.is_connected():
        raise TopologyError("graph is disconnected")


def init_population(config: EngineConfig, rng: np.random.Generator) -> Population:
    check_topology(config.graph)
    genomes = random_genomes(config.graph.n, config.problem, rng)
    return Population.from_genomes(genomes, config.problem)


# -- single-node operators ---------------------------------------------------

def select_uniform(i: int, g: Graph, rng: np.random.Generator) -> int:
    k = g.degree(i)
    if k < 1:
        raise TopologyError(f"node {i} is isolated")
    if g.is_complete:
        j = int(rng.integers(g.n - 1))
        return j + (j >= i)
    return int(g.indices[g.indptr[i] + rng.integers(k)])


def select_weighted(i: int, g: Graph, wts: EdgeWeights, rng: np.random.Generator) -> int:
    if g.degree(i) < 1:
        raise TopologyError(f"node {i} is isolated")
    p = wts.probabilities(i)
    return int(g.neighbors(i)[rng.choice(p.size, p=p)])


def mutate(g: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Copy of ``g`` with each bit flipped independently with probability ``rate``."""
    if not 0 < rate <= 1:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    g = np.asarray(g, dtype=np.uint8)
    return g ^ (rng.random(g.shape) < rate).astype(np.uint8)


# -- whole-population operators ------------------------------------------------

def select_all(g: Graph, rng: np.random.Generator, wts: EdgeWeights | None = None) -> np.ndarray:
    """One selected neighbour per node, drawn from a single block of uniforms."""
    n = g.n
    u = rng.random(n)
    if g.is_complete:
        j = (u * (n - 1)).astype(np.int64)
        return j + (j >= np.arange(n))
    deg = np.diff(g.indptr)
    start = g.indptr[:-1]
    if wts is None:
        off = np.minimum((u * deg).astype(np.int64), deg - 1)
        return g.indices[start + off]
    w = wts.w
    if np.any(w < 0):
        raise AssertionError("negative edge weight")
    cw = np.concatenate([[0.0], np.cumsum(w)])
    seg_lo = cw[g.indptr[:-1]]
    seg_sum = cw[g.indptr[1:]] - seg_lo
    pos = np.searchsorted(cw, seg_lo + u * seg_sum, side="right") - 1
    pos = np.clip(pos, start, g.indptr[1:] - 1)
    # an all-zero neighbourhood falls back to uniform choice
    dead = seg_sum <= 0
    if np.any(dead):
        pos[dead] = start[dead] + np.minimum((u[dead] * deg[dead]).astype(np.int64), deg[dead] - 1)
    return g.indices[pos]


def mutation_flips(m: int, length: int, rate: float, rng: np.random.Generator):
    """Positions of independent per-bit flips over an ``(m, length)`` block.

    Returns ``(rows, cols)``; each (row, col) pair appears at most once.
    """
    if rate >= _DENSE_RATE:
        rows, cols = np.nonzero(rng.random((m, length)) < rate)
        return rows, cols
    counts = rng.binomial(length, rate, size=m)
    rows = np.repeat(np.arange(m), counts)
    cols = rng.integers(0, length, size=rows.size)
    # a k-subset needs distinct positions: redraw collisions until none remain
    while rows.size:
        keys = rows * length + cols
        _, first = np.unique(keys, return_index=True)
        if first.size == keys.size:
            break
        dup = np.ones(keys.size, dtype=bool)
        dup[first] = False
        cols[dup] = rng.integers(0, length, size=int(dup.sum()))
    return rows, cols


def step(pop: Population, config: EngineConfig, rng: np.random.Generator,
         wts: EdgeWeights | None = None, frozen: bool = False) -> tuple[Population, GenerationEvent]:
    spec = config.problem
    sel = select_all(config.graph, rng, wts)
    blocks = pop.block_ones[sel]
    if frozen:
        rows = cols = np.empty(0, dtype=np.int64)
    else:
        rows, cols = mutation_flips(pop.size, spec.length, config.mutation_rate, rng)
        delta = 1 - 2 * pop.genomes[sel[rows], cols].astype(np.int64)
        np.add.at(blocks, (rows, cols // spec.b), delta)
    cand_fit = spec.fitness_from_blocks(blocks)
    accept = cand_fit >= pop.fitness

    genomes = pop.genomes.copy()
    genomes[accept] = pop.genomes[sel[accept]]
    keep = accept[rows]
    genomes[rows[keep], cols[keep]] ^= 1
    new = Population(
        genomes,
        np.where(accept, cand_fit, pop.fitness),
        np.where(accept[:, None], blocks, pop.block_ones),
        pop.generation + 1,
    )
    best = spec.max_fitness
    newly = np.flatnonzero((new.fitness == best) & (pop.fitness != best))
    return new, GenerationEvent(new.generation, accept, newly, frozen)


def update_weights(wts: EdgeWeights, fitness: np.ndarray, alpha: float) -> EdgeWeights:
    """w_ij <- clamp(w_ij + alpha * (f_i - f_j), 0, 1) on every directed edge."""
    g = wts.graph
    src = np.repeat(np.arange(g.n), np.diff(g.indptr))
    f = np.asarray(fitness, dtype=float)
    w = np.clip(wts.w + alpha * (f[src] - f[g.indices]), 0.0, 1.0)
    return EdgeWeights(g, w)


def iter_run(config: EngineConfig, population: Population | None = None,
             rng: np.random.Generator | None = None) -> Iterator[tuple[Population, GenerationEvent, EdgeWeights | None]]:
    """Yield ``(population, event, weights)`` for generation 0 and every step after.

    Stops at ``max_generations`` or, with ``early_stop_on_fct``, as soon as
    every individual is optimal.
    """
    check_topology(config.graph)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    spec = config.problem
    pop = init_population(config, rng) if population is None else population
    if pop.size != config.graph.n:
        raise ValueError(f"population size {pop.size} != graph size {config.graph.n}")
    weighted = config.alpha != 0
    wts = EdgeWeights.ones(config.graph) if weighted else None

    initial = np.flatnonzero(pop.fitness == spec.max_fitness)
    yield pop, GenerationEvent(pop.generation, np.zeros(pop.size, dtype=bool), initial), wts
    while pop.generation < config.max_generations:
        n_opt = pop.n_optimal(spec)
        if config.early_stop_on_fct and n_opt == pop.size:
            return
        frozen = config.freeze_mutation_after_fht and n_opt > 0
        pop, event = step(pop, config, rng, wts, frozen)
        if weighted:
            wts = update_weights(wts, pop.fitness, config.alpha)
        yield pop, event, wts


def run(config: EngineConfig, population: Population | None = None,
        observer: Callable[[GenerationEvent, Population], None] | None = None,
        event_log=None) -> tuple[Population, list[GenerationEvent]]:
    """Run to termination. Returns the final population and the event list.

    ``event_log`` (a text stream) receives one JSON line per generation.
    """
    events = []
    pop = population
    for pop, event, _ in iter_run(config, population):
        events.append(event)
        if observer is not None:
            observer(event, pop)
        if event_log is not None:
            event_log.write(event.to_json() + "\n")
    return pop, events

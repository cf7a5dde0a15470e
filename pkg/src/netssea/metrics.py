"""Run observers: hitting/convergence times, entropies, optima counts and
the spreading of the first optimum."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .engine import GenerationEvent, Population
from .problems import ProblemSpec
from .topology import Graph, bfs_distances

SERIES_HEADER = ["gen", "n_optimal", "distinct_optima", "cum_optima", "H_g", "H_p",
                 "mean_fitness", "best_fitness"]
SPREAD_HEADER = ["node", "first_opt_gen", "distance"]


class SequencingError(RuntimeError):
    pass


def class_entropy(labels) -> float:
    """-sum f ln f over the occupied classes of ``labels``."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("entropy of an empty population")
    _, counts = np.unique(labels, return_counts=True)
    if counts.size == 1:
        return 0.0
    f = counts / labels.size
    return float(-(f * np.log(f)).sum())


def _genomes(pop) -> np.ndarray:
    return pop.genomes if isinstance(pop, Population) else np.asarray(pop)


def genotypic_entropy(pop) -> float:
    """Entropy over Hamming-distance-from-zero classes (ones counts)."""
    g = _genomes(pop)
    return class_entropy(g.reshape(g.shape[0], -1).sum(axis=1))


def phenotypic_entropy(pop, spec: ProblemSpec | None = None) -> float:
    """Entropy over fitness values. ``pop`` is a Population, or a genome
    matrix together with ``spec``."""
    if isinstance(pop, Population):
        return class_entropy(pop.fitness)
    if spec is None:
        raise ValueError("a genome matrix needs its ProblemSpec")
    return class_entropy(spec.fitness(np.asarray(pop)))


def distinct_rows(genomes: np.ndarray) -> list[bytes]:
    """Distinct genotypes as packed-bit byte strings (sorted)."""
    if genomes.shape[0] == 0:
        return []
    packed = np.packbits(genomes, axis=1)
    rows = np.ascontiguousarray(packed).view(np.dtype((np.void, packed.shape[1]))).ravel()
    return [r.tobytes() for r in np.unique(rows)]


@dataclass
class RunMetrics:
    """Observer for one run. Feed it every ``(event, population)`` in order."""
    problem: ProblemSpec
    population_size: int
    fht: int | None = None
    fct: int | None = None
    series: list[tuple] = field(default_factory=list)
    max_distinct_optima: int = 0
    first_optimal_generation: np.ndarray | None = None
    _seen: set = field(default_factory=set, repr=False)

    def __post_init__(self):
        if self.first_optimal_generation is None:
            self.first_optimal_generation = np.full(self.population_size, -1, dtype=np.int64)

    def __call__(self, event: GenerationEvent, pop: Population) -> None:
        self.observe(event, pop)

    @property
    def last_generation(self) -> int | None:
        return self.series[-1][0] if self.series else None

    @property
    def cum_distinct_optima(self) -> int:
        return len(self._seen)

    @property
    def n0_nodes(self) -> np.ndarray:
        if self.fht is None:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero(self.first_optimal_generation == self.fht)

    def observe(self, event: GenerationEvent, pop: Population) -> None:
        expected = 0 if not self.series else self.last_generation + 1
        if event.generation != expected or pop.generation != event.generation:
            raise SequencingError(f"expected generation {expected}, got event {event.generation}"
                                  f" / population {pop.generation}")
        spec = self.problem
        t = event.generation
        optimal = pop.fitness == spec.max_fitness
        n_opt = int(np.count_nonzero(optimal))
        fresh = event.newly_optimal
        self.first_optimal_generation[fresh] = t
        distinct = distinct_rows(pop.genomes[optimal])
        self._seen.update(distinct)
        self.max_distinct_optima = max(self.max_distinct_optima, len(distinct))
        if n_opt > 0 and self.fht is None:
            self.fht = t
        if n_opt == pop.size and self.fct is None:
            self.fct = t
        self.series.append((
            t, n_opt, len(distinct), len(self._seen),
            class_entropy(pop.block_ones.sum(axis=1)),
            class_entropy(pop.fitness),
            float(pop.fitness.mean()),
            int(pop.fitness.max()),
        ))

    def column(self, name: str) -> np.ndarray:
        return np.array([row[SERIES_HEADER.index(name)] for row in self.series])

    def summary(self) -> dict:
        return {
            "fht": self.fht,
            "fct": self.fct,
            "max_distinct_optima": self.max_distinct_optima,
            "cum_distinct_optima": self.cum_distinct_optima,
            "generations": self.last_generation,
        }

    def write_series_csv(self, out, provenance: dict | None = None) -> None:
        write_csv(out, SERIES_HEADER, self.series, provenance)


def write_csv(out, header, rows, provenance=None):
    own = isinstance(out, (str, bytes)) or hasattr(out, "__fspath__")
    fh = open(out, "w", newline="", encoding="utf-8") if own else out
    try:
        for key, value in (provenance or {}).items():
            fh.write(f"# {key}: {value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    finally:
        if own:
            fh.close()


def relative_fht(runs: Sequence, key: Callable = lambda m: m.problem.b) -> list[float | None]:
    """Each run's FHT over the smallest FHT among runs sharing its ``key``.

    Runs without an FHT get ``None`` and do not enter any group minimum.
    """
    minima: dict = {}
    for m in runs:
        if m.fht is not None:
            k = key(m)
            minima[k] = min(minima.get(k, m.fht), m.fht)
    out = []
    for m in runs:
        if m.fht is None:
            out.append(None)
        else:
            low = minima[key(m)]
            if m.fht == low:
                out.append(1.0)
            else:
                # a group minimum of 0 (optimum in the initial population) has no finite ratio
                out.append(m.fht / low if low > 0 else float("inf"))
    return out


@dataclass
class SpreadRecord:
    first_optimal_generation: np.ndarray
    distance: np.ndarray
    fht: int

    @classmethod
    def from_metrics(cls, metrics: RunMetrics, g: Graph) -> "SpreadRecord":
        if metrics.fht is None:
            raise ValueError("run never reached an optimum")
        dist = bfs_distances(g, metrics.n0_nodes)
        return cls(metrics.first_optimal_generation.copy(), dist, metrics.fht)

    def rows(self):
        return [(i, int(f), int(d)) for i, (f, d) in
                enumerate(zip(self.first_optimal_generation, self.distance))]

    def write_csv(self, out, provenance: dict | None = None) -> None:
        write_csv(out, SPREAD_HEADER, self.rows(), provenance)


@dataclass
class DistanceBucket:
    distance: int
    count: int
    median: float
    q1: float
    q3: float
    min: int
    max: int


@dataclass
class SpreadSummary:
    buckets: list[DistanceBucket]
    never_optimal: int
    unreachable: int

    def rows(self):
        return [(b.distance, b.count, b.median, b.q1, b.q3, b.min, b.max) for b in self.buckets]


def spreading_analysis(record: SpreadRecord) -> SpreadSummary:
    """Delay after FHT at which each node turned optimal, bucketed by its
    distance from the first-optimum nodes."""
    dist = record.distance
    first = record.first_optimal_generation
    reach = dist >= 0
    hit = first >= 0
    use = reach & hit
    delay = first - record.fht
    buckets = []
    for d in np.unique(dist[use]):
        x = delay[use & (dist == d)]
        q1, med, q3 = np.percentile(x, [25, 50, 75])
        buckets.append(DistanceBucket(int(d), int(x.size), float(med), float(q1), float(q3),
                                      int(x.min()), int(x.max())))
    return SpreadSummary(buckets, int(np.count_nonzero(reach & ~hit)), int(np.count_nonzero(~reach)))


def series_to_text(metrics: RunMetrics) -> str:
    buf = io.StringIO()
    metrics.write_series_csv(buf)
    return buf.getvalue()

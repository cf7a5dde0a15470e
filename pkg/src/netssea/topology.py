"""Interaction graphs: generators, BFS, summary statistics and edge-list I/O.

Graphs are stored in compressed sparse row form (``indptr``/``indices``),
sorted per node. The panmictic topology is implicit: ``is_complete`` is set
and no adjacency is stored, so a 10^4-node complete graph costs nothing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph


class GraphError(ValueError):
    """Invalid graph parameters or a graph unusable as an ssEA substrate."""


class ConstructionError(GraphError):
    """A randomized generator could not produce a valid graph."""


class EdgeListError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Graph:
    n: int
    indptr: np.ndarray | None = None
    indices: np.ndarray | None = None
    is_complete: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"graph needs at least one node, got n={self.n}")
        if not self.is_complete:
            if self.indptr is None or self.indices is None:
                raise GraphError("explicit graphs need indptr and indices")
            self.indptr.setflags(write=False)
            self.indices.setflags(write=False)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        """Build from an iterable/array of undirected ``(u, v)`` pairs.

        Rejects self-loops, duplicate edges and out-of-range endpoints.
        """
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise GraphError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise GraphError("self-loop")
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        keys = lo * n + hi
        if np.unique(keys).size != keys.size:
            raise GraphError("duplicate edge")
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(n, indptr, dst.astype(np.int64))

    @property
    def degrees(self) -> np.ndarray:
        if self.is_complete:
            return np.full(self.n, self.n - 1, dtype=np.int64)
        return np.diff(self.indptr)

    def degree(self, i: int) -> int:
        if self.is_complete:
            return self.n - 1
        return int(self.indptr[i + 1] - self.indptr[i])

    def neighbors(self, i: int) -> np.ndarray:
        if self.is_complete:
            return np.delete(np.arange(self.n), i)
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(i).tolist() for i in range(self.n)]

    @property
    def n_links(self) -> int:
        if self.is_complete:
            return self.n * (self.n - 1) // 2
        return int(self.indices.size // 2)

    @property
    def n_directed(self) -> int:
        return 2 * self.n_links

    def edges(self) -> np.ndarray:
        """Undirected edges as an ``(m, 2)`` array with ``u < v``, sorted."""
        g = self.materialize()
        src = np.repeat(np.arange(g.n), np.diff(g.indptr))
        keep = src < g.indices
        return np.column_stack([src[keep], g.indices[keep]])

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges()}

    def materialize(self) -> "Graph":
        """Explicit CSR copy of an implicit complete graph (identity otherwise)."""
        if not self.is_complete:
            return self
        n = self.n
        full = np.tile(np.arange(n), n).reshape(n, n)
        mask = ~np.eye(n, dtype=bool)
        indices = full[mask]
        indptr = np.arange(n + 1, dtype=np.int64) * (n - 1)
        return Graph(n, indptr, indices.astype(np.int64))

    def to_sparse(self) -> sp.csr_matrix:
        g = self.materialize()
        data = np.ones(g.indices.size, dtype=np.int8)
        return sp.csr_matrix((data, g.indices, g.indptr), shape=(g.n, g.n))

    def same_edges(self, other: "Graph") -> bool:
        if self.n != other.n:
            return False
        return np.array_equal(self.edges(), other.edges())

    def is_connected(self) -> bool:
        if self.is_complete or self.n == 1:
            return True
        return bool(np.all(bfs_distances(self, [0]) >= 0))

    def __repr__(self):
        kind = "complete" if self.is_complete else "explicit"
        return f"Graph(n={self.n}, links={self.n_links}, {kind})"


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_n(n):
    if n < 2:
        raise GraphError(f"invalid size: need n >= 2, got {n}")


def gen_complete(n: int) -> Graph:
    _check_n(n)
    return Graph(n, is_complete=True)


def er_probability(n: int, links: float) -> float:
    """Connection probability whose expected link count is ``links``."""
    return 2.0 * links / (n * (n - 1))


def _decode_pairs(k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    # row-major index over the strict upper triangle -> (i, j), i < j
    k = k.astype(np.int64)
    total = n * (n - 1) // 2
    rem = total - 1 - k
    t = np.floor((np.sqrt(8.0 * rem + 1) - 1) / 2).astype(np.int64)
    # guard against float rounding: t is the largest with t(t+1)/2 <= rem
    t -= (t * (t + 1) // 2) > rem
    t += ((t + 1) * (t + 2) // 2) <= rem
    i = n - 2 - t
    row_start = i * (2 * n - i - 1) // 2
    j = k - row_start + i + 1
    return i, j


def gen_er(n: int, p: float | None = None, seed=None, *, links: float | None = None) -> Graph:
    """Erdos-Renyi G(n, p); pass ``links`` instead of ``p`` to target an
    expected link count."""
    _check_n(n)
    if (p is None) == (links is None):
        raise GraphError("give exactly one of p or links")
    if links is not None:
        p = er_probability(n, links)
    if not 0.0 <= p <= 1.0:
        raise GraphError(f"invalid parameter: p={p} outside [0, 1]")
    rng = _rng(seed)
    n_pairs = n * (n - 1) // 2
    m = int(rng.binomial(n_pairs, p))
    picks = rng.choice(n_pairs, size=m, replace=False)
    i, j = _decode_pairs(np.sort(picks), n)
    return Graph.from_edges(n, np.column_stack([i, j]))


def power_law_degrees(n: int, gamma: float, k_min: int, seed=None, k_max: int | None = None) -> np.ndarray:
    """Draw ``n`` degrees from P(k) ~ k^-gamma on [k_min, k_max] with an even sum."""
    rng = _rng(seed)
    k_max = n - 1 if k_max is None else k_max
    ks = np.arange(k_min, k_max + 1)
    w = ks.astype(float) ** (-gamma)
    w /= w.sum()
    deg = rng.choice(ks, size=n, p=w)
    while deg.sum() % 2:
        deg[rng.integers(n)] = rng.choice(ks, p=w)
    return deg


def power_law_mean(gamma: float, k_min: int, k_max: int) -> float:
    ks = np.arange(k_min, k_max + 1).astype(float)
    return float((ks ** (1 - gamma)).sum() / (ks ** -gamma).sum())


def configuration_model(degrees, seed=None, max_restarts: int = 100) -> Graph:
    """Pair stubs uniformly at random, refusing self-loops and multi-links.

    Stubs that cannot be placed are re-paired among themselves; if that
    stalls, a few random links are dissolved and their stubs re-enter the
    pool. A pass that still stalls is abandoned and the whole pairing
    restarts, at most ``max_restarts`` times.
    """
    deg = np.asarray(degrees, dtype=np.int64)
    n = deg.size
    if deg.sum() % 2:
        raise GraphError("degree sequence has an odd sum")
    if deg.size and (deg.min() < 0 or deg.max() > n - 1):
        raise GraphError("degree outside [0, n-1]")
    rng = _rng(seed)
    for _ in range(max_restarts):
        edges = _pair_stubs(deg, rng)
        if edges is not None:
            return Graph.from_edges(n, edges)
    raise ConstructionError(f"stub pairing failed after {max_restarts} restarts")


def _pair_stubs(deg, rng, stall_limit=50):
    n = deg.size
    stubs = np.repeat(np.arange(n), deg)
    rng.shuffle(stubs)
    u, v = stubs[0::2], stubs[1::2]
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    keys = lo * n + hi
    _, first = np.unique(keys, return_index=True)
    good = np.zeros(keys.size, dtype=bool)
    good[first] = True
    good &= lo != hi
    links = set(keys[good].tolist())
    pool = np.concatenate([u[~good], v[~good]]).tolist()
    stalled = 0
    rounds = 0
    while pool:
        rounds += 1
        if rounds > 100 * stall_limit:
            return None
        rng.shuffle(pool)
        rest = []
        placed = 0
        for a, b in zip(pool[0::2], pool[1::2]):
            key = min(a, b) * n + max(a, b)
            if a == b or key in links:
                rest += [a, b]
            else:
                links.add(key)
                placed += 1
        pool = rest
        if placed:
            stalled = 0
            continue
        stalled += 1
        if stalled > stall_limit:
            return None
        # dissolve a couple of random links so the leftovers get new partners
        if links:
            ordered = sorted(links)
            for idx in rng.choice(len(ordered), size=min(2, len(ordered)), replace=False):
                key = ordered[idx]
                links.discard(key)
                pool += [key // n, key % n]
    keys = np.fromiter(links, dtype=np.int64, count=len(links))
    return np.column_stack([keys // n, keys % n])


def gen_scale_free(n: int, gamma: float = 2.5, k_min: int = 2, seed=None,
                   max_restarts: int = 100, k_max: int | None = None) -> Graph:
    """Configuration-model graph on a power-law degree sequence truncated to
    [k_min, k_max] (k_max defaults to n - 1)."""
    _check_n(n)
    if gamma <= 1:
        raise GraphError(f"invalid parameter: gamma={gamma} must exceed 1")
    k_max = n - 1 if k_max is None else k_max
    if not 1 <= k_min <= k_max <= n - 1:
        raise GraphError(f"invalid parameter: need 1 <= k_min <= k_max <= n-1 (k_min={k_min}, k_max={k_max})")
    rng = _rng(seed)
    deg = power_law_degrees(n, gamma, k_min, rng, k_max)
    return configuration_model(deg, rng, max_restarts=max_restarts)


def ring_lattice(n: int, k: int) -> Graph:
    if k < 1 or n < 2 * k + 1:
        raise GraphError(f"invalid ring: need k >= 1 and n >= 2k+1 (n={n}, k={k})")
    i = np.arange(n)
    edges = np.concatenate([np.column_stack([i, (i + d) % n]) for d in range(1, k + 1)])
    return Graph.from_edges(n, edges)


def gen_small_world(n: int, k: int = 2, r: float = 0.0, seed=None) -> Graph:
    """Watts-Strogatz rewiring of a ring where each node links ``k`` neighbours
    per side.

    Every ring link (i, i+d) is visited once, d = 1..k, i = 0..n-1. With
    probability ``r`` its far end is moved to a uniformly drawn node that is
    neither ``i`` nor already adjacent to ``i``. If ``i`` has no such node
    the link stays.
    """
    if k < 1 or n < 2 * k + 1:
        raise GraphError(f"invalid ring: need k >= 1 and n >= 2k+1 (n={n}, k={k})")
    if not 0.0 <= r <= 1.0:
        raise GraphError(f"invalid parameter: r={r} outside [0, 1]")
    rng = _rng(seed)
    i = np.arange(n)
    src = np.tile(i, k)
    dst = np.concatenate([(i + d) % n for d in range(1, k + 1)])
    flips = np.flatnonzero(rng.random(src.size) < r)
    if flips.size == 0:
        return Graph.from_edges(n, np.column_stack([src, dst]))
    adj = [set() for _ in range(n)]
    for a, b in zip(src.tolist(), dst.tolist()):
        adj[a].add(b)
        adj[b].add(a)
    dst = dst.copy()
    for e in flips.tolist():
        a, b = int(src[e]), int(dst[e])
        if len(adj[a]) >= n - 1:
            continue
        while True:
            w = int(rng.integers(n))
            if w != a and w not in adj[a]:
                break
        adj[a].discard(b)
        adj[b].discard(a)
        adj[a].add(w)
        adj[w].add(a)
        dst[e] = w
    return Graph.from_edges(n, np.column_stack([src, dst]))


def bfs_distances(g: Graph, sources: Iterable[int]) -> np.ndarray:
    """Hop distance from the nearest source; -1 marks unreachable nodes."""
    src = np.unique(np.asarray(list(sources), dtype=np.int64))
    if src.size == 0:
        raise ValueError("empty source set")
    if src.min() < 0 or src.max() >= g.n:
        raise ValueError("source index out of range")
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[src] = 0
    if g.is_complete:
        dist[dist < 0] = 1
        return dist
    deg = np.diff(g.indptr)
    frontier = src
    d = 0
    while frontier.size:
        d += 1
        counts = deg[frontier]
        total = int(counts.sum())
        if total == 0:
            break
        # gather all neighbour slices of the frontier in one shot
        offs = np.repeat(g.indptr[frontier] - np.cumsum(counts) + counts, counts)
        nbrs = g.indices[offs + np.arange(total)]
        nbrs = np.unique(nbrs[dist[nbrs] < 0])
        dist[nbrs] = d
        frontier = nbrs
    return dist


@dataclass
class GraphStats:
    n: int
    n_links: int
    mean_degree: float
    degree_histogram: dict[int, int]
    apl: float
    diameter: int
    mean_cc: float
    std_cc: float
    connected: bool = True
    component_size: int = 0
    cc: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "n_links": self.n_links,
            "mean_degree": self.mean_degree,
            "apl": self.apl,
            "diameter": self.diameter,
            "mean_cc": self.mean_cc,
            "std_cc": self.std_cc,
            "connected": self.connected,
            "component_size": self.component_size,
            "degree_histogram": {str(k): v for k, v in sorted(self.degree_histogram.items())},
        }


def clustering(g: Graph) -> np.ndarray:
    """Local clustering coefficient per node; 0 for degree < 2."""
    if g.is_complete:
        return np.full(g.n, 1.0 if g.n > 2 else 0.0)
    A = g.to_sparse().astype(np.int64)
    tri = np.asarray((A @ A).multiply(A).sum(axis=1)).ravel() / 2
    k = g.degrees.astype(float)
    pairs = k * (k - 1) / 2
    out = np.zeros(g.n)
    ok = pairs > 0
    out[ok] = tri[ok] / pairs[ok]
    return out


@numba.njit(cache=True)
def _bfs_all_pairs(indptr, indices, sources):
    n = indptr.size - 1
    dist = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    total = 0
    diameter = 0
    for s in sources:
        dist[:] = -1
        dist[s] = 0
        queue[0] = s
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            du = dist[u] + 1
            for e in range(indptr[u], indptr[u + 1]):
                v = indices[e]
                if dist[v] < 0:
                    dist[v] = du
                    queue[tail] = v
                    tail += 1
                    total += du
                    if du > diameter:
                        diameter = du
    return total, diameter


def stats(g: Graph) -> GraphStats:
    """APL, diameter, clustering and degree statistics.

    APL and diameter are taken over the largest connected component when the
    graph is disconnected (``connected`` is then False).
    """
    deg = g.degrees
    hist_k, hist_c = np.unique(deg, return_counts=True)
    histogram = {int(k): int(c) for k, c in zip(hist_k, hist_c)}
    cc = clustering(g)
    base = dict(
        n=g.n,
        n_links=g.n_links,
        mean_degree=float(deg.mean()),
        degree_histogram=histogram,
        mean_cc=float(cc.mean()),
        std_cc=float(cc.std()),
        cc=cc,
    )
    if g.is_complete:
        return GraphStats(apl=1.0, diameter=1, connected=True, component_size=g.n, **base)
    n_comp, labels = csgraph.connected_components(g.to_sparse(), directed=False)
    connected = n_comp == 1
    keep = np.flatnonzero(labels == np.argmax(np.bincount(labels)))
    m = keep.size
    if m < 2:
        return GraphStats(apl=0.0, diameter=0, connected=connected, component_size=m, **base)
    # BFS from every node of the largest component only reaches that component
    total, diameter = _bfs_all_pairs(g.indptr, g.indices, keep)
    return GraphStats(apl=total / (m * (m - 1)), diameter=diameter, connected=connected,
                      component_size=m, **base)


def save_edge_list(g: Graph, destination, weights: dict | None = None) -> None:
    """Write ``# nodes=<n>`` then one ``u v`` line per edge (u < v).

    With ``weights`` (mapping ``(u, v) -> w``) each line gains a third column.
    """
    lines = [f"# nodes={g.n}\n"]
    for u, v in g.edges().tolist():
        if weights is None:
            lines.append(f"{u} {v}\n")
        else:
            lines.append(f"{u} {v} {weights[(u, v)]!r}\n")
    Path(destination).write_text("".join(lines), encoding="utf-8")


def load_edge_list(source, with_weights: bool = False):
    """Parse an edge-list file. Returns a Graph, or ``(Graph, weights)`` when
    ``with_weights`` is set (weights keyed by ``(u, v)`` with u < v)."""
    text = Path(source).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise EdgeListError("empty file", 1)
    head = lines[0].strip()
    if not head.startswith("# nodes="):
        raise EdgeListError("expected header '# nodes=<n>'", 1)
    try:
        n = int(head[len("# nodes="):])
    except ValueError:
        raise EdgeListError(f"bad node count in header {head!r}", 1) from None
    if n < 1:
        raise EdgeListError(f"node count must be positive, got {n}", 1)
    seen = set()
    edges = []
    weights = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise EdgeListError(f"expected 'u v' or 'u v w', got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListError(f"non-integer node index in {line!r}", lineno) from None
        if not (0 <= u < n and 0 <= v < n):
            raise EdgeListError(f"node index out of range [0, {n})", lineno)
        if u == v:
            raise EdgeListError(f"self-loop on node {u}", lineno)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise EdgeListError(f"duplicate edge {key}", lineno)
        seen.add(key)
        edges.append(key)
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise EdgeListError(f"bad weight {parts[2]!r}", lineno) from None
            if not math.isfinite(w) or w < 0:
                raise EdgeListError(f"weight must be finite and non-negative, got {w}", lineno)
            weights[key] = w
    g = Graph.from_edges(n, np.array(edges, dtype=np.int64).reshape(-1, 2))
    if with_weights:
        return g, weights
    return g

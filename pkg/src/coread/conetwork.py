"""Co-readership graphs and cross-corpus neighbor-distribution divergence.

Two items are linked when the same reader interacted with both; the edge
weight is the number of such distinct readers. Each item's neighbor
distribution is its l1-normalized row of edge weights over a fixed, sorted
item universe shared by both corpora, so the two corpora's vectors line up
index for index.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, EventKind
from .errors import ConfigError, DataError, DegenerateInputError, SchemaError, UnknownIdError

DEFAULT_SMOOTHING = 0.01
DEFAULT_MIN_A = 4
DEFAULT_MIN_B = 2600


@dataclass
class CoGraph:
    """Undirected weighted item graph. ``adj[u][v]`` is the co-reader count."""

    nodes: tuple[str, ...]
    adj: dict[str, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = tuple(sorted(set(self.nodes)))
        for n in self.nodes:
            self.adj.setdefault(n, {})

    @classmethod
    def from_edges(cls, nodes: Iterable[str], edges: Iterable[tuple[str, str, int]]) -> "CoGraph":
        nodes = set(nodes)
        adj: dict[str, dict[str, int]] = {}
        for u, v, w in edges:
            if u == v:
                raise DataError(f"self-loop on {u!r}")
            if w < 1:
                raise DataError(f"edge ({u!r}, {v!r}) has weight {w} < 1")
            nodes.update((u, v))
            adj.setdefault(u, {})[v] = w
            adj.setdefault(v, {})[u] = w
        return cls(tuple(nodes), adj)

    def weight(self, u: str, v: str) -> int:
        return self.adj.get(u, {}).get(v, 0)

    def degree(self, u: str) -> int:
        return len(self.adj[u])

    def strength(self, u: str) -> int:
        return sum(self.adj[u].values())

    def edges(self) -> list[tuple[str, str, int]]:
        """Each edge once as (u, v, w) with u < v, sorted."""
        return [(u, v, w) for u in self.nodes for v, w in sorted(self.adj[u].items()) if u < v]

    def __contains__(self, node) -> bool:
        return node in self.adj

    def __len__(self) -> int:
        return len(self.nodes)


def induce_cograph(
    corpus: Corpus,
    universe: Iterable[str],
    *,
    kinds: Iterable[EventKind | str] | None = None,
    id_map: Mapping[str, str] | None = None,
) -> CoGraph:
    """Project reader-item events onto an item graph over *universe*.

    *id_map* translates corpus item ids into universe ids (e.g. corpus-B ids
    to their matched corpus-A ids); unmapped items are ignored. Without it
    corpus ids are used directly and must all be corpus items.
    """
    universe = set(universe)
    if id_map is None:
        unknown = sorted(universe - set(corpus.items))
        if unknown:
            raise UnknownIdError("item", unknown[0])
    adj: dict[str, dict[str, int]] = {u: {} for u in universe}
    for items in corpus.reader_items(kinds).values():
        mapped = {id_map.get(i) for i in items} if id_map is not None else set(items)
        mapped &= universe
        for u, v in combinations(sorted(mapped), 2):
            adj[u][v] = adj[u].get(v, 0) + 1
            adj[v][u] = adj[v].get(u, 0) + 1
    return CoGraph(tuple(universe), adj)


def connected_in_both(graph_a: CoGraph, graph_b: CoGraph) -> set[str]:
    return {n for n in graph_a.nodes if graph_a.degree(n) > 0 and n in graph_b and graph_b.degree(n) > 0}


def top_quartile_filter(
    items: Iterable[str],
    counts_a: Mapping[str, int],
    counts_b: Mapping[str, int],
    min_a: int = DEFAULT_MIN_A,
    min_b: int = DEFAULT_MIN_B,
) -> set[str]:
    """Items with at least *min_a* corpus-A and *min_b* corpus-B interactions (inclusive)."""
    if min_a < 0 or min_b < 0:
        raise ConfigError("thresholds must be nonnegative")
    return {i for i in items if counts_a.get(i, 0) >= min_a and counts_b.get(i, 0) >= min_b}


def neighbor_distribution(graph: CoGraph, item: str, universe: Sequence[str]) -> np.ndarray:
    """l1-normalized co-reader weights of *item* in *universe* order."""
    if item not in graph:
        raise UnknownIdError("graph node", item)
    nbrs = graph.adj[item]
    vec = np.array([0.0 if u == item else float(nbrs.get(u, 0)) for u in universe])
    total = vec.sum()
    if total <= 0:
        raise DegenerateInputError(f"{item!r} has no neighbors in the universe")
    return vec / total


def js_divergence(p: Sequence[float], q: Sequence[float], smoothing: float = DEFAULT_SMOOTHING) -> float:
    """Base-2 Jensen-Shannon divergence after additive smoothing and renormalization.

    Computed as H(m) - (H(p) + H(q)) / 2 with m the midpoint; result in [0, 1].
    """
    if smoothing < 0:
        raise ConfigError("smoothing must be nonnegative")
    p = np.asarray(p, dtype=float) + smoothing
    q = np.asarray(q, dtype=float) + smoothing
    if p.shape != q.shape:
        raise DataError(f"distributions differ in length: {p.size} vs {q.size}")
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def entropy(x):
        nz = x[x > 0]
        return float(-(nz * np.log2(nz)).sum())

    jsd = entropy(m) - 0.5 * (entropy(p) + entropy(q))
    return min(1.0, max(0.0, jsd))


@dataclass(frozen=True)
class DivergenceRow:
    item: str
    divergence: float
    degree_a: int
    degree_b: int


def divergence_ranking(
    items: Iterable[str],
    graph_a: CoGraph,
    graph_b: CoGraph,
    smoothing: float = DEFAULT_SMOOTHING,
    universe: Sequence[str] | None = None,
) -> list[DivergenceRow]:
    """Per-item JSD between the two graphs' neighbor distributions, ascending.

    The default universe is the sorted union of both graphs' nodes. Items
    without neighbors in either graph are skipped.
    """
    if universe is None:
        universe = sorted(set(graph_a.nodes) | set(graph_b.nodes))
    rows = []
    for item in sorted(set(items)):
        if item not in graph_a or item not in graph_b:
            continue
        if graph_a.degree(item) == 0 or graph_b.degree(item) == 0:
            continue
        p = neighbor_distribution(graph_a, item, universe)
        q = neighbor_distribution(graph_b, item, universe)
        rows.append(DivergenceRow(item, js_divergence(p, q, smoothing), graph_a.degree(item), graph_b.degree(item)))
    rows.sort(key=lambda r: (r.divergence, r.item))
    return rows


def top_neighbors(graph: CoGraph, item: str, k: int) -> list[tuple[str, int]]:
    if k < 1:
        raise ConfigError("k must be at least 1")
    if item not in graph:
        raise UnknownIdError("graph node", item)
    return sorted(graph.adj[item].items(), key=lambda kv: (-kv[1], kv[0]))[:k]


# ---------------------------------------------------------------- files
#
# Edge list ``u,v,weight``. A node without edges is written as ``u,,0`` so it
# survives the round trip.

GRAPH_COLUMNS = ("u", "v", "weight")


def graph_rows(graph: CoGraph) -> list[dict]:
    rows = [{"u": u, "v": v, "weight": w} for u, v, w in graph.edges()]
    rows += [{"u": n, "v": "", "weight": 0} for n in graph.nodes if graph.degree(n) == 0]
    return rows


def read_graph(path) -> CoGraph:
    path = Path(path)
    nodes, edges = set(), []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(GRAPH_COLUMNS) <= set(reader.fieldnames):
            raise SchemaError(f"graph needs columns {GRAPH_COLUMNS}", path=str(path))
        for lineno, row in enumerate(reader, start=2):
            u, v = row["u"].strip(), row["v"].strip()
            if not u:
                raise SchemaError("empty node id", path=str(path), row=lineno, column="u")
            try:
                w = int(row["weight"])
            except ValueError:
                raise SchemaError(f"bad weight {row['weight']!r}", path=str(path), row=lineno, column="weight") from None
            if not v:
                nodes.add(u)
                continue
            edges.append((u, v, w))
    try:
        return CoGraph.from_edges(nodes, edges)
    except DataError as exc:
        raise SchemaError(str(exc), path=str(path)) from None


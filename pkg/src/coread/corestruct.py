"""Nested core-periphery layers, classical centralities, and reader-indicator correlations.

Layer model
-----------
Each node sits in one of ``L`` nested layers, layer 1 being the innermost
core. The probability of an edge between two nodes depends only on the
outer of their two layers, ``max(l_u, l_v)``, and must not increase going
outward. With a uniform Beta(1, 1) prior on each layer's edge density the
densities integrate out, leaving the collapsed score

    sum over layers l of  log B(e_l + 1, n_l - e_l + 1)

where ``n_l`` counts node pairs whose outer layer is ``l`` and ``e_l`` the
edges among them. States whose posterior-mean densities ``(e_l+1)/(n_l+2)``
increase outward (over occupied layers) are excluded. The posterior over
assignments is explored by single-node Metropolis moves, annealed from a
high temperature down to 1 during burn-in, then sampled at temperature 1.

Nodes without edges are held in the outermost layer: their pairs are all
non-edges, so no other layer can raise the likelihood.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .conetwork import CoGraph
from .errors import ConfigError, DegenerateInputError, EmptyInputError, NonConvergenceError, SchemaError
from .stats import spearman_rho

DEFAULT_LAYERS = 5
DEFAULT_SWEEPS = 20_000
DEFAULT_SAMPLES = 500


@dataclass(frozen=True)
class AnnealSchedule:
    sweeps: int = DEFAULT_SWEEPS
    burn_in_fraction: float = 0.5
    t_start: float = 10.0

    def __post_init__(self):
        if self.sweeps < 2:
            raise ConfigError("need at least 2 sweeps")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ConfigError("burn_in_fraction must lie in [0, 1)")
        if self.t_start < 1.0:
            raise ConfigError("t_start must be at least 1")

    @property
    def burn_in(self) -> int:
        return int(self.sweeps * self.burn_in_fraction)

    def temperature(self, sweep: int) -> float:
        burn = self.burn_in
        if sweep >= burn or burn <= 1:
            return 1.0
        return self.t_start ** (1.0 - sweep / (burn - 1))


@dataclass
class LayerAssignment:
    """Per-node distribution over layers 1..L (row i of ``probs`` is ``nodes[i]``)."""

    nodes: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 2 or self.probs.shape[0] != len(self.nodes):
            raise ValueError("probs must be an (N, L) array aligned with nodes")
        if self.probs.shape[1] < 2:
            raise ValueError("need at least 2 layers")
        if np.any(self.probs < 0) or not np.allclose(self.probs.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise ValueError("each node's layer distribution must be nonnegative and sum to 1")

    @property
    def n_layers(self) -> int:
        return self.probs.shape[1]

    def distribution(self, node: str) -> np.ndarray:
        return self.probs[self.nodes.index(node)]

    def map_layers(self) -> dict[str, int]:
        """Most probable layer (1-based) per node; ties go to the inner layer."""
        return {n: int(np.argmax(row)) + 1 for n, row in zip(self.nodes, self.probs)}


def coreness_weights(n_layers: int) -> np.ndarray:
    """(L - l) / (L - 1) for l = 1..L: 1 at the core, 0 at the periphery."""
    return (n_layers - 1 - np.arange(n_layers)) / (n_layers - 1)


def coreness_scores(assignment: LayerAssignment) -> dict[str, float]:
    """Expected closeness to the core per node, sorted by descending coreness then node id."""
    values = assignment.probs @ coreness_weights(assignment.n_layers)
    pairs = sorted(zip(assignment.nodes, values.tolist()), key=lambda kv: (-kv[1], kv[0]))
    return dict(pairs)


@lru_cache(maxsize=1 << 16)
def _log_beta_term(e: int, n: int) -> float:
    return math.lgamma(e + 1) + math.lgamma(n - e + 1) - math.lgamma(n + 2)


def layer_log_score(counts: Sequence[int], edges: Sequence[int]) -> float:
    """Collapsed log score of a state summarised by per-layer node and edge counts.

    Returns ``-inf`` for states violating the outward non-increasing density
    constraint.
    """
    total = 0.0
    below = 0
    prev = None  # (e, n) of the nearest occupied inner layer
    for c, e in zip(counts, edges):
        s = below + c
        n = s * (s - 1) // 2 - below * (below - 1) // 2
        if n > 0:
            # (e+1)/(n+2) > (pe+1)/(pn+2), compared exactly
            if prev is not None and (e + 1) * (prev[1] + 2) > (prev[0] + 1) * (n + 2):
                return -math.inf
            prev = (e, n)
            total += _log_beta_term(e, n)
        below = s
    return total


def _run_chain(nbrs, movable, n_nodes, n_edges, n_layers, schedule, samples, seed):
    rng = np.random.default_rng(seed)
    outer = n_layers - 1
    layer = [outer] * n_nodes
    counts = [0] * n_layers
    counts[outer] = n_nodes
    edges = [0] * n_layers
    edges[outer] = n_edges
    nbr_layers = [[0] * n_layers for _ in range(n_nodes)]
    for i in range(n_nodes):
        nbr_layers[i][outer] = len(nbrs[i])
    score = layer_log_score(counts, edges)

    tally = np.zeros((n_nodes, n_layers), dtype=np.int64)
    burn = schedule.burn_in
    sampling = schedule.sweeps - burn
    thin = sampling // samples
    first_kept = burn + sampling - thin * samples
    movable = np.asarray(movable, dtype=np.int64)

    for sweep in range(schedule.sweeps):
        if movable.size:
            temp = schedule.temperature(sweep)
            order = rng.permutation(movable).tolist()
            targets = rng.integers(0, n_layers - 1, size=len(order)).tolist()
            coins = rng.random(len(order)).tolist()
            for u, b, coin in zip(order, targets, coins):
                a = layer[u]
                if b >= a:
                    b += 1
                new_edges = edges[:]
                for lv, k in enumerate(nbr_layers[u]):
                    if k:
                        new_edges[a if a > lv else lv] -= k
                        new_edges[b if b > lv else lv] += k
                counts[a] -= 1
                counts[b] += 1
                new = layer_log_score(counts, new_edges)
                delta = new - score
                if delta >= 0 or (new != -math.inf and coin < math.exp(delta / temp)):
                    layer[u] = b
                    edges = new_edges
                    score = new
                    for v in nbrs[u]:
                        row = nbr_layers[v]
                        row[a] -= 1
                        row[b] += 1
                else:
                    counts[a] += 1
                    counts[b] -= 1
        if sweep >= first_kept and (sweep - first_kept) % thin == thin - 1:
            tally[np.arange(n_nodes), layer] += 1
    return tally


def infer_layers(
    graph: CoGraph,
    n_layers: int = DEFAULT_LAYERS,
    seed: int = 0,
    samples: int = DEFAULT_SAMPLES,
    schedule: AnnealSchedule | None = None,
    chains: int = 1,
) -> LayerAssignment:
    """Posterior layer distribution per node from seeded annealed Metropolis chains.

    Edge weights are ignored; only edge presence enters the model. With
    ``chains > 1`` the chains use seeds ``seed, seed+1, ...`` and their
    samples are pooled. The same arguments always give the same result.
    """
    if len(graph) == 0:
        raise EmptyInputError("cannot infer layers on an empty graph")
    if n_layers < 2:
        raise ConfigError("need at least 2 layers")
    if samples < 1 or chains < 1:
        raise ConfigError("samples and chains must be positive")
    schedule = schedule or AnnealSchedule()
    if schedule.sweeps - schedule.burn_in < samples:
        raise ConfigError(f"{schedule.sweeps - schedule.burn_in} sampling sweeps cannot yield {samples} samples")

    nodes = graph.nodes
    index = {n: i for i, n in enumerate(nodes)}
    nbrs = [[index[v] for v in sorted(graph.adj[n])] for n in nodes]
    movable = [i for i, nb in enumerate(nbrs) if nb]
    n_edges = sum(len(nb) for nb in nbrs) // 2

    tally = np.zeros((len(nodes), n_layers), dtype=np.int64)
    for c in range(chains):
        tally += _run_chain(nbrs, movable, len(nodes), n_edges, n_layers, schedule, samples, seed + c)
    return LayerAssignment(nodes, tally / tally.sum(axis=1, keepdims=True))


# ---------------------------------------------------------------- centralities


def degree_centrality(graph: CoGraph) -> dict[str, float]:
    n = len(graph)
    if n < 2:
        raise DegenerateInputError("degree centrality needs at least 2 nodes")
    return {u: graph.degree(u) / (n - 1) for u in graph.nodes}


def betweenness_centrality(graph: CoGraph) -> dict[str, float]:
    """Brandes' exact shortest-path betweenness on the unweighted graph.

    Normalized by (N-1)(N-2)/2, the number of pairs that could route through a node.
    """
    n = len(graph)
    if n < 3:
        raise DegenerateInputError("betweenness needs at least 3 nodes")
    nodes = graph.nodes
    index = {u: i for i, u in enumerate(nodes)}
    nbrs = [[index[v] for v in graph.adj[u]] for u in nodes]
    cb = [0.0] * n
    for s in range(n):
        stack = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = [0] * n
        sigma[s] = 1
        dist = [-1] * n
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in nbrs[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                cb[w] += delta[w]
    # each unordered pair was counted from both ends
    scale = 1.0 / ((n - 1) * (n - 2))
    return {u: cb[i] * scale for i, u in enumerate(nodes)}


def connected_components(graph: CoGraph) -> list[list[str]]:
    """Components as sorted node lists, largest first, ties by smallest node."""
    seen = set()
    comps = []
    for start in graph.nodes:
        if start in seen:
            continue
        seen.add(start)
        comp, queue = [], deque([start])
        while queue:
            v = queue.popleft()
            comp.append(v)
            for w in graph.adj[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        comps.append(sorted(comp))
    comps.sort(key=lambda c: (-len(c), c[0]))
    return comps


def eigenvector_centrality(graph: CoGraph, tolerance: float = 1e-10, max_iters: int = 10_000) -> dict[str, float]:
    """Leading eigenvector of the weighted adjacency on the largest component, max entry 1.

    Power iteration on A + I (same eigenvectors; the shift stops bipartite
    graphs from oscillating). Nodes outside the largest component are absent.
    """
    if not any(graph.adj[u] for u in graph.nodes):
        raise DegenerateInputError("eigenvector centrality needs at least one edge")
    comp = connected_components(graph)[0]
    idx = {u: i for i, u in enumerate(comp)}
    a = np.zeros((len(comp), len(comp)))
    for u in comp:
        for v, w in graph.adj[u].items():
            a[idx[u], idx[v]] = w
    a += np.eye(len(comp))
    x = np.ones(len(comp))
    for _ in range(max_iters):
        y = a @ x
        y /= y.max()
        if np.max(np.abs(y - x)) < tolerance:
            return {u: float(y[idx[u]]) for u in comp}
        x = y
    raise NonConvergenceError(f"eigenvector centrality did not converge in {max_iters} iterations")


# ---------------------------------------------------------------- reader indicators


@dataclass(frozen=True)
class ReaderCombo:
    readers: tuple[str, ...]
    mode: str = "or"

    def __post_init__(self):
        if not self.readers:
            raise ConfigError("a reader combination needs at least one reader")
        if self.mode not in ("or", "and"):
            raise ConfigError(f"mode must be 'or' or 'and', not {self.mode!r}")

    @property
    def label(self) -> str:
        return f" {self.mode} ".join(self.readers)

    def indicator(self, nodes: Sequence[str], reader_sets: Mapping[str, set[str]]) -> list[int]:
        sets = [reader_sets.get(r, set()) for r in self.readers]
        combine = any if self.mode == "or" else all
        return [int(combine(n in s for s in sets)) for n in nodes]


@dataclass(frozen=True)
class ReaderCorrelation:
    label: str
    mode: str
    n_read: int
    rho: float | None
    p_value: float | None

    @property
    def defined(self) -> bool:
        return self.rho is not None


def reader_structure_correlation(
    scores: Mapping[str, float],
    reader_sets: Mapping[str, set[str]],
    combos: Iterable[ReaderCombo],
) -> list[ReaderCorrelation]:
    """Spearman rho between node scores and each combination's read/not-read indicator.

    A constant indicator (nobody or everybody read) yields an undefined row.
    """
    nodes = sorted(scores)
    values = [scores[n] for n in nodes]
    out = []
    for combo in combos:
        ind = combo.indicator(nodes, reader_sets)
        n_read = sum(ind)
        if n_read in (0, len(nodes)):
            out.append(ReaderCorrelation(combo.label, combo.mode, n_read, None, None))
            continue
        rho, p = spearman_rho(values, ind)
        out.append(ReaderCorrelation(combo.label, combo.mode, n_read, rho, p))
    return out


# ---------------------------------------------------------------- files


def layer_rows(assignment: LayerAssignment) -> list[dict]:
    core = coreness_scores(assignment)
    maps = assignment.map_layers()
    rows = []
    for node, dist in zip(assignment.nodes, assignment.probs):
        row = {"node": node, "coreness": core[node], "map_layer": maps[node]}
        row.update({f"p{l + 1}": float(p) for l, p in enumerate(dist)})
        rows.append(row)
    return rows


def read_scores(path, column: str = "coreness") -> dict[str, float]:
    """Read ``node`` and a numeric score column from a layers/centrality CSV."""
    path = Path(path)
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "node" not in reader.fieldnames or column not in reader.fieldnames:
            raise SchemaError(f"need columns 'node' and {column!r}", path=str(path))
        for lineno, row in enumerate(reader, start=2):
            text = row[column].strip()
            if not text:
                continue
            try:
                out[row["node"]] = float(text)
            except ValueError:
                raise SchemaError(f"bad number {text!r}", path=str(path), row=lineno, column=column) from None
    return out

"""Deterministic CSV emission and column schemas for every report table."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import SchemaError

# cell formats: ranks/divergences 4 places, coreness 3 places
FORMATS = ("str", "int", "f3", "f4", "f6")


@dataclass(frozen=True)
class Column:
    name: str
    fmt: str = "str"

    def __post_init__(self):
        if self.fmt not in FORMATS:
            raise ValueError(f"unknown cell format {self.fmt!r}")

    def render(self, value) -> str:
        if value is None:
            return ""
        if self.fmt == "str":
            return str(value)
        if self.fmt == "int":
            return str(int(value))
        places = int(self.fmt[1:])
        value = float(value)
        if not math.isfinite(value):
            return str(value)
        return f"{round(value, places) + 0.0:.{places}f}"


def sort_rows(rows: Iterable[Mapping], sort_keys: Sequence[str]) -> list[Mapping]:
    """Stable multi-key sort; a leading ``-`` means descending. Missing values sort last."""
    out = list(rows)
    for key in reversed(sort_keys):
        name = key.lstrip("-")
        present = [r for r in out if r[name] is not None]
        present.sort(key=lambda r: r[name], reverse=key.startswith("-"))
        out = present + [r for r in out if r[name] is None]
    return out


def emit_table(rows: Iterable[Mapping], schema: Sequence[Column], sort_keys: Sequence[str], path) -> Path:
    """Write *rows* as CSV in *schema* column order after sorting by *sort_keys*."""
    names = [c.name for c in schema]
    expected = set(names)
    rows = list(rows)
    for i, row in enumerate(rows):
        if set(row) != expected:
            extra = sorted(set(row) - expected)
            missing = sorted(expected - set(row))
            raise SchemaError(f"row {i} does not match schema (extra {extra}, missing {missing})")
    for key in sort_keys:
        if key.lstrip("-") not in expected:
            raise SchemaError(f"sort key {key!r} not in schema")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in sort_rows(rows, sort_keys):
            w.writerow([c.render(row[c.name]) for c in schema])
    return path


# ---------------------------------------------------------------- table schemas

S, I, F3, F4, F6 = "str", "int", "f3", "f4", "f6"


def _cols(*spec) -> tuple[Column, ...]:
    return tuple(Column(n, f) for n, f in spec)


RANKS = _cols(("key", S), ("b_key", S), ("title", S), ("author", S), ("pub_year", I),
              ("count_a", I), ("count_b", I), ("rank_a", F4), ("rank_b", F4), ("rank_change", F4))
RANKS_SORT = ("-rank_change", "key")

DRIFT = _cols(("direction", S), ("position", I), ("rank_change", F4), ("key", S), ("title", S), ("author", S))
DRIFT_SORT = ("direction", "position")

COLLECTIONS = _cols(("kind", S), ("collection_name", S), ("n_books", I), ("mean_rank_change", F4))
COLLECTIONS_SORT = ("kind", "-mean_rank_change", "collection_name")

GRAPH = _cols(("u", S), ("v", S), ("weight", I))
GRAPH_SORT = ("u", "v")

DIVERGENCE = _cols(("rank", I), ("item", S), ("divergence", F4), ("degree_a", I), ("degree_b", I), ("title", S), ("author", S))
DIVERGENCE_SORT = ("divergence", "item")

NEIGHBORS = _cols(("rank", I), ("neighbor", S), ("weight", I))
NEIGHBORS_SORT = ("rank",)

CENTRALITY = _cols(("node", S), ("degree", F6), ("betweenness", F6), ("eigenvector", F6))
CENTRALITY_SORT = ("node",)

MEMBERS = _cols(("reader_id", S), ("event_count", I), ("distinct_items", I), ("matched_items", I),
                ("median_pub_year", F3), ("mean_rank_change", F4))
MEMBERS_SORT = ("-mean_rank_change", "reader_id")

PROXIMITY = _cols(("item_id", S), ("reader_1", S), ("reader_2", S), ("gap_days", I))
PROXIMITY_SORT = ("item_id", "gap_days", "reader_1", "reader_2")

READER_CORR = _cols(("combination", S), ("mode", S), ("score", S), ("n_read", I), ("rho", F4), ("p_value", F6))
READER_CORR_SORT = ("score", "combination")

RELATIVE = _cols(("key", S), ("pub_year", I), ("log_ratio", F4))
RELATIVE_SORT = ("-log_ratio", "key")

DENSITY = _cols(("corpus", S), ("x", F6), ("density", F6))
DENSITY_SORT = ()

BOXPLOT = _cols(("group", S), ("stat", S), ("value", F3))
BOXPLOT_SORT = ()


def layer_schema(n_layers: int) -> tuple[Column, ...]:
    return (Column("node", S), Column("coreness", F3), Column("map_layer", I),
            *(Column(f"p{l}", F4) for l in range(1, n_layers + 1)))


def structure_schema(n_layers: int) -> tuple[Column, ...]:
    return layer_schema(n_layers) + CENTRALITY[1:]


STRUCTURE_SORT = ("-coreness", "node")

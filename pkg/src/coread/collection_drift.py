"""Rank drift aggregated over user-curated collections (lists and shelves)."""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError, SchemaError
from .popularity import RankTable

LIST = "list"
SHELF = "shelf"
KINDS = (LIST, SHELF)

DEFAULT_MIN_ASSIGNERS = 5
DEFAULT_MIN_BOOKS = 10


@dataclass(frozen=True)
class CollectionAssignment:
    collection_name: str
    kind: str
    item_id: str
    assigner_count: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"collection kind must be one of {KINDS}, not {self.kind!r}")
        if self.assigner_count < 1:
            raise ValueError("assigner_count must be at least 1")


def read_assignments(path) -> list[CollectionAssignment]:
    """Load ``collection_name,kind,item_id,assigner_count`` rows."""
    path = Path(path)
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"collection_name", "kind", "item_id", "assigner_count"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise SchemaError(f"assignments need columns {sorted(need)}", path=str(path))
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(CollectionAssignment(
                    row["collection_name"].strip(), row["kind"].strip().lower(),
                    row["item_id"].strip(), int(row["assigner_count"]),
                ))
            except ValueError as exc:
                raise SchemaError(str(exc), path=str(path), row=lineno) from None
    return out


def _of_kind(assignments: Iterable[CollectionAssignment], kind: str | None):
    if kind is not None and kind not in KINDS:
        raise ConfigError(f"unknown collection kind {kind!r}")
    return [a for a in assignments if kind is None or a.kind == kind]


def collection_popularity(
    assignments: Iterable[CollectionAssignment],
    matched_items: Iterable[str],
    kind: str | None = None,
) -> dict[str, int]:
    """Number of distinct matched items in each collection; empty collections omitted."""
    matched = set(matched_items)
    members: dict[str, set[str]] = {}
    for a in _of_kind(assignments, kind):
        if a.item_id in matched:
            members.setdefault(a.collection_name, set()).add(a.item_id)
    return {name: len(items) for name, items in sorted(members.items())}


def _qualifying(assignments, rank_table, min_assigners, min_books, kind, item_ids):
    if min_assigners < 1 or min_books < 1:
        raise ConfigError("thresholds must be at least 1")
    if item_ids not in ("a", "b"):
        raise ConfigError("item_ids must be 'a' or 'b'")
    lookup: Mapping = rank_table.by_b_key() if item_ids == "b" else rank_table.rows

    qualifying: dict[str, dict[str, float]] = {}
    for a in _of_kind(assignments, kind):
        if a.assigner_count < min_assigners:
            continue
        row = lookup.get(a.item_id)
        if row is None:
            continue
        qualifying.setdefault(a.collection_name, {})[a.item_id] = row.rank_change
    return {name: ch for name, ch in qualifying.items() if len(ch) >= min_books}


def collection_rank_change(
    assignments: Iterable[CollectionAssignment],
    rank_table: RankTable,
    min_assigners: int = DEFAULT_MIN_ASSIGNERS,
    min_books: int = DEFAULT_MIN_BOOKS,
    kind: str | None = None,
    item_ids: str = "b",
) -> dict[str, float]:
    """Mean rank change of each collection's qualifying members.

    An item qualifies when it is in the rank table and at least
    *min_assigners* users put it in the collection. Collections with fewer
    than *min_books* qualifying items are dropped. Assignment item ids are
    looked up on the corpus-B side of the rank table unless *item_ids* is
    ``"a"``.

    The result is ordered by descending mean, then name.
    """
    kept = _qualifying(list(assignments), rank_table, min_assigners, min_books, kind, item_ids)
    means = {name: statistics.fmean(ch.values()) for name, ch in kept.items()}
    return dict(sorted(means.items(), key=lambda kv: (-kv[1], kv[0])))


def collection_drift_rows(
    assignments: Iterable[CollectionAssignment],
    rank_table: RankTable,
    min_assigners: int = DEFAULT_MIN_ASSIGNERS,
    min_books: int = DEFAULT_MIN_BOOKS,
    item_ids: str = "b",
) -> list[dict]:
    """Report rows (kind, collection, qualifying books, mean change) for lists and shelves."""
    assignments = list(assignments)
    rows = []
    for kind in KINDS:
        kept = _qualifying(assignments, rank_table, min_assigners, min_books, kind, item_ids)
        for name, ch in kept.items():
            rows.append({"kind": kind, "collection_name": name, "n_books": len(ch),
                         "mean_rank_change": statistics.fmean(ch.values())})
    return rows

"""Popularity counts, [0, 1] scaled ranks and rank drift between two corpora.

Corpus A is the historical community and corpus B the modern one. A scaled
rank of 0 is the most popular key; ``rank_change = rank_a - rank_b`` is
positive when a key rose in relative popularity from A to B.
"""

from __future__ import annotations

import csv
import math
import statistics
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .corpus import Corpus, EventKind, as_kind
from .errors import ConfigError, DataError, EmptyInputError, SchemaError
from .matching import MatchTable
from .stats import fractional_ranks, pearson_r

KEY_ITEM = "item"
KEY_AUTHOR = "author"


def interaction_counts(corpus: Corpus, kind: EventKind | str, key: str = KEY_ITEM) -> dict[str, int]:
    """Event multiplicity per item (or per author string). Zero counts are omitted."""
    kind = as_kind(kind)
    if key not in (KEY_ITEM, KEY_AUTHOR):
        raise ConfigError(f"count key must be 'item' or 'author', not {key!r}")
    counts: Counter[str] = Counter()
    for ev in corpus.events:
        if ev.kind is kind:
            counts[ev.item_id if key == KEY_ITEM else corpus.items[ev.item_id].author] += 1
    return dict(counts)


def scaled_ranks(counts: Mapping[str, float]) -> dict[str, float]:
    """Descending-count fractional ranks divided by N-1, so the top key gets 0 and the bottom 1."""
    if not counts:
        raise EmptyInputError("cannot rank an empty count table")
    keys = list(counts)
    n = len(keys)
    if n == 1:
        return {keys[0]: 0.0}
    ranks = fractional_ranks([counts[k] for k in keys], descending=True)
    return {k: float(r) / (n - 1) for k, r in zip(keys, ranks)}


def rank_change(rank_a: float, rank_b: float) -> float:
    for r in (rank_a, rank_b):
        if not 0.0 <= r <= 1.0:
            raise DataError(f"rank {r} outside [0, 1]")
    return rank_a - rank_b


def top_k(counts: Mapping[str, float], k: int) -> list[str]:
    """The *k* highest-count keys; boundary ties resolved by key order."""
    return [key for key, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]]


def top_k_overlap(counts_a: Mapping[str, float], counts_b: Mapping[str, float], k: int) -> int:
    if k < 1:
        raise ConfigError("k must be at least 1")
    if k > len(counts_a) or k > len(counts_b):
        raise DataError(f"k={k} exceeds the number of keys ({len(counts_a)}, {len(counts_b)})")
    return len(set(top_k(counts_a, k)) & set(top_k(counts_b, k)))


def relative_popularity(count_a: float, total_a: float, count_b: float, total_b: float) -> float:
    """ln of (share of corpus-A events) / (share of corpus-B events); positive = more popular in A."""
    if min(count_a, total_a, count_b, total_b) <= 0:
        raise DataError("relative popularity needs nonzero counts and totals in both corpora")
    return math.log((count_a / total_a) / (count_b / total_b))


@dataclass(frozen=True)
class ListComparison:
    overlap: int
    overlap_keys: tuple[str, ...]
    median_external: float | None
    mean_external: float | None
    above_external: int
    median_internal: float | None
    mean_internal: float | None
    above_internal: int


def list_comparison(counts_external: Mapping[str, float], counts_internal: Mapping[str, float], threshold: float) -> ListComparison:
    """Compare two keyed lists by a shared metric.

    Reports the key overlap, median and mean of each list's metric, and how
    many entries of each list strictly exceed *threshold*.
    """
    if threshold < 0:
        raise ConfigError("threshold must be nonnegative")

    def describe(values):
        vals = list(values)
        if not vals:
            return None, None, 0
        return float(statistics.median(vals)), float(statistics.fmean(vals)), sum(v > threshold for v in vals)

    common = tuple(sorted(set(counts_external) & set(counts_internal)))
    me, ae, ne = describe(counts_external.values())
    mi, ai, ni = describe(counts_internal.values())
    return ListComparison(len(common), common, me, ae, ne, mi, ai, ni)


# ---------------------------------------------------------------- rank tables


@dataclass(frozen=True)
class RankRow:
    key: str
    b_key: str
    count_a: int
    count_b: int
    rank_a: float
    rank_b: float
    rank_change: float
    title: str = ""
    author: str = ""
    pub_year: int | None = None


@dataclass
class RankTable:
    """Per-key ranks over the matched set; keyed by corpus-A id (or author)."""

    level: str
    rows: dict[str, RankRow]

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, key) -> RankRow:
        return self.rows[key]

    def __contains__(self, key) -> bool:
        return key in self.rows

    def by_b_key(self) -> dict[str, RankRow]:
        return {r.b_key: r for r in self.rows.values()}

    def changes(self) -> dict[str, float]:
        return {k: r.rank_change for k, r in self.rows.items()}

    def correlation(self) -> tuple[float, float]:
        """Pearson r between corpus-A and corpus-B scaled ranks."""
        keys = sorted(self.rows)
        return pearson_r([self.rows[k].rank_a for k in keys], [self.rows[k].rank_b for k in keys])


def _table_from_counts(level, counts_a, counts_b, b_keys, meta) -> RankTable:
    ranks_a = scaled_ranks(counts_a)
    ranks_b = scaled_ranks(counts_b)
    rows = {}
    for key in sorted(counts_a):
        title, author, year = meta.get(key, ("", "", None))
        rows[key] = RankRow(
            key=key, b_key=b_keys[key], count_a=int(counts_a[key]), count_b=int(counts_b[key]),
            rank_a=ranks_a[key], rank_b=ranks_b[key],
            rank_change=rank_change(ranks_a[key], ranks_b[key]),
            title=title, author=author, pub_year=year,
        )
    return RankTable(level, rows)


def build_rank_table(
    corpus_a: Corpus,
    corpus_b: Corpus,
    match: MatchTable,
    kind_a: EventKind | str = EventKind.BORROW,
    kind_b: EventKind | str = EventKind.REVIEW,
    level: str = KEY_ITEM,
) -> RankTable:
    """Counts and scaled ranks for every matched item (or author of matched items).

    Matched items with no events of the requested kind enter with count 0 so
    the ranking always covers the whole matched set. Author rows sum item
    counts under the corpus-A author string.
    """
    if not len(match):
        raise EmptyInputError("match table is empty")
    ca = interaction_counts(corpus_a, kind_a)
    cb = interaction_counts(corpus_b, kind_b)
    pairs = match.sorted_pairs()
    if level == KEY_ITEM:
        counts_a = {p.a_item_id: ca.get(p.a_item_id, 0) for p in pairs}
        counts_b = {p.a_item_id: cb.get(p.b_item_id, 0) for p in pairs}
        b_keys = {p.a_item_id: p.b_item_id for p in pairs}
        meta = {}
        for p in pairs:
            it = corpus_a.items[p.a_item_id]
            meta[p.a_item_id] = (it.title, it.author, it.pub_year)
        return _table_from_counts(level, counts_a, counts_b, b_keys, meta)
    if level == KEY_AUTHOR:
        counts_a: dict[str, int] = {}
        counts_b: dict[str, int] = {}
        for p in pairs:
            author = corpus_a.items[p.a_item_id].author
            counts_a[author] = counts_a.get(author, 0) + ca.get(p.a_item_id, 0)
            counts_b[author] = counts_b.get(author, 0) + cb.get(p.b_item_id, 0)
        meta = {a: ("", a, None) for a in counts_a}
        return _table_from_counts(level, counts_a, counts_b, {a: a for a in counts_a}, meta)
    raise ConfigError(f"unknown rank level {level!r}")


def risers_and_fallers(table: RankTable, top: int = 10) -> tuple[list[RankRow], list[RankRow]]:
    """Largest positive and most negative rank changes; ties by key."""
    rows = list(table.rows.values())
    risers = sorted(rows, key=lambda r: (-r.rank_change, r.key))[:top]
    fallers = sorted(rows, key=lambda r: (r.rank_change, r.key))[:top]
    return risers, fallers


def relative_popularity_table(table: RankTable, pub_year_range: tuple[int, int] | None = None) -> list[tuple[str, int | None, float]]:
    """(key, pub_year, log share ratio) for rows with nonzero counts on both sides."""
    total_a = sum(r.count_a for r in table.rows.values())
    total_b = sum(r.count_b for r in table.rows.values())
    out = []
    for key in sorted(table.rows):
        r = table.rows[key]
        if r.count_a < 1 or r.count_b < 1:
            continue
        if pub_year_range is not None:
            if r.pub_year is None or not pub_year_range[0] <= r.pub_year <= pub_year_range[1]:
                continue
        out.append((key, r.pub_year, relative_popularity(r.count_a, total_a, r.count_b, total_b)))
    return out


# ---------------------------------------------------------------- files

RANK_COLUMNS = ("key", "b_key", "title", "author", "pub_year", "count_a", "count_b", "rank_a", "rank_b", "rank_change")


def rank_rows(table: RankTable) -> list[dict]:
    return [
        {"key": r.key, "b_key": r.b_key, "title": r.title, "author": r.author, "pub_year": r.pub_year,
         "count_a": r.count_a, "count_b": r.count_b, "rank_a": r.rank_a, "rank_b": r.rank_b,
         "rank_change": r.rank_change}
        for r in table.rows.values()
    ]


def read_rank_table(path, level: str = KEY_ITEM) -> RankTable:
    path = Path(path)
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(RANK_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise SchemaError(f"missing column(s) {sorted(missing)}", path=str(path))
        for lineno, rec in enumerate(reader, start=2):
            try:
                year = int(rec["pub_year"]) if rec["pub_year"].strip() else None
                row = RankRow(
                    key=rec["key"], b_key=rec["b_key"], count_a=int(rec["count_a"]), count_b=int(rec["count_b"]),
                    rank_a=float(rec["rank_a"]), rank_b=float(rec["rank_b"]),
                    rank_change=float(rec["rank_change"]),
                    title=rec["title"], author=rec["author"], pub_year=year,
                )
            except ValueError as exc:
                raise SchemaError(str(exc), path=str(path), row=lineno) from None
            if row.key in rows:
                raise SchemaError(f"duplicate key {row.key!r}", path=str(path), row=lineno)
            rows[row.key] = row
    return RankTable(level, rows)


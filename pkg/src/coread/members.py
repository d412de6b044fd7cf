"""Per-reader borrowing profiles, pairwise overlap and close-in-time co-borrowing."""

from __future__ import annotations

import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

from .corpus import Corpus, EventKind, as_kind
from .errors import ConfigError, UnknownIdError
from .popularity import RankTable

DEFAULT_MIN_EVENTS = 10
DEFAULT_WINDOW_DAYS = 5


@dataclass(frozen=True)
class MemberProfile:
    reader_id: str
    event_count: int
    distinct_items: int
    matched_items: int
    median_pub_year: float | None
    mean_rank_change: float | None


def member_profiles(
    corpus: Corpus,
    rank_table: RankTable,
    min_events: int = DEFAULT_MIN_EVENTS,
    kind: EventKind | str = EventKind.BORROW,
) -> list[MemberProfile]:
    """Profiles for readers with at least *min_events* events of *kind*.

    ``event_count`` and ``distinct_items`` cover every item the reader touched;
    the publication-year median and mean rank change run over the distinct
    items that appear in *rank_table*. Sorted by descending mean rank change
    (undefined last), then reader id.
    """
    if min_events < 1:
        raise ConfigError("min_events must be at least 1")
    kind = as_kind(kind)
    events = Counter()
    items: dict[str, set[str]] = defaultdict(set)
    for ev in corpus.events:
        if ev.kind is kind:
            events[ev.reader_id] += 1
            items[ev.reader_id].add(ev.item_id)

    out = []
    for reader, n in events.items():
        if n < min_events:
            continue
        matched = sorted(i for i in items[reader] if i in rank_table)
        years = [corpus.items[i].pub_year for i in matched if corpus.items[i].pub_year is not None]
        changes = [rank_table[i].rank_change for i in matched]
        out.append(MemberProfile(
            reader_id=reader,
            event_count=n,
            distinct_items=len(items[reader]),
            matched_items=len(matched),
            median_pub_year=float(statistics.median(years)) if years else None,
            mean_rank_change=statistics.fmean(changes) if changes else None,
        ))
    out.sort(key=lambda p: (p.mean_rank_change is None, -(p.mean_rank_change or 0.0), p.reader_id))
    return out


@dataclass(frozen=True)
class SharedItems:
    count_x: int
    count_y: int
    overlap: int


def shared_items(
    corpus: Corpus,
    reader_x: str,
    reader_y: str,
    universe: Iterable[str] | None = None,
    kind: EventKind | str | None = EventKind.BORROW,
) -> SharedItems:
    """Distinct items each reader touched (restricted to *universe* if given) and their overlap."""
    for r in (reader_x, reader_y):
        if r not in corpus.readers:
            raise UnknownIdError("reader", r)
    by_reader = corpus.reader_items(None if kind is None else [kind])
    keep = None if universe is None else set(universe)
    xs = by_reader.get(reader_x, set())
    ys = by_reader.get(reader_y, set())
    if keep is not None:
        xs, ys = xs & keep, ys & keep
    return SharedItems(len(xs), len(ys), len(xs & ys))


@dataclass(frozen=True)
class ProximityHit:
    item_id: str
    reader_1: str
    reader_2: str
    gap_days: int


def borrow_proximity(
    corpus: Corpus,
    items: Iterable[str] | None = None,
    window_days: int = DEFAULT_WINDOW_DAYS,
    kind: EventKind | str = EventKind.BORROW,
) -> list[ProximityHit]:
    """Pairs of distinct readers who borrowed the same item within *window_days* (inclusive).

    One hit per (item, reader pair) carrying the smallest gap between their
    dated borrows; undated events are ignored. Reader ids within a pair are
    ordered. Sorted by item, gap, readers.
    """
    if window_days < 0:
        raise ConfigError("window_days must be nonnegative")
    kind = as_kind(kind)
    keep = None if items is None else set(items)
    dates: dict[str, dict[str, list]] = defaultdict(lambda: defaultdict(list))
    for ev in corpus.events:
        if ev.kind is not kind or ev.timestamp is None:
            continue
        if keep is not None and ev.item_id not in keep:
            continue
        dates[ev.item_id][ev.reader_id].append(ev.timestamp)

    hits = []
    for item in sorted(dates):
        per_reader = dates[item]
        for r1, r2 in combinations(sorted(per_reader), 2):
            gap = min(abs((d1 - d2).days) for d1 in per_reader[r1] for d2 in per_reader[r2])
            if gap <= window_days:
                hits.append(ProximityHit(item, r1, r2, gap))
    hits.sort(key=lambda h: (h.item_id, h.gap_days, h.reader_1, h.reader_2))
    return hits

"""Reader-item interaction corpora: CSV ingestion, validation, filtering.

A corpus is three flat files::

    events.csv   reader_id,item_id,kind,timestamp,value
    items.csv    item_id,title,author,pub_year,extra_json
    readers.csv  reader_id,display_name,member_start,member_end

Dates are ISO-8601 (``YYYY-MM-DD``) and may be blank.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import json
import pickle
import statistics
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DuplicateIdError, ForeignKeyError, IntervalError, SchemaError

EVENT_COLUMNS = ("reader_id", "item_id", "kind", "timestamp", "value")
ITEM_COLUMNS = ("item_id", "title", "author", "pub_year", "extra_json")
READER_COLUMNS = ("reader_id", "display_name", "member_start", "member_end")

PUB_YEAR_MIN = 1000
PUB_YEAR_MAX = 2100


class EventKind(str, enum.Enum):
    BORROW = "borrow"
    REVIEW = "review"
    RATING = "rating"

    def __str__(self) -> str:
        return self.value


def as_kind(value: str | EventKind) -> EventKind:
    if isinstance(value, EventKind):
        return value
    try:
        return EventKind(str(value).strip().lower())
    except ValueError:
        raise ValueError(f"unknown event kind {value!r}; expected one of {[k.value for k in EventKind]}") from None


@dataclass(frozen=True)
class InteractionEvent:
    reader_id: str
    item_id: str
    kind: EventKind
    timestamp: dt.date | None = None
    value: float | None = None

    def __post_init__(self):
        if not self.reader_id or not self.item_id:
            raise ValueError("reader_id and item_id must be non-empty")
        if (self.kind is EventKind.RATING) != (self.value is not None):
            raise ValueError("a value is required for ratings and forbidden otherwise")


@dataclass(frozen=True)
class ItemRecord:
    item_id: str
    title: str
    author: str
    pub_year: int | None = None
    extra: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.item_id:
            raise ValueError("item_id must be non-empty")
        if self.pub_year is not None and not PUB_YEAR_MIN <= self.pub_year <= PUB_YEAR_MAX:
            raise ValueError(f"pub_year {self.pub_year} outside [{PUB_YEAR_MIN}, {PUB_YEAR_MAX}]")


@dataclass(frozen=True)
class ReaderRecord:
    reader_id: str
    display_name: str | None = None
    membership_span: tuple[dt.date | None, dt.date | None] | None = None

    def __post_init__(self):
        if not self.reader_id:
            raise ValueError("reader_id must be non-empty")
        if self.membership_span is not None:
            start, end = self.membership_span
            if start is not None and end is not None and start > end:
                raise ValueError(f"membership span starts after it ends: {start} > {end}")


@dataclass(frozen=True)
class Corpus:
    """One community's events plus item and reader metadata.

    ``items`` and ``readers`` are keyed by id and keep file order.
    """

    label: str
    events: tuple[InteractionEvent, ...]
    items: Mapping[str, ItemRecord]
    readers: Mapping[str, ReaderRecord]

    def __post_init__(self):
        if not self.label:
            raise ValueError("corpus label must be non-empty")
        for ev in self.events:
            if ev.item_id not in self.items:
                raise ForeignKeyError("item", ev.item_id)
            if ev.reader_id not in self.readers:
                raise ForeignKeyError("reader", ev.reader_id)

    def events_of(self, kinds: Iterable[EventKind | str] | None = None) -> list[InteractionEvent]:
        if kinds is None:
            return list(self.events)
        wanted = {as_kind(k) for k in kinds}
        return [ev for ev in self.events if ev.kind in wanted]

    def reader_items(self, kinds: Iterable[EventKind | str] | None = None) -> dict[str, set[str]]:
        """Distinct items per reader, readers in first-event order."""
        out: dict[str, set[str]] = {}
        for ev in self.events_of(kinds):
            out.setdefault(ev.reader_id, set()).add(ev.item_id)
        return out


# ---------------------------------------------------------------- parsing


def _parse_date(text: str, *, path, row, column) -> dt.date | None:
    text = (text or "").strip()
    if not text:
        return None
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise SchemaError(f"not an ISO date: {text!r}", path=path, row=row, column=column) from None


def _read_rows(path: Path, columns: Sequence[str]) -> Iterable[tuple[int, dict[str, str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            raise SchemaError("missing header row", path=str(path))
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(f"missing required column(s) {missing}", path=str(path))
        for lineno, row in enumerate(reader, start=2):
            if None in row:
                raise SchemaError("too many fields", path=str(path), row=lineno)
            yield lineno, {c: (row[c] if row[c] is not None else "") for c in columns}


def _load_items(path: Path) -> dict[str, ItemRecord]:
    items: dict[str, ItemRecord] = {}
    for lineno, row in _read_rows(path, ITEM_COLUMNS):
        item_id = row["item_id"].strip()
        if not item_id:
            raise SchemaError("empty item_id", path=str(path), row=lineno, column="item_id")
        if item_id in items:
            raise DuplicateIdError("item", item_id, path=str(path))
        year_text = row["pub_year"].strip()
        pub_year = None
        if year_text:
            try:
                pub_year = int(year_text)
            except ValueError:
                raise SchemaError(f"not an integer year: {year_text!r}", path=str(path), row=lineno, column="pub_year") from None
            if not PUB_YEAR_MIN <= pub_year <= PUB_YEAR_MAX:
                raise SchemaError(f"year {pub_year} out of range", path=str(path), row=lineno, column="pub_year")
        extra_text = row["extra_json"].strip()
        extra: dict[str, str] = {}
        if extra_text:
            try:
                parsed = json.loads(extra_text)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON ({exc.msg})", path=str(path), row=lineno, column="extra_json") from None
            if not isinstance(parsed, dict):
                raise SchemaError("extra_json must be an object", path=str(path), row=lineno, column="extra_json")
            extra = {str(k): str(v) for k, v in parsed.items()}
        items[item_id] = ItemRecord(item_id, row["title"].strip(), row["author"].strip(), pub_year, extra)
    return items


def _load_readers(path: Path) -> dict[str, ReaderRecord]:
    readers: dict[str, ReaderRecord] = {}
    for lineno, row in _read_rows(path, READER_COLUMNS):
        reader_id = row["reader_id"].strip()
        if not reader_id:
            raise SchemaError("empty reader_id", path=str(path), row=lineno, column="reader_id")
        if reader_id in readers:
            raise DuplicateIdError("reader", reader_id, path=str(path))
        start = _parse_date(row["member_start"], path=str(path), row=lineno, column="member_start")
        end = _parse_date(row["member_end"], path=str(path), row=lineno, column="member_end")
        if start is not None and end is not None and start > end:
            raise SchemaError("member_start after member_end", path=str(path), row=lineno, column="member_start")
        span = None if start is None and end is None else (start, end)
        name = row["display_name"].strip() or None
        readers[reader_id] = ReaderRecord(reader_id, name, span)
    return readers


def _load_events(path: Path, items: Mapping[str, ItemRecord], readers: Mapping[str, ReaderRecord]) -> list[InteractionEvent]:
    events: list[InteractionEvent] = []
    for lineno, row in _read_rows(path, EVENT_COLUMNS):
        reader_id = row["reader_id"].strip()
        item_id = row["item_id"].strip()
        if not reader_id:
            raise SchemaError("empty reader_id", path=str(path), row=lineno, column="reader_id")
        if not item_id:
            raise SchemaError("empty item_id", path=str(path), row=lineno, column="item_id")
        try:
            kind = as_kind(row["kind"])
        except ValueError as exc:
            raise SchemaError(str(exc), path=str(path), row=lineno, column="kind") from None
        ts = _parse_date(row["timestamp"], path=str(path), row=lineno, column="timestamp")
        value_text = row["value"].strip()
        value = None
        if value_text:
            try:
                value = float(value_text)
            except ValueError:
                raise SchemaError(f"not a number: {value_text!r}", path=str(path), row=lineno, column="value") from None
        if kind is EventKind.RATING and value is None:
            raise SchemaError("rating event without value", path=str(path), row=lineno, column="value")
        if kind is not EventKind.RATING and value is not None:
            raise SchemaError(f"{kind.value} event must not carry a value", path=str(path), row=lineno, column="value")
        if item_id not in items:
            raise ForeignKeyError("item", item_id, path=str(path), row=lineno)
        if reader_id not in readers:
            raise ForeignKeyError("reader", reader_id, path=str(path), row=lineno)
        events.append(InteractionEvent(reader_id, item_id, kind, ts, value))
    return events


def load_corpus(events_path, items_path, readers_path, label: str) -> Corpus:
    """Read and validate the three CSV files of one corpus."""
    if not label:
        raise SchemaError("corpus label must be non-empty")
    items = _load_items(Path(items_path))
    readers = _load_readers(Path(readers_path))
    events = _load_events(Path(events_path), items, readers)
    return Corpus(label, tuple(events), items, readers)


# ---------------------------------------------------------------- writing


def _fmt_value(value: float | None) -> str:
    if value is None:
        return ""
    return repr(value) if value != int(value) else str(int(value))


def write_corpus_csv(corpus: Corpus, directory) -> tuple[Path, Path, Path]:
    """Write ``events.csv``, ``items.csv`` and ``readers.csv`` into *directory*."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = directory / "events.csv", directory / "items.csv", directory / "readers.csv"
    with open(paths[0], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for ev in corpus.events:
            w.writerow([ev.reader_id, ev.item_id, ev.kind.value,
                        ev.timestamp.isoformat() if ev.timestamp else "", _fmt_value(ev.value)])
    with open(paths[1], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ITEM_COLUMNS)
        for it in corpus.items.values():
            extra = json.dumps(dict(it.extra), sort_keys=True) if it.extra else ""
            w.writerow([it.item_id, it.title, it.author, "" if it.pub_year is None else it.pub_year, extra])
    with open(paths[2], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(READER_COLUMNS)
        for r in corpus.readers.values():
            start, end = r.membership_span or (None, None)
            w.writerow([r.reader_id, r.display_name or "",
                        start.isoformat() if start else "", end.isoformat() if end else ""])
    return paths


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "wb") as fh:
        pickle.dump(corpus, fh, protocol=4)


def read_corpus(path) -> Corpus:
    with open(path, "rb") as fh:
        corpus = pickle.load(fh)
    if not isinstance(corpus, Corpus):
        raise SchemaError("file does not contain a corpus", path=str(path))
    return corpus


# ---------------------------------------------------------------- filtering


def _check_interval(interval, what: str):
    if interval is None:
        return None
    start, end = interval
    if start is not None and end is not None and start > end:
        raise IntervalError(f"inverted {what} interval: {start} > {end}")
    return start, end


def _within(value, interval) -> bool:
    if value is None:
        return False
    start, end = interval
    return (start is None or value >= start) and (end is None or value <= end)


def filter_events(
    corpus: Corpus,
    kinds: Iterable[EventKind | str] | None = None,
    date_range: tuple[dt.date | None, dt.date | None] | None = None,
    pub_year_range: tuple[int | None, int | None] | None = None,
    *,
    dedup: bool = False,
) -> Corpus:
    """Keep only events matching every given predicate.

    Item and reader tables are retained in full. Events without a timestamp
    never match a date range, and items without a publication year never
    match a year range. Bounds are inclusive.
    """
    date_range = _check_interval(date_range, "date")
    pub_year_range = _check_interval(pub_year_range, "publication-year")
    wanted = None if kinds is None else {as_kind(k) for k in kinds}

    kept = []
    seen = set()
    for ev in corpus.events:
        if wanted is not None and ev.kind not in wanted:
            continue
        if date_range is not None and not _within(ev.timestamp, date_range):
            continue
        if pub_year_range is not None and not _within(corpus.items[ev.item_id].pub_year, pub_year_range):
            continue
        if dedup:
            if ev in seen:
                continue
            seen.add(ev)
        kept.append(ev)
    return Corpus(corpus.label, tuple(kept), corpus.items, corpus.readers)


# ---------------------------------------------------------------- summary


@dataclass(frozen=True)
class CorpusSummary:
    n_items: int
    n_readers: int
    n_events: int
    events_by_kind: Mapping[str, int]
    items_with_events: int
    readers_with_events: int
    median_events_per_reader: float | None


def corpus_summary(corpus: Corpus) -> CorpusSummary:
    """Counts over the corpus. The median runs over readers with at least one event."""
    per_reader = Counter(ev.reader_id for ev in corpus.events)
    by_kind = Counter(ev.kind.value for ev in corpus.events)
    median = float(statistics.median(per_reader.values())) if per_reader else None
    return CorpusSummary(
        n_items=len(corpus.items),
        n_readers=len(corpus.readers),
        n_events=len(corpus.events),
        events_by_kind={k.value: by_kind.get(k.value, 0) for k in EventKind},
        items_with_events=len({ev.item_id for ev in corpus.events}),
        readers_with_events=len(per_reader),
        median_events_per_reader=median,
    )

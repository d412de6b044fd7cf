"""Cross-corpus item linkage by normalized title/author keys.

Candidates whose normalized key equals the query key form the top tier;
everything else is scored by token-set Jaccard similarity. Within a tier the
more popular record (by ratings count) wins, which mirrors choosing the most
rated edition among several search hits.
"""

from __future__ import annotations

import csv
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Corpus, ItemRecord
from .errors import ConfigError, SchemaError, UnknownIdError

EXACT = "exact"
NORMALIZED = "normalized"
POPULARITY_RANKED = "popularity-ranked"
MANUAL_OVERRIDE = "manual-override"
PROVENANCES = (EXACT, NORMALIZED, POPULARITY_RANKED, MANUAL_OVERRIDE)

TIER_KEY = 0
TIER_FUZZY = 1

DEFAULT_MIN_SCORE = 0.85
DEFAULT_POPULARITY_FIELDS = ("ratings_count",)

_ARTICLES = frozenset({"a", "an", "the"})
_APOSTROPHES = re.compile(r"['’‘`]")
_NON_WORD = re.compile(r"[^0-9a-z]+")


def _fold(text: str) -> str:
    text = unicodedata.normalize("NFKD", text or "")
    text = "".join(ch for ch in text if not unicodedata.combining(ch))
    text = _APOSTROPHES.sub("", text.lower())
    return _NON_WORD.sub(" ", text).strip()


def author_surname(author: str) -> str:
    """Last name of an author in either ``First Last`` or ``Last, First`` form."""
    if "," in (author or ""):
        head = _fold(author.split(",", 1)[0])
        if head:
            return head.split()[-1]
    tokens = _fold(author).split()
    return tokens[-1] if tokens else ""


def normalize_key(title: str, author: str) -> str:
    """``"title words|surname"``, lowercased, ASCII-folded, articles dropped.

    >>> normalize_key("The Great Gatsby", "F. Scott Fitzgerald")
    'great gatsby|fitzgerald'
    """
    words = _fold(title).split()
    if len(words) > 1 and words[0] in _ARTICLES:
        words = words[1:]
    return " ".join(words) + "|" + author_surname(author)


def key_tokens(key: str) -> frozenset[str]:
    title, _, surname = key.partition("|")
    tokens = set(title.split())
    if surname:
        tokens.add("@" + surname)  # keep surname distinct from title words
    return frozenset(tokens)


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def popularity_of(item: ItemRecord, fields: Sequence[str] = DEFAULT_POPULARITY_FIELDS) -> int:
    """Sum of the named integer metadata fields; missing or malformed count as 0."""
    total = 0
    for name in fields:
        raw = item.extra.get(name, "")
        try:
            total += max(0, int(float(raw)))
        except (TypeError, ValueError):
            continue
    return total


@dataclass(frozen=True)
class MatchCandidate:
    b_item_id: str
    score: float
    popularity: int
    tier: int = TIER_FUZZY

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if self.popularity < 0:
            raise ValueError("popularity must be nonnegative")

    def sort_key(self):
        return (self.tier, -self.popularity, self.b_item_id)


class _Index:
    """Precomputed keys for the B side so scoring is a lookup plus a scan."""

    def __init__(self, b_items: Iterable[ItemRecord], popularity_fields: Sequence[str]):
        self.records: list[tuple[ItemRecord, str, frozenset[str], int]] = []
        for item in b_items:
            key = normalize_key(item.title, item.author)
            self.records.append((item, key, key_tokens(key), popularity_of(item, popularity_fields)))

    def candidates(self, a_item: ItemRecord) -> list[MatchCandidate]:
        key = normalize_key(a_item.title, a_item.author)
        toks = key_tokens(key)
        out = []
        for item, b_key, b_toks, pop in self.records:
            if b_key == key:
                out.append(MatchCandidate(item.item_id, 1.0, pop, TIER_KEY))
                continue
            score = jaccard(toks, b_toks)
            if score > 0.0:
                out.append(MatchCandidate(item.item_id, score, pop, TIER_FUZZY))
        out.sort(key=MatchCandidate.sort_key)
        return out


def rank_candidates(
    a_item: ItemRecord,
    b_items: Iterable[ItemRecord],
    popularity_fields: Sequence[str] = DEFAULT_POPULARITY_FIELDS,
) -> list[MatchCandidate]:
    """All B records sharing at least one key token with *a_item*, best first.

    Ordering: equal-key tier before fuzzy tier, then descending popularity,
    then item id.
    """
    return _Index(b_items, popularity_fields).candidates(a_item)


@dataclass(frozen=True)
class MatchPair:
    a_item_id: str
    b_item_id: str
    provenance: str
    score: float


@dataclass
class MatchTable:
    """A 1:1 mapping between corpus-A and corpus-B item ids."""

    pairs: dict[str, MatchPair] = field(default_factory=dict)

    def __post_init__(self):
        self._b_to_a = {}
        for a, p in self.pairs.items():
            if p.b_item_id in self._b_to_a:
                raise SchemaError(f"B item {p.b_item_id!r} matched twice")
            self._b_to_a[p.b_item_id] = a

    def add(self, pair: MatchPair) -> None:
        if pair.a_item_id in self.pairs or pair.b_item_id in self._b_to_a:
            raise ValueError(f"pair {pair.a_item_id}->{pair.b_item_id} breaks the 1:1 mapping")
        self.pairs[pair.a_item_id] = pair
        self._b_to_a[pair.b_item_id] = pair.a_item_id

    def remove_a(self, a_item_id: str) -> MatchPair | None:
        pair = self.pairs.pop(a_item_id, None)
        if pair is not None:
            del self._b_to_a[pair.b_item_id]
        return pair

    def a_for_b(self, b_item_id: str) -> str | None:
        return self._b_to_a.get(b_item_id)

    def b_for_a(self, a_item_id: str) -> str | None:
        pair = self.pairs.get(a_item_id)
        return None if pair is None else pair.b_item_id

    def a_to_b(self) -> dict[str, str]:
        return {a: p.b_item_id for a, p in self.pairs.items()}

    def b_to_a(self) -> dict[str, str]:
        return dict(self._b_to_a)

    def sorted_pairs(self) -> list[MatchPair]:
        return [self.pairs[a] for a in sorted(self.pairs)]

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, a_item_id) -> bool:
        return a_item_id in self.pairs


@dataclass(frozen=True)
class QueueEntry:
    a_item_id: str
    reason: str
    candidates: tuple[MatchCandidate, ...] = ()
    evicted_b_item_id: str = ""


def _provenance(a_item: ItemRecord, b_item: ItemRecord, cand: MatchCandidate, n_key_tier: int) -> str:
    if cand.tier == TIER_KEY and n_key_tier == 1:
        raw_equal = (a_item.title.strip(), a_item.author.strip()) == (b_item.title.strip(), b_item.author.strip())
        return EXACT if raw_equal else NORMALIZED
    return POPULARITY_RANKED


def build_match_table(
    corpus_a: Corpus,
    corpus_b: Corpus,
    min_score: float = DEFAULT_MIN_SCORE,
    overrides: Iterable[tuple[str, str]] | None = None,
    *,
    popularity_fields: Sequence[str] = DEFAULT_POPULARITY_FIELDS,
    max_queue_candidates: int = 5,
) -> tuple[MatchTable, list[QueueEntry]]:
    """Greedy 1:1 linkage of corpus-A items onto corpus-B items.

    Every (A item, candidate) pair scoring at least *min_score* is visited in
    (tier, descending popularity, descending score, A id, B id) order and
    accepted when both sides are still free. Manual *overrides* are applied
    last; any pair they displace is reported in the queue as ``evicted``.

    Returns the table and the review queue (sorted by A id, then reason).
    """
    if not 0.0 <= min_score <= 1.0:
        raise ConfigError(f"min_score {min_score} outside [0, 1]")
    overrides = list(overrides or [])
    for a_id, b_id in overrides:
        if a_id not in corpus_a.items:
            raise UnknownIdError("corpus-A item", a_id)
        if b_id not in corpus_b.items:
            raise UnknownIdError("corpus-B item", b_id)

    index = _Index(corpus_b.items.values(), popularity_fields)
    ranked: dict[str, list[MatchCandidate]] = {}
    proposals = []
    for a_id in sorted(corpus_a.items):
        cands = index.candidates(corpus_a.items[a_id])
        ranked[a_id] = cands
        for c in cands:
            if c.score >= min_score:
                proposals.append((c.tier, -c.popularity, -c.score, a_id, c.b_item_id, c))
    proposals.sort(key=lambda t: t[:5])

    table = MatchTable()
    for _, _, _, a_id, b_id, cand in proposals:
        if a_id in table or table.a_for_b(b_id) is not None:
            continue
        n_key = sum(1 for c in ranked[a_id] if c.tier == TIER_KEY)
        prov = _provenance(corpus_a.items[a_id], corpus_b.items[b_id], cand, n_key)
        table.add(MatchPair(a_id, b_id, prov, cand.score))

    queue: list[QueueEntry] = []
    for a_id in sorted(corpus_a.items):
        if a_id in table:
            continue
        cands = tuple(ranked[a_id][:max_queue_candidates])
        qualifying = any(c.score >= min_score for c in ranked[a_id])
        queue.append(QueueEntry(a_id, "conflict" if qualifying else "no_candidate", cands))

    for a_id, b_id in overrides:
        displaced = []
        old = table.remove_a(a_id)
        if old is not None and old.b_item_id != b_id:
            displaced.append(old)
        holder = table.a_for_b(b_id)
        if holder is not None:
            displaced.append(table.remove_a(holder))
        queue = [q for q in queue if q.a_item_id != a_id]
        table.add(MatchPair(a_id, b_id, MANUAL_OVERRIDE, 1.0))
        for pair in displaced:
            queue.append(QueueEntry(pair.a_item_id, "evicted", tuple(ranked[pair.a_item_id][:max_queue_candidates]), pair.b_item_id))

    queue.sort(key=lambda q: (q.a_item_id, q.reason, q.evicted_b_item_id))
    return table, queue


# ---------------------------------------------------------------- files

MATCH_COLUMNS = ("a_item_id", "b_item_id", "provenance", "score")
QUEUE_COLUMNS = ("a_item_id", "reason", "evicted_b_item_id", "candidates")


def write_match_table(table: MatchTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MATCH_COLUMNS)
        for p in table.sorted_pairs():
            w.writerow([p.a_item_id, p.b_item_id, p.provenance, f"{p.score:.4f}"])


def _format_candidates(cands: Sequence[MatchCandidate]) -> str:
    return ";".join(f"{c.b_item_id}:{c.score:.4f}:{c.popularity}" for c in cands)


def write_queue(queue: Sequence[QueueEntry], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(QUEUE_COLUMNS)
        for q in queue:
            w.writerow([q.a_item_id, q.reason, q.evicted_b_item_id, _format_candidates(q.candidates)])


def read_match_table(path) -> MatchTable:
    path = Path(path)
    table = MatchTable()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"a_item_id", "b_item_id"} <= set(reader.fieldnames):
            raise SchemaError("match table needs a_item_id,b_item_id columns", path=str(path))
        for lineno, row in enumerate(reader, start=2):
            prov = (row.get("provenance") or MANUAL_OVERRIDE).strip()
            if prov not in PROVENANCES:
                raise SchemaError(f"unknown provenance {prov!r}", path=str(path), row=lineno, column="provenance")
            score_text = (row.get("score") or "1").strip()
            try:
                score = float(score_text)
            except ValueError:
                raise SchemaError(f"bad score {score_text!r}", path=str(path), row=lineno, column="score") from None
            try:
                table.add(MatchPair(row["a_item_id"].strip(), row["b_item_id"].strip(), prov, score))
            except ValueError as exc:
                raise SchemaError(str(exc), path=str(path), row=lineno) from None
    return table


def read_overrides(path) -> list[tuple[str, str]]:
    """Manual pairs from a two-column ``a_item_id,b_item_id`` CSV."""
    path = Path(path)
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"a_item_id", "b_item_id"} <= set(reader.fieldnames):
            raise SchemaError("overrides need a_item_id,b_item_id columns", path=str(path))
        for row in reader:
            out.append((row["a_item_id"].strip(), row["b_item_id"].strip()))
    return out


def match_rate(table: MatchTable, corpus_a: Corpus) -> float:
    return len(table) / len(corpus_a.items) if corpus_a.items else 0.0

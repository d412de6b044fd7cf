import datetime as dt
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_corpus, write_csv
from coread.corpus import (
    EventKind, InteractionEvent, ItemRecord, corpus_summary, filter_events, load_corpus,
    read_corpus, save_corpus, write_corpus_csv,
)
from coread.errors import DuplicateIdError, ForeignKeyError, IntervalError, SchemaError

EV = ("reader_id", "item_id", "kind", "timestamp", "value")
IT = ("item_id", "title", "author", "pub_year", "extra_json")
RD = ("reader_id", "display_name", "member_start", "member_end")


def _files(tmp_path, events, items=None, readers=None):
    items = items if items is not None else [("A", "Ulysses", "James Joyce", "1922", ""),
                                              ("B", "Nightwood", "Djuna Barnes", "1936", '{"ratings_count": 12}')]
    readers = readers if readers is not None else [("r1", "Killen", "1922-01-01", "1940-12-31"), ("r2", "", "", "")]
    return (write_csv(tmp_path / "e.csv", EV, events), write_csv(tmp_path / "i.csv", IT, items),
            write_csv(tmp_path / "r.csv", RD, readers))


def test_load_minimal(tmp_path):
    paths = _files(tmp_path, [("r1", "A", "borrow", "1930-05-01", ""), ("r2", "B", "review", "", ""),
                              ("r1", "B", "rating", "", "4")])
    c = load_corpus(*paths, label="sc")
    assert len(c.events) == 3
    assert [e.kind for e in c.events] == [EventKind.BORROW, EventKind.REVIEW, EventKind.RATING]
    assert c.events[0].timestamp == dt.date(1930, 5, 1)
    assert c.events[2].value == 4.0
    assert c.items["B"].extra == {"ratings_count": "12"}
    assert c.readers["r1"].membership_span == (dt.date(1922, 1, 1), dt.date(1940, 12, 31))
    assert c.readers["r2"].display_name is None


def test_unknown_item_names_id(tmp_path):
    paths = _files(tmp_path, [("r1", "X9", "borrow", "", "")])
    with pytest.raises(ForeignKeyError, match="X9"):
        load_corpus(*paths, label="sc")


def test_unknown_reader(tmp_path):
    paths = _files(tmp_path, [("ghost", "A", "borrow", "", "")])
    with pytest.raises(ForeignKeyError, match="ghost"):
        load_corpus(*paths, label="sc")


def test_empty_events(tmp_path):
    c = load_corpus(*_files(tmp_path, []), label="sc")
    assert c.events == ()
    assert len(c.items) == 2


@pytest.mark.parametrize("row,column", [
    (("r1", "A", "borrow", "1930-13-01", ""), "timestamp"),
    (("r1", "A", "loan", "", ""), "kind"),
    (("r1", "A", "rating", "", ""), "value"),
    (("r1", "A", "borrow", "", "5"), "value"),
    (("", "A", "borrow", "", ""), "reader_id"),
])
def test_schema_errors_name_row_and_column(tmp_path, row, column):
    paths = _files(tmp_path, [("r1", "A", "borrow", "", ""), row])
    with pytest.raises(SchemaError) as err:
        load_corpus(*paths, label="sc")
    assert err.value.row == 3
    assert err.value.column == column


def test_missing_column(tmp_path):
    _, i, r = _files(tmp_path, [])
    write_csv(tmp_path / "e.csv", ("reader_id", "item_id", "kind"), [])
    with pytest.raises(SchemaError):
        load_corpus(tmp_path / "e.csv", i, r, label="sc")


def test_pub_year_range(tmp_path):
    paths = _files(tmp_path, [], items=[("A", "t", "a", "999", "")])
    with pytest.raises(SchemaError):
        load_corpus(*paths, label="sc")


def test_duplicate_ids(tmp_path):
    paths = _files(tmp_path, [], items=[("A", "t", "a", "", ""), ("A", "u", "b", "", "")])
    with pytest.raises(DuplicateIdError):
        load_corpus(*paths, label="sc")
    paths = _files(tmp_path, [], readers=[("r1", "", "", ""), ("r1", "", "", "")])
    with pytest.raises(DuplicateIdError):
        load_corpus(*paths, label="sc")


def test_event_invariants():
    with pytest.raises(ValueError):
        InteractionEvent("", "A", EventKind.BORROW)
    with pytest.raises(ValueError):
        InteractionEvent("r", "A", EventKind.RATING)
    with pytest.raises(ValueError):
        ItemRecord("A", "t", "a", 2200)


def test_filter_kinds_and_years():
    c = make_corpus([("r1", "A", "borrow"), ("r1", "B", "borrow"), ("r2", "A", "review")],
                    years={"A": 1925, "B": 1950})
    assert len(filter_events(c, kinds={"borrow"}).events) == 2
    kept = filter_events(c, pub_year_range=(1800, 1940))
    assert {e.item_id for e in kept.events} == {"A"}
    assert set(kept.items) == {"A", "B"}  # metadata retained


def test_filter_dates_inclusive_and_undated():
    c = make_corpus([("r1", "A", "borrow", 0), ("r1", "A", "borrow", 10), ("r2", "A", "borrow")])
    lo, hi = dt.date(1930, 1, 1), dt.date(1930, 1, 11)
    assert len(filter_events(c, date_range=(lo, hi)).events) == 2
    assert len(filter_events(c, date_range=(lo, lo)).events) == 1


def test_inverted_interval():
    c = make_corpus([("r1", "A", "borrow", 0)])
    with pytest.raises(IntervalError):
        filter_events(c, date_range=(dt.date(1931, 1, 1), dt.date(1930, 1, 1)))
    with pytest.raises(IntervalError):
        filter_events(c, pub_year_range=(1940, 1800))


def test_duplicates_kept_unless_dedup():
    c = make_corpus([("r1", "A", "borrow", 3), ("r1", "A", "borrow", 3)])
    assert len(filter_events(c).events) == 2
    assert len(filter_events(c, dedup=True).events) == 1


def test_summary():
    c = make_corpus([("r1", "A", "borrow"), ("r1", "B", "borrow"), ("r1", "A", "borrow")])
    s = corpus_summary(c)
    assert (s.n_items, s.n_readers, s.events_by_kind["borrow"]) == (2, 1, 3)


def test_summary_empty():
    s = corpus_summary(make_corpus([], items=[], readers=[]))
    assert (s.n_items, s.n_readers, s.n_events) == (0, 0, 0)
    assert s.median_events_per_reader is None


def test_summary_median_nine():
    events = [("r1", "A", "borrow")] + [("r2", "A", "borrow")] * 9 + [("r3", "A", "borrow")] * 1480
    assert corpus_summary(make_corpus(events)).median_events_per_reader == 9


def test_summary_even_median():
    events = [("r1", "A", "borrow")] * 2 + [("r2", "A", "borrow")] * 5
    assert corpus_summary(make_corpus(events)).median_events_per_reader == 3.5


def test_pickle_round_trip(tmp_path):
    c = make_corpus([("r1", "A", "borrow", 2)])
    save_corpus(c, tmp_path / "c.bin")
    assert read_corpus(tmp_path / "c.bin") == c


# ---------------------------------------------------------------- properties

kinds = st.sampled_from(["borrow", "review", "rating"])
event_rows = st.lists(
    st.tuples(st.sampled_from(["r1", "r2", "r3"]), st.sampled_from(["A", "B", "C", "D"]), kinds,
              st.one_of(st.none(), st.integers(0, 800))),
    max_size=40,
)


@settings(max_examples=60, deadline=None)
@given(event_rows)
def test_csv_round_trip(tmp_path_factory, rows):
    c = make_corpus(rows, items=["A", "B", "C", "D"], readers=["r1", "r2", "r3"],
                    years={"A": 1900, "C": 2001}, extras={"B": {"ratings_count": "7", "note": "a,b"}})
    d = tmp_path_factory.mktemp("rt")
    back = load_corpus(*write_corpus_csv(c, d), label="t")
    assert back.events == c.events
    assert back.items == c.items
    assert back.readers == c.readers


@settings(max_examples=100, deadline=None)
@given(event_rows, st.sets(kinds, min_size=1), st.integers(0, 800), st.integers(0, 800))
def test_filter_idempotent_and_monotone(rows, ks, a, b):
    c = make_corpus(rows, items=["A", "B", "C", "D"])
    span = (dt.date(1930, 1, 1) + dt.timedelta(days=min(a, b)), dt.date(1930, 1, 1) + dt.timedelta(days=max(a, b)))
    once = filter_events(c, kinds=ks, date_range=span)
    twice = filter_events(once, kinds=ks, date_range=span)
    assert once.events == twice.events
    assert not Counter(once.events) - Counter(c.events)


@settings(max_examples=100, deadline=None)
@given(event_rows)
def test_summary_matches_recount(rows):
    c = make_corpus(rows)
    s = corpus_summary(c)
    assert s.n_events == len(rows)
    for k in ("borrow", "review", "rating"):
        assert s.events_by_kind[k] == sum(1 for r in rows if r[2] == k)
    assert s.items_with_events == len({r[1] for r in rows})

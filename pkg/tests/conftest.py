import datetime as dt
import shutil
import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from coread.corpus import Corpus, EventKind, InteractionEvent, ItemRecord, ReaderRecord  # noqa: E402


def make_corpus(events, items=None, readers=None, label="t", years=None, extras=None):
    """Build a corpus from ``(reader, item, kind[, date[, value]])`` tuples.

    Items and readers default to whatever the events mention.
    """
    evs = []
    for e in events:
        reader, item, kind, *rest = e
        date = rest[0] if rest else None
        if isinstance(date, int):
            date = dt.date(1930, 1, 1) + dt.timedelta(days=date)
        value = rest[1] if len(rest) > 1 else (3.0 if kind == "rating" else None)
        evs.append(InteractionEvent(reader, item, EventKind(kind), date, value))
    years = years or {}
    extras = extras or {}
    item_ids = items if items is not None else sorted({e.item_id for e in evs})
    reader_ids = readers if readers is not None else sorted({e.reader_id for e in evs})
    return Corpus(
        label,
        tuple(evs),
        {i: ItemRecord(i, f"Title {i}", f"Author {i}", years.get(i), extras.get(i, {})) for i in item_ids},
        {r: ReaderRecord(r, None, None) for r in reader_ids},
    )


def write_csv(path, header, rows):
    import csv
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def fixture_dir(tmp_path):
    """A writable copy of the bundled 10-item fixture."""
    src = resources.files("coread") / "data" / "fixture"
    dst = tmp_path / "fixture"
    with resources.as_file(src) as p:
        shutil.copytree(p, dst)
    return dst


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)

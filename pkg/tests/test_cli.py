import csv
import json

import pytest

from coread.cli import build_parser, main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def staged(fixture_dir, tmp_path):
    """Ingested corpora plus a match table, the shared prefix of most chains."""
    out = tmp_path / "work"
    out.mkdir()
    for side, label in (("a", "library"), ("b", "reviews")):
        assert main(["ingest", "--events", str(fixture_dir / f"events_{side}.csv"),
                     "--items", str(fixture_dir / f"items_{side}.csv"),
                     "--readers", str(fixture_dir / f"readers_{side}.csv"),
                     "--label", label, "--out", str(out / f"{side}.pkl")]) == 0
    assert main(["match", "--a", str(out / "a.pkl"), "--b", str(out / "b.pkl"),
                 "--out", str(out / "match.csv"), "--queue", str(out / "queue.csv")]) == 0
    return out


def test_match_and_popularity(staged, capsys):
    assert len(rows(staged / "match.csv")) == 10
    assert main(["popularity", "--a", str(staged / "a.pkl"), "--b", str(staged / "b.pkl"),
                 "--match", str(staged / "match.csv"), "--out", str(staged / "ranks.csv")]) == 0
    assert "pearson r=" in capsys.readouterr().out
    ranks = rows(staged / "ranks.csv")
    assert len(ranks) == 10
    changes = [float(r["rank_change"]) for r in ranks]
    assert changes == sorted(changes, reverse=True)


def test_network_divergence_and_structure(staged, capsys):
    for side in ("a", "b"):
        assert main(["network", "--corpus", str(staged / f"{side}.pkl"), "--match", str(staged / "match.csv"),
                     "--side", side, "--out", str(staged / f"g{side}.csv")]) == 0
    assert main(["divergence", "--ga", str(staged / "ga.csv"), "--gb", str(staged / "gb.csv"),
                 "--min-a", "0", "--min-b", "0", "--out", str(staged / "div.csv")]) == 0
    div = rows(staged / "div.csv")
    assert div and all(0 <= float(r["divergence"]) <= 1 for r in div)
    item = div[0]["item"]
    capsys.readouterr()
    assert main(["neighbors", "--graph", str(staged / "ga.csv"), "--item", item, "--k", "2"]) == 0
    assert capsys.readouterr().out.startswith("rank,neighbor,weight\n1,")
    assert main(["coreper", "--graph", str(staged / "ga.csv"), "--seed", "3", "--sweeps", "400",
                 "--samples", "50", "--out", str(staged / "layers.csv")]) == 0
    assert main(["centrality", "--graph", str(staged / "ga.csv"), "--out", str(staged / "cent.csv")]) == 0
    assert {r["node"] for r in rows(staged / "cent.csv")} == {r["node"] for r in rows(staged / "layers.csv")}
    assert main(["reader-corr", "--scores", str(staged / "layers.csv"), "--corpus", str(staged / "a.pkl"),
                 "--readers", "r_beach,r_killen"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("combination,mode,score") and len(out) == 4


def test_members_drift_collections_proximity(staged, fixture_dir, capsys):
    main(["popularity", "--a", str(staged / "a.pkl"), "--b", str(staged / "b.pkl"),
          "--match", str(staged / "match.csv"), "--out", str(staged / "ranks.csv")])
    assert main(["drift", "--ranks", str(staged / "ranks.csv"), "--top", "3", "--out", str(staged / "d.csv")]) == 0
    assert [r["direction"] for r in rows(staged / "d.csv")] == ["fell"] * 3 + ["rose"] * 3
    assert main(["collections", "--assignments", str(fixture_dir / "assignments.csv"), "--ranks",
                 str(staged / "ranks.csv"), "--min-assigners", "2", "--min-books", "3",
                 "--out", str(staged / "c.csv")]) == 0
    assert rows(staged / "c.csv")
    assert main(["members", "--corpus", str(staged / "a.pkl"), "--ranks", str(staged / "ranks.csv"),
                 "--min-events", "5", "--out", str(staged / "m.csv")]) == 0
    assert rows(staged / "m.csv")
    (staged / "items.txt").write_text("a01\na03\n")
    capsys.readouterr()
    assert main(["proximity", "--corpus", str(staged / "a.pkl"), "--items", str(staged / "items.txt")]) == 0
    body = capsys.readouterr().out.splitlines()
    assert body[0] == "item_id,reader_1,reader_2,gap_days"
    assert all(line.split(",")[0] in ("a01", "a03") for line in body[1:])


def test_run_subcommand(fixture_dir):
    assert main(["run", "--config", str(fixture_dir / "run.toml"), "--timings"]) == 0
    manifest = json.loads((fixture_dir / "report" / "manifest.json").read_text())
    assert "timings_s" in manifest


def test_exit_codes(fixture_dir, tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "absent.toml")]) == 2
    bad = tmp_path / "events.csv"
    bad.write_text("reader_id,item_id,kind,timestamp,value\nr,a01,teleport,,\n")
    code = main(["ingest", "--events", str(bad), "--items", str(fixture_dir / "items_a.csv"),
                 "--readers", str(fixture_dir / "readers_a.csv"), "--label", "x", "--out", str(tmp_path / "x.pkl")])
    assert code == 3
    graph = tmp_path / "g.csv"
    graph.write_text("u,v,weight\na1,a2,1\na2,a3,1\na1,a3,1\nb1,b2,1\nb2,b3,1\nb1,b3,1\na1,x,1\nx,b1,1\n")
    assert main(["centrality", "--graph", str(graph), "--tolerance", "1e-15", "--max-iters", "3"]) == 4
    assert main(["run", "--config", str(fixture_dir / "items_a.csv")]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_input_file(tmp_path):
    assert main(["neighbors", "--graph", str(tmp_path / "nope.csv"), "--item", "x"]) == 2


def test_help_shows_defaults(capsys):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command").choices
    def flat(name):
        return " ".join(sub[name].format_help().split())

    for expected in ("--layers LAYERS number of nested layers (default: 5)", "(default: 20000)",
                     "retained posterior samples (default: 500)", "(default: 1)"):
        assert expected in flat("coreper")
    assert "(default: 0.01)" in flat("divergence")
    assert "(default: 0.85)" in flat("match")
    assert "(default: 1e-10)" in flat("centrality")
    with pytest.raises(SystemExit) as info:
        main(["coreper", "--graph", "g.csv"])
    assert info.value.code == 2

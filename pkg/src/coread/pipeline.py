"""End-to-end run: ingest, match, popularity, collections, network, divergence, core-periphery, members.

A run writes its tables into a scratch directory next to the target and
renames it into place only when every stage succeeded, so a failed run
leaves nothing behind. The manifest records a hash of the configuration and
of every input and output file; no wall-clock data enters the bundle unless
timings are requested explicitly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import collection_drift as coll
from . import conetwork as net
from . import corestruct as cs
from . import members as mem
from . import popularity as pop
from . import report
from .corpus import Corpus, as_kind, corpus_summary, load_corpus
from .errors import ConfigError, CoreadError, DegenerateInputError, StageError
from .matching import DEFAULT_MIN_SCORE, build_match_table, read_match_table, read_overrides, write_match_table, write_queue
from .stats import density_curve, density_grid, quantile_summary

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

STAGES = ("ingest", "match", "popularity", "collections", "network", "divergence", "coreper", "members")
CORE_TABLES = (
    "match.csv", "queue.csv", "ranks.csv", "collection_drift.csv",
    "graph_a.csv", "graph_b.csv", "divergence.csv", "structure.csv", "members.csv",
)


@dataclass(frozen=True)
class CorpusPaths:
    label: str
    events: str
    items: str
    readers: str


@dataclass(frozen=True)
class RunConfig:
    corpus_a: CorpusPaths
    corpus_b: CorpusPaths
    out_dir: str = "report"
    # match
    match_enabled: bool = True
    min_score: float = DEFAULT_MIN_SCORE
    overrides: str | None = None
    match_path: str | None = None
    # popularity
    kind_a: str = "borrow"
    kind_b: str = "review"
    top_k: int = 100
    # collections
    assignments: str | None = None
    min_assigners: int = coll.DEFAULT_MIN_ASSIGNERS
    min_books: int = coll.DEFAULT_MIN_BOOKS
    # network / divergence
    network_kinds_a: tuple[str, ...] = ("borrow",)
    network_kinds_b: tuple[str, ...] = ("review",)
    filter_kind_a: str = "borrow"
    filter_kind_b: str = "rating"
    min_a: int = net.DEFAULT_MIN_A
    min_b: int = net.DEFAULT_MIN_B
    smoothing: float = net.DEFAULT_SMOOTHING
    # core-periphery
    coreper_enabled: bool = True
    coreper_graph: str = "a"
    restrict_to_shared: bool = True
    layers: int = cs.DEFAULT_LAYERS
    seed: int | None = None
    samples: int = cs.DEFAULT_SAMPLES
    sweeps: int = cs.DEFAULT_SWEEPS
    # members
    min_events: int = mem.DEFAULT_MIN_EVENTS
    window_days: int = mem.DEFAULT_WINDOW_DAYS
    reader_combos: tuple[tuple[str, ...], ...] = ()
    # report
    extras: bool = False
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        if self.corpus_a.label == self.corpus_b.label:
            raise ConfigError("corpus labels must differ")
        for name in ("min_assigners", "min_books", "min_a", "min_b", "min_events", "window_days", "top_k"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.smoothing < 0:
            raise ConfigError("smoothing must be nonnegative")
        if not 0.0 <= self.min_score <= 1.0:
            raise ConfigError("min_score must lie in [0, 1]")
        if self.coreper_enabled and self.seed is None:
            raise ConfigError("a seed is required when core-periphery inference is enabled")
        if self.coreper_graph not in ("a", "b"):
            raise ConfigError("coreper graph must be 'a' or 'b'")
        for k in (self.kind_a, self.kind_b, self.filter_kind_a, self.filter_kind_b, *self.network_kinds_a, *self.network_kinds_b):
            try:
                as_kind(k)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        for combo in self.reader_combos:
            if len(combo) < 2 or combo[-1] not in ("and", "or"):
                raise ConfigError(f"reader combination {combo!r} must be readers followed by 'and' or 'or'")

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _corpus_paths(section: dict, name: str) -> CorpusPaths:
    try:
        return CorpusPaths(str(section["label"]), str(section["events"]), str(section["items"]), str(section["readers"]))
    except KeyError as exc:
        raise ConfigError(f"[{name}] is missing {exc.args[0]!r}") from None


def load_config(path) -> RunConfig:
    """Read a TOML run configuration; relative paths resolve against its directory."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, base_dir=str(path.parent))


def config_from_dict(raw: dict, base_dir: str = ".") -> RunConfig:
    raw = dict(raw)
    known = {"corpus_a", "corpus_b", "out_dir", "seed", "match", "popularity", "collections",
             "network", "coreper", "members", "report"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    for name in ("corpus_a", "corpus_b"):
        if name not in raw:
            raise ConfigError(f"missing [{name}] section")
    m = raw.get("match", {})
    p = raw.get("popularity", {})
    c = raw.get("collections", {})
    n = raw.get("network", {})
    k = raw.get("coreper", {})
    me = raw.get("members", {})
    r = raw.get("report", {})
    kwargs = dict(
        corpus_a=_corpus_paths(raw["corpus_a"], "corpus_a"),
        corpus_b=_corpus_paths(raw["corpus_b"], "corpus_b"),
        out_dir=raw.get("out_dir", "report"),
        match_enabled=m.get("enabled", True),
        min_score=m.get("min_score", DEFAULT_MIN_SCORE),
        overrides=m.get("overrides"),
        match_path=m.get("path"),
        kind_a=p.get("kind_a", "borrow"),
        kind_b=p.get("kind_b", "review"),
        top_k=p.get("top_k", 100),
        assignments=c.get("assignments"),
        min_assigners=c.get("min_assigners", coll.DEFAULT_MIN_ASSIGNERS),
        min_books=c.get("min_books", coll.DEFAULT_MIN_BOOKS),
        network_kinds_a=tuple(n.get("kinds_a", ("borrow",))),
        network_kinds_b=tuple(n.get("kinds_b", ("review",))),
        filter_kind_a=n.get("filter_kind_a", "borrow"),
        filter_kind_b=n.get("filter_kind_b", "rating"),
        min_a=n.get("min_a", net.DEFAULT_MIN_A),
        min_b=n.get("min_b", net.DEFAULT_MIN_B),
        smoothing=n.get("smoothing", net.DEFAULT_SMOOTHING),
        coreper_enabled=k.get("enabled", True),
        coreper_graph=k.get("graph", "a"),
        restrict_to_shared=k.get("restrict_to_shared", True),
        layers=k.get("layers", cs.DEFAULT_LAYERS),
        seed=k.get("seed", raw.get("seed")),
        samples=k.get("samples", cs.DEFAULT_SAMPLES),
        sweeps=k.get("sweeps", cs.DEFAULT_SWEEPS),
        min_events=me.get("min_events", mem.DEFAULT_MIN_EVENTS),
        window_days=me.get("window_days", mem.DEFAULT_WINDOW_DAYS),
        reader_combos=tuple(tuple(x) for x in me.get("reader_combos", ())),
        extras=r.get("extras", False),
        base_dir=base_dir,
    )
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------- running


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _safe_stat(fn, *args):
    try:
        return fn(*args)
    except DegenerateInputError:
        return None


@dataclass
class RunResult:
    out_dir: Path
    manifest: dict
    tables: dict[str, Path]


class _Run:
    def __init__(self, config: RunConfig, work: Path):
        self.cfg = config
        self.work = work
        self.tables: dict[str, Path] = {}
        self.stats: dict[str, Any] = {}
        self.timings: dict[str, float] = {}

    def emit(self, name, rows, schema, sort_keys):
        self.tables[name] = report.emit_table(rows, schema, sort_keys, self.work / name)

    # each stage reads what earlier stages left on self

    def ingest(self):
        cfg = self.cfg
        self.a = self._load(cfg.corpus_a)
        self.b = self._load(cfg.corpus_b)
        self.stats["corpus_a"] = dataclasses.asdict(corpus_summary(self.a))
        self.stats["corpus_b"] = dataclasses.asdict(corpus_summary(self.b))

    def _load(self, paths: CorpusPaths) -> Corpus:
        r = self.cfg.resolve
        return load_corpus(r(paths.events), r(paths.items), r(paths.readers), paths.label)

    def match(self):
        cfg = self.cfg
        if cfg.match_enabled:
            overrides = read_overrides(cfg.resolve(cfg.overrides)) if cfg.overrides else None
            self.table, queue = build_match_table(self.a, self.b, cfg.min_score, overrides)
        else:
            path = cfg.resolve(cfg.match_path)
            if path is None:
                raise ConfigError("matching is disabled but no match table path is configured")
            if not path.is_file():
                raise ConfigError(f"match table not found: {path}")
            self.table, queue = read_match_table(path), []
        for pair in self.table.sorted_pairs():
            if pair.a_item_id not in self.a.items or pair.b_item_id not in self.b.items:
                raise ConfigError(f"match pair {pair.a_item_id}->{pair.b_item_id} references unknown items")
        write_match_table(self.table, self.work / "match.csv")
        write_queue(queue, self.work / "queue.csv")
        self.tables["match.csv"] = self.work / "match.csv"
        self.tables["queue.csv"] = self.work / "queue.csv"
        self.stats["match"] = {"pairs": len(self.table), "queue": len(queue),
                               "rate": round(len(self.table) / max(1, len(self.a.items)), 6)}

    def popularity(self):
        cfg = self.cfg
        self.ranks = pop.build_rank_table(self.a, self.b, self.table, cfg.kind_a, cfg.kind_b)
        self.author_ranks = pop.build_rank_table(self.a, self.b, self.table, cfg.kind_a, cfg.kind_b, level=pop.KEY_AUTHOR)
        self.emit("ranks.csv", pop.rank_rows(self.ranks), report.RANKS, report.RANKS_SORT)

        ca = {k: r.count_a for k, r in self.ranks.rows.items()}
        cb = {k: r.count_b for k, r in self.ranks.rows.items()}
        k = min(cfg.top_k, len(ca))
        item_r = _safe_stat(self.ranks.correlation)
        author_r = _safe_stat(self.author_ranks.correlation)
        self.stats["popularity"] = {
            "items": len(self.ranks),
            "authors": len(self.author_ranks),
            "pearson_item_ranks": None if item_r is None else {"r": round(item_r[0], 6), "p": item_r[1]},
            "pearson_author_ranks": None if author_r is None else {"r": round(author_r[0], 6), "p": author_r[1]},
            "top_k": k,
            "top_k_overlap": pop.top_k_overlap(ca, cb, k) if k else 0,
        }
        if cfg.extras:
            self._popularity_extras(ca, cb)

    def _popularity_extras(self, ca, cb):
        self.emit("author_ranks.csv", pop.rank_rows(self.author_ranks), report.RANKS, report.RANKS_SORT)
        risers, fallers = pop.risers_and_fallers(self.ranks, 10)
        drift = [{"direction": d, "position": i + 1, "rank_change": r.rank_change, "key": r.key,
                  "title": r.title, "author": r.author}
                 for d, rows in (("fell", fallers), ("rose", risers)) for i, r in enumerate(rows)]
        self.emit("drift.csv", drift, report.DRIFT, report.DRIFT_SORT)
        rel = [{"key": k, "pub_year": y, "log_ratio": v} for k, y, v in pop.relative_popularity_table(self.ranks)]
        self.emit("relative_popularity.csv", rel, report.RELATIVE, report.RELATIVE_SORT)
        dens = []
        for label, counts in (("a", ca), ("b", cb)):
            vals = np.log1p(np.array(sorted(counts.values()), dtype=float))
            if np.unique(vals).size >= 2:
                grid = density_grid(vals, points=128)
                dens += [{"corpus": label, "x": float(x), "density": float(d)}
                         for x, d in zip(grid, density_curve(vals, grid))]
        self.emit("density.csv", dens, report.DENSITY, report.DENSITY_SORT)
        box = []
        for label, counts in (("a", ca), ("b", cb)):
            top = pop.top_k(counts, min(self.cfg.top_k, len(counts)))
            years = [self.ranks[k].pub_year for k in top if self.ranks[k].pub_year is not None]
            if years:
                s = quantile_summary(years)
                for stat in ("min", "whisker_low", "q1", "median", "q3", "whisker_high", "max"):
                    box.append({"group": label, "stat": stat, "value": getattr(s, stat)})
                box += [{"group": label, "stat": "outlier", "value": v} for v in s.outliers]
        self.emit("pubyear_box.csv", box, report.BOXPLOT, report.BOXPLOT_SORT)

    def collections(self):
        cfg = self.cfg
        rows = []
        if cfg.assignments:
            assignments = coll.read_assignments(cfg.resolve(cfg.assignments))
            rows = coll.collection_drift_rows(assignments, self.ranks, cfg.min_assigners, cfg.min_books)
        self.emit("collection_drift.csv", rows, report.COLLECTIONS, report.COLLECTIONS_SORT)
        self.stats["collections"] = {"kept": len(rows)}

    def network(self):
        cfg = self.cfg
        universe = sorted(self.table.pairs)
        self.ga = net.induce_cograph(self.a, universe, kinds=cfg.network_kinds_a)
        self.gb = net.induce_cograph(self.b, universe, kinds=cfg.network_kinds_b, id_map=self.table.b_to_a())
        self.emit("graph_a.csv", net.graph_rows(self.ga), report.GRAPH, report.GRAPH_SORT)
        self.emit("graph_b.csv", net.graph_rows(self.gb), report.GRAPH, report.GRAPH_SORT)
        self.shared = net.connected_in_both(self.ga, self.gb)
        self.stats["network"] = {"edges_a": len(self.ga.edges()), "edges_b": len(self.gb.edges()),
                                 "connected_in_both": len(self.shared)}

    def divergence(self):
        cfg = self.cfg
        fa = pop.interaction_counts(self.a, cfg.filter_kind_a)
        fb_raw = pop.interaction_counts(self.b, cfg.filter_kind_b)
        fb = {a: fb_raw.get(b, 0) for a, b in self.table.a_to_b().items()}
        items = net.top_quartile_filter(self.shared, fa, fb, cfg.min_a, cfg.min_b)
        ranking = net.divergence_ranking(items, self.ga, self.gb, cfg.smoothing)
        rows = []
        for i, r in enumerate(ranking, start=1):
            it = self.a.items[r.item]
            rows.append({"rank": i, "item": r.item, "divergence": r.divergence, "degree_a": r.degree_a,
                         "degree_b": r.degree_b, "title": it.title, "author": it.author})
        self.emit("divergence.csv", rows, report.DIVERGENCE, report.DIVERGENCE_SORT)
        self.stats["divergence"] = {"filtered_items": len(items), "ranked": len(rows)}

    def coreper(self):
        cfg = self.cfg
        schema = report.structure_schema(cfg.layers)
        graph = self.ga if cfg.coreper_graph == "a" else self.gb
        if cfg.restrict_to_shared:
            keep = self.shared
            graph = net.CoGraph(tuple(keep), {u: {v: w for v, w in graph.adj[u].items() if v in keep} for u in keep})
        rows = []
        self.scores: dict[str, float] = {}
        if cfg.coreper_enabled and len(graph):
            assignment = cs.infer_layers(
                graph, cfg.layers, cfg.seed, cfg.samples,
                cs.AnnealSchedule(sweeps=cfg.sweeps),
            )
            rows = cs.layer_rows(assignment)
            self.scores = {r["node"]: r["coreness"] for r in rows}
            deg = _safe_stat(cs.degree_centrality, graph) or {}
            btw = _safe_stat(cs.betweenness_centrality, graph) or {}
            eig = _safe_stat(cs.eigenvector_centrality, graph) or {}
            for row in rows:
                n = row["node"]
                row.update(degree=deg.get(n), betweenness=btw.get(n), eigenvector=eig.get(n))
            self.centrality = {"degree": deg, "betweenness": btw, "eigenvector": eig}
        self.emit("structure.csv", rows, schema, report.STRUCTURE_SORT)
        self.stats["coreper"] = {"nodes": len(rows)}

    def members(self):
        cfg = self.cfg
        profiles = mem.member_profiles(self.a, self.ranks, cfg.min_events, cfg.kind_a)
        self.emit("members.csv", [dataclasses.asdict(p) for p in profiles], report.MEMBERS, report.MEMBERS_SORT)
        self.stats["members"] = {"profiled": len(profiles)}
        if cfg.extras:
            hits = mem.borrow_proximity(self.a, None, cfg.window_days, cfg.kind_a)
            self.emit("proximity.csv", [dataclasses.asdict(h) for h in hits], report.PROXIMITY, report.PROXIMITY_SORT)
            self._reader_corr()

    def _reader_corr(self):
        rows = []
        if self.scores and self.cfg.reader_combos:
            reader_sets = self.a.reader_items([self.cfg.kind_a])
            combos = [cs.ReaderCombo(tuple(c[:-1]), c[-1]) for c in self.cfg.reader_combos]
            score_sets = {"coreness": self.scores}
            score_sets.update({k: v for k, v in self.centrality.items() if v})
            for name, scores in score_sets.items():
                for res in cs.reader_structure_correlation(scores, reader_sets, combos):
                    rows.append({"combination": res.label, "mode": res.mode, "score": name,
                                 "n_read": res.n_read, "rho": res.rho, "p_value": res.p_value})
        self.emit("reader_corr.csv", rows, report.READER_CORR, report.READER_CORR_SORT)


def _prepare_target(out: Path) -> None:
    if out.exists():
        if not out.is_dir():
            raise ConfigError(f"output path {out} exists and is not a directory")
        if any(out.iterdir()) and not (out / "manifest.json").is_file():
            raise ConfigError(f"refusing to replace non-empty directory {out} that holds no previous bundle")


def run_pipeline(config: RunConfig, *, record_timings: bool = False) -> RunResult:
    """Run every stage and write the report bundle into ``config.out_dir``."""
    out = config.resolve(config.out_dir)
    _prepare_target(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    work = Path(tempfile.mkdtemp(prefix=".coread-", dir=out.parent))
    run = _Run(config, work)
    try:
        for stage in STAGES:
            t0 = time.perf_counter()
            try:
                getattr(run, stage)()
            except CoreadError as exc:
                raise StageError(stage, exc) from exc
            except (OSError, ValueError, KeyError) as exc:
                raise StageError(stage, exc) from exc
            run.timings[stage] = time.perf_counter() - t0
            log.info("stage %s done in %.3fs", stage, run.timings[stage])

        inputs = {}
        for role, paths in (("a", config.corpus_a), ("b", config.corpus_b)):
            for part in ("events", "items", "readers"):
                inputs[f"{role}.{part}"] = _sha256(config.resolve(getattr(paths, part)))
        for name in ("overrides", "assignments", "match_path"):
            value = getattr(config, name)
            if value and (name != "match_path" or not config.match_enabled):
                inputs[name] = _sha256(config.resolve(value))
        manifest = {
            "config_hash": config.config_hash(),
            "config": config.to_dict(),
            "stages": list(STAGES),
            "inputs": inputs,
            "outputs": {name: _sha256(path) for name, path in sorted(run.tables.items())},
            "statistics": run.stats,
        }
        if record_timings:
            manifest["timings_s"] = {k: round(v, 6) for k, v in run.timings.items()}
        (work / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    except BaseException:
        shutil.rmtree(work, ignore_errors=True)
        raise

    if out.exists():
        shutil.rmtree(out)
    work.rename(out)
    return RunResult(out, manifest, {name: out / name for name in run.tables})

"""Command line for coread.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import collection_drift as coll
from . import conetwork as net
from . import corestruct as cs
from . import members as mem
from . import popularity as pop
from . import report
from .corpus import corpus_summary, load_corpus, read_corpus, save_corpus
from .errors import CoreadError
from .matching import DEFAULT_MIN_SCORE, build_match_table, read_match_table, read_overrides, write_match_table, write_queue
from .pipeline import load_config, run_pipeline

log = logging.getLogger("coread")


def _print_table(rows, schema, sort_keys, out=None):
    if out:
        report.emit_table(rows, schema, sort_keys, out)
        return
    import csv
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow([c.name for c in schema])
    for row in report.sort_rows(rows, sort_keys):
        w.writerow([c.render(row[c.name]) for c in schema])


def cmd_ingest(args):
    corpus = load_corpus(args.events, args.items, args.readers, args.label)
    save_corpus(corpus, args.out)
    s = corpus_summary(corpus)
    print(f"{corpus.label}: {s.n_events} events, {s.n_items} items, {s.n_readers} readers -> {args.out}")


def cmd_match(args):
    a, b = read_corpus(args.a), read_corpus(args.b)
    overrides = read_overrides(args.overrides) if args.overrides else None
    table, queue = build_match_table(a, b, args.min_score, overrides)
    write_match_table(table, args.out)
    if args.queue:
        write_queue(queue, args.queue)
    print(f"matched {len(table)} of {len(a.items)} items; {len(queue)} queued for review")


def cmd_popularity(args):
    a, b = read_corpus(args.a), read_corpus(args.b)
    table = pop.build_rank_table(a, b, read_match_table(args.match), args.kind_a, args.kind_b, level=args.by)
    report.emit_table(pop.rank_rows(table), report.RANKS, report.RANKS_SORT, args.out)
    if len(table) >= 3:
        try:
            r, p = table.correlation()
            print(f"pearson r={r:.4f} p={p:.3g} over {len(table)} {args.by}s")
        except CoreadError as exc:
            print(f"pearson r undefined: {exc}")


def cmd_drift(args):
    table = pop.read_rank_table(args.ranks)
    risers, fallers = pop.risers_and_fallers(table, args.top)
    rows = [{"direction": d, "position": i + 1, "rank_change": r.rank_change, "key": r.key,
             "title": r.title, "author": r.author}
            for d, group in (("fell", fallers), ("rose", risers)) for i, r in enumerate(group)]
    _print_table(rows, report.DRIFT, ("direction", "position"), args.out)


def cmd_collections(args):
    rows = coll.collection_drift_rows(coll.read_assignments(args.assignments), pop.read_rank_table(args.ranks),
                                      args.min_assigners, args.min_books, item_ids=args.item_ids)
    _print_table(rows, report.COLLECTIONS, report.COLLECTIONS_SORT, args.out)


def cmd_network(args):
    corpus = read_corpus(args.corpus)
    table = read_match_table(args.match)
    kinds = args.kinds.split(",") if args.kinds else None
    universe = sorted(table.pairs)
    if args.side == "a":
        graph = net.induce_cograph(corpus, universe, kinds=kinds)
    else:
        graph = net.induce_cograph(corpus, universe, kinds=kinds, id_map=table.b_to_a())
    report.emit_table(net.graph_rows(graph), report.GRAPH, report.GRAPH_SORT, args.out)
    print(f"{len(graph)} nodes, {len(graph.edges())} edges -> {args.out}")


def cmd_divergence(args):
    ga, gb = net.read_graph(args.ga), net.read_graph(args.gb)
    items = net.connected_in_both(ga, gb)
    if args.ranks:
        ranks = pop.read_rank_table(args.ranks)
        ca = {k: r.count_a for k, r in ranks.rows.items()}
        cb = {k: r.count_b for k, r in ranks.rows.items()}
        items = net.top_quartile_filter(items, ca, cb, args.min_a, args.min_b)
    elif args.min_a or args.min_b:
        log.warning("no --ranks given; popularity thresholds not applied")
    rows = [{"rank": i, "item": r.item, "divergence": r.divergence, "degree_a": r.degree_a,
             "degree_b": r.degree_b, "title": "", "author": ""}
            for i, r in enumerate(net.divergence_ranking(items, ga, gb, args.smoothing), start=1)]
    _print_table(rows, report.DIVERGENCE, report.DIVERGENCE_SORT, args.out)


def cmd_neighbors(args):
    graph = net.read_graph(args.graph)
    rows = [{"rank": i, "neighbor": n, "weight": w}
            for i, (n, w) in enumerate(net.top_neighbors(graph, args.item, args.k), start=1)]
    _print_table(rows, report.NEIGHBORS, report.NEIGHBORS_SORT, args.out)


def cmd_coreper(args):
    graph = net.read_graph(args.graph)
    schedule = cs.AnnealSchedule(sweeps=args.sweeps)
    assignment = cs.infer_layers(graph, args.layers, args.seed, args.samples, schedule, chains=args.chains)
    report.emit_table(cs.layer_rows(assignment), report.layer_schema(args.layers), report.STRUCTURE_SORT, args.out)


def cmd_centrality(args):
    graph = net.read_graph(args.graph)
    deg = cs.degree_centrality(graph)
    btw = cs.betweenness_centrality(graph)
    eig = cs.eigenvector_centrality(graph, args.tolerance, args.max_iters)
    rows = [{"node": n, "degree": deg[n], "betweenness": btw[n], "eigenvector": eig.get(n)} for n in graph.nodes]
    _print_table(rows, report.CENTRALITY, report.CENTRALITY_SORT, args.out)


def cmd_reader_corr(args):
    scores = cs.read_scores(args.scores, args.score_column)
    corpus = read_corpus(args.corpus)
    reader_sets = corpus.reader_items([args.kind])
    readers = tuple(r.strip() for r in args.readers.split(",") if r.strip())
    combos = [cs.ReaderCombo((r,), "or") for r in readers]
    if len(readers) > 1:
        combos.append(cs.ReaderCombo(readers, args.mode))
    rows = [{"combination": res.label, "mode": res.mode, "score": args.score_column, "n_read": res.n_read,
             "rho": res.rho, "p_value": res.p_value}
            for res in cs.reader_structure_correlation(scores, reader_sets, combos)]
    _print_table(rows, report.READER_CORR, (), args.out)


def cmd_members(args):
    corpus = read_corpus(args.corpus)
    profiles = mem.member_profiles(corpus, pop.read_rank_table(args.ranks), args.min_events)
    _print_table([dataclasses.asdict(p) for p in profiles], report.MEMBERS, report.MEMBERS_SORT, args.out)


def cmd_proximity(args):
    corpus = read_corpus(args.corpus)
    items = None
    if args.items:
        items = [line.strip() for line in Path(args.items).read_text(encoding="utf-8").splitlines() if line.strip()]
    hits = mem.borrow_proximity(corpus, items, args.window)
    _print_table([dataclasses.asdict(h) for h in hits], report.PROXIMITY, report.PROXIMITY_SORT, args.out)


def cmd_run(args):
    result = run_pipeline(load_config(args.config), record_timings=args.timings)
    print(f"wrote {len(result.tables)} tables and manifest.json to {result.out_dir}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coread", description=__doc__.splitlines()[0],
                                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="log stage progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    s = sub.add_parser("ingest", help="validate a corpus and store it", formatter_class=fmt)
    s.add_argument("--events", required=True)
    s.add_argument("--items", required=True)
    s.add_argument("--readers", required=True)
    s.add_argument("--label", required=True)
    s.add_argument("--out", required=True, help="corpus file to write")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("match", help="link items of corpus A to corpus B", formatter_class=fmt)
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--min-score", type=float, default=DEFAULT_MIN_SCORE, help="minimum Jaccard score for fuzzy candidates")
    s.add_argument("--overrides", help="CSV of manual a_item_id,b_item_id pairs")
    s.add_argument("--out", required=True)
    s.add_argument("--queue", help="review queue CSV")
    s.set_defaults(func=cmd_match)

    s = sub.add_parser("popularity", help="counts, scaled ranks and rank change", formatter_class=fmt)
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--match", required=True)
    s.add_argument("--kind-a", default="borrow", help="corpus-A event kind to count")
    s.add_argument("--kind-b", default="review", help="corpus-B event kind to count")
    s.add_argument("--by", choices=("item", "author"), default="item", help="rank items or aggregate by author")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_popularity)

    s = sub.add_parser("drift", help="items that rose and fell most in rank", formatter_class=fmt)
    s.add_argument("--ranks", required=True)
    s.add_argument("--top", type=int, default=10, help="items listed per direction")
    s.add_argument("--out")
    s.set_defaults(func=cmd_drift)

    s = sub.add_parser("collections", help="mean rank change per list/shelf", formatter_class=fmt)
    s.add_argument("--assignments", required=True)
    s.add_argument("--ranks", required=True)
    s.add_argument("--min-assigners", type=int, default=coll.DEFAULT_MIN_ASSIGNERS,
                   help="users who must assign an item before it counts toward a collection")
    s.add_argument("--min-books", type=int, default=coll.DEFAULT_MIN_BOOKS,
                   help="qualifying items a collection needs to be reported")
    s.add_argument("--item-ids", choices=("a", "b"), default="b", help="corpus side of assignment item ids")
    s.add_argument("--out")
    s.set_defaults(func=cmd_collections)

    s = sub.add_parser("network", help="co-readership edge list over matched items", formatter_class=fmt)
    s.add_argument("--corpus", required=True)
    s.add_argument("--match", required=True)
    s.add_argument("--side", choices=("a", "b"), default="a", help="which side of the match table the corpus is")
    s.add_argument("--kinds", help="comma-separated event kinds (default: all)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_network)

    s = sub.add_parser("divergence", help="per-item Jensen-Shannon divergence between two graphs", formatter_class=fmt)
    s.add_argument("--ga", required=True)
    s.add_argument("--gb", required=True)
    s.add_argument("--smoothing", type=float, default=net.DEFAULT_SMOOTHING, help="constant added to every vector entry")
    s.add_argument("--ranks", help="rank table supplying count_a/count_b for the popularity filter")
    s.add_argument("--min-a", type=int, default=net.DEFAULT_MIN_A, help="minimum corpus-A interactions")
    s.add_argument("--min-b", type=int, default=net.DEFAULT_MIN_B, help="minimum corpus-B interactions")
    s.add_argument("--out")
    s.set_defaults(func=cmd_divergence)

    s = sub.add_parser("neighbors", help="an item's heaviest co-read neighbors", formatter_class=fmt)
    s.add_argument("--graph", required=True)
    s.add_argument("--item", required=True)
    s.add_argument("--k", type=int, default=5, help="neighbors to list")
    s.add_argument("--out")
    s.set_defaults(func=cmd_neighbors)

    s = sub.add_parser("coreper", help="nested core-periphery layers and coreness", formatter_class=fmt)
    s.add_argument("--graph", required=True)
    s.add_argument("--layers", type=int, default=cs.DEFAULT_LAYERS, help="number of nested layers")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--samples", type=int, default=cs.DEFAULT_SAMPLES, help="retained posterior samples")
    s.add_argument("--sweeps", type=int, default=cs.DEFAULT_SWEEPS, help="total sweeps, first half annealed burn-in")
    s.add_argument("--chains", type=int, default=1, help="independent chains pooled, seeded seed, seed+1, ...")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_coreper)

    s = sub.add_parser("centrality", help="degree, betweenness and eigenvector centrality", formatter_class=fmt)
    s.add_argument("--graph", required=True)
    s.add_argument("--tolerance", type=float, default=1e-10, help="power-iteration convergence threshold")
    s.add_argument("--max-iters", type=int, default=10_000, help="power-iteration cap before giving up")
    s.add_argument("--out")
    s.set_defaults(func=cmd_centrality)

    s = sub.add_parser("reader-corr", help="Spearman rho between scores and readers' read indicators", formatter_class=fmt)
    s.add_argument("--scores", required=True, help="CSV with node and score columns")
    s.add_argument("--score-column", default="coreness", help="column of --scores to correlate")
    s.add_argument("--corpus", required=True)
    s.add_argument("--readers", required=True, help="comma-separated reader ids")
    s.add_argument("--mode", choices=("or", "and"), default="or", help="how the combined indicator joins readers")
    s.add_argument("--kind", default="borrow", help="event kind defining what a reader read")
    s.add_argument("--out")
    s.set_defaults(func=cmd_reader_corr)

    s = sub.add_parser("members", help="per-reader profiles and mean rank change", formatter_class=fmt)
    s.add_argument("--corpus", required=True)
    s.add_argument("--ranks", required=True)
    s.add_argument("--min-events", type=int, default=mem.DEFAULT_MIN_EVENTS, help="minimum borrow events per reader")
    s.add_argument("--out")
    s.set_defaults(func=cmd_members)

    s = sub.add_parser("proximity", help="readers borrowing the same item within a window", formatter_class=fmt)
    s.add_argument("--corpus", required=True)
    s.add_argument("--window", type=int, default=mem.DEFAULT_WINDOW_DAYS, help="maximum day gap, inclusive")
    s.add_argument("--items", help="file with one item id per line")
    s.add_argument("--out")
    s.set_defaults(func=cmd_proximity)

    s = sub.add_parser("run", help="run the whole pipeline from a TOML config", formatter_class=fmt)
    s.add_argument("--config", required=True)
    s.add_argument("--timings", action="store_true", help="record stage timings in the manifest (breaks byte-identity)")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CoreadError as exc:
        print(f"coread: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"coread: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

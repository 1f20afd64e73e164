"""Command-line front end: ``expando <subcommand> ...``.

Failures print one line, ``error: <kind>: <message>``, to stderr and exit
non-zero (2 for usage errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .bench import measure_latency, retrieve_all, sweep_num_queries, write_sweep_tsv
from .config import PRESETS, Config, ConfigError, load_config, load_preset
from .decoding import ModelGenerator, read_model, read_pairs, train_count_model, write_model
from .evaluation import (
    expansion_stats,
    map_metric,
    mrr_at_k,
    read_external_scores,
    read_qrels,
    read_run,
    recall_at_k,
    rerank_merge,
    write_run,
)
from .expansion import (
    CopyGenerator,
    ExpansionRecord,
    ExpansionSummary,
    FileBackedGenerator,
    apply_expansions,
    filter_expansion,
    generate_queries,
    read_expansions,
    write_expansions,
)
from .experiments import compare_presets, expansion_ablation, write_report_tsv
from .index import build_index, read_corpus, read_index, write_index
from .retrieval import read_queries
from .text import default_stopwords, load_stopwords

log = logging.getLogger("expando")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # single-line usage errors
        raise UsageError(message)


# -- shared option groups ------------------------------------------------------------


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file; flags override it")
    p.add_argument("--seed", type=int)


def _add_bm25(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--depth", type=int, help="ranked list depth (default 1000)")


def _add_rm3(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--rm3", action="store_const", const=True, default=None)
    p.add_argument("--fb-docs", type=int)
    p.add_argument("--fb-terms", type=int)
    p.add_argument("--orig-weight", type=float)


def _add_decode(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--topk", type=int, metavar="K", help="top-k random sampling (default, K=10)")
    g.add_argument("--beam", action="store_true", help="beam search with beam = --num-queries")
    p.add_argument("--max-len", type=int)


def _config(args: argparse.Namespace) -> Config:
    cfg = load_config(getattr(args, "config", None))
    preset = getattr(args, "preset", None)
    if preset:
        cfg = load_preset(preset, cfg)
    overrides = {}
    for key in ("seed", "k1", "b", "depth", "rm3", "fb_docs", "fb_terms", "orig_weight",
                "num_queries", "max_len", "mix", "alpha", "stopwords"):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    if getattr(args, "beam", False):
        overrides["method"] = "beam"
    elif getattr(args, "topk", None) is not None:
        overrides["method"] = "topk"
        overrides["topk"] = args.topk
    return cfg.override(overrides)


def _stops(cfg: Config):
    return load_stopwords(cfg.stopwords) if cfg.stopwords else default_stopwords()


def _echo(cfg: Config, out: str | Path) -> None:
    parent = Path(out).resolve().parent
    parent.mkdir(parents=True, exist_ok=True)
    cfg.echo(parent)


def _check_file(path: str) -> str:
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _check_corpus_records(corpus_ids: set[str], records) -> None:
    for ext_id in records:
        if ext_id not in corpus_ids:
            raise KeyError(f"expansion record references unknown document {ext_id!r}")


# -- subcommands ------------------------------------------------------------------------


def cmd_index(args) -> int:
    cfg = _config(args)
    docs = read_corpus(_check_file(args.corpus))
    summary = ExpansionSummary()
    if args.expansions:
        records = read_expansions(_check_file(args.expansions))
        if args.filter != "all":
            docs = list(docs)
            texts = {d.ext_id: d.text for d in docs}
            stops = _stops(cfg)
            records = {e: filter_expansion(r, texts.get(e, ""), stops, args.filter) for e, r in records.items()}
        docs = apply_expansions(docs, records, summary, n=cfg.num_queries)
    index = build_index(docs)
    _echo(cfg, args.out)
    write_index(index, args.out)
    if args.summary:
        payload = json.dumps({
            "n_docs": index.n_docs,
            "n_terms": len(index.vocabulary),
            "avg_doclen": index.avg_doclen,
            "expansion": json.loads(summary.to_json()),
        }, sort_keys=True)
        _emit(payload, args.summary)
    return 0


def cmd_expand(args) -> int:
    cfg = _config(args)
    docs = list(read_corpus(_check_file(args.corpus)))
    stops = _stops(cfg)
    if args.expansions:
        records = read_expansions(_check_file(args.expansions))
        _check_corpus_records({d.ext_id for d in docs}, records)
        gen = FileBackedGenerator(records)
    else:
        gen = CopyGenerator(stops)
    summary = ExpansionSummary()
    out = [
        filter_expansion(ExpansionRecord(doc.ext_id, queries), doc.text, stops, args.filter)
        for doc, queries in generate_queries(docs, gen, cfg.num_queries, cfg.seed, summary)
    ]
    _echo(cfg, args.out)
    write_expansions(out, args.out)
    if args.summary:
        _emit(summary.to_json(), args.summary)
    return 0


def cmd_generate(args) -> int:
    cfg = _config(args)
    model = read_model(_check_file(args.model))
    gen = ModelGenerator(model, cfg.decode)
    records = []
    for doc in read_corpus(_check_file(args.corpus)):
        records.append(ExpansionRecord(doc.ext_id, gen.generate(doc.text, cfg.num_queries, cfg.seed, doc.ext_id)))
    _echo(cfg, args.out)
    write_expansions(records, args.out)
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    model = train_count_model(read_pairs(_check_file(args.pairs)), mix=cfg.mix, alpha=cfg.alpha)
    _echo(cfg, args.out)
    write_model(model, args.out)
    return 0


def cmd_search(args) -> int:
    cfg = _config(args)
    index = read_index(_check_file(args.index))
    queries = read_queries(_check_file(args.queries))
    run = retrieve_all(index, queries, cfg.depth, cfg.bm25, cfg.rm3_params)
    if args.rerank:
        run = rerank_merge(run, read_external_scores(_check_file(args.rerank)), args.rerank_depth)
    _echo(cfg, args.out)
    write_run(run, args.out, tag=args.tag)
    return 0


def cmd_eval(args) -> int:
    run = read_run(_check_file(args.run))
    qrels = read_qrels(_check_file(args.qrels))
    if not qrels:
        raise ValueError(f"{args.qrels}: qrels file has no judgments")
    reports = [mrr_at_k(run, qrels, 10), map_metric(run, qrels, 1000), recall_at_k(run, qrels, 1000)]
    lines = []
    if args.per_query:
        for qid in qrels:
            lines.extend(f"{r.name}\t{qid}\t{r.per_query[qid]:.6f}" for r in reports)
    lines.extend(f"{r.name}\tall\t{r.mean:.6f}" for r in reports)
    _emit("\n".join(lines), args.out)
    return 0


def cmd_analyze(args) -> int:
    cfg = _config(args)
    docs = list(read_corpus(_check_file(args.corpus)))
    records = read_expansions(_check_file(args.expansions))
    stats = expansion_stats(docs, records.values(), _stops(cfg), by_type=args.by_type)
    payload = stats.as_dict()
    payload["warnings"] = stats.warnings
    _emit(json.dumps(payload, sort_keys=True), args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    docs = list(read_corpus(_check_file(args.corpus)))
    queries = read_queries(_check_file(args.queries))
    qrels = read_qrels(_check_file(args.qrels))
    ns = [int(x) for x in args.ns.split(",") if x.strip()]
    if not ns or any(n < 0 for n in ns):
        raise UsageError("--ns needs a comma-separated list of counts >= 0")
    if args.expansions:
        gens = {"file": FileBackedGenerator(read_expansions(_check_file(args.expansions)))}
    elif args.model:
        model = read_model(_check_file(args.model))
        methods = ("beam", "topk") if args.both else (cfg.method,)
        gens = {m: ModelGenerator(model, replace(cfg, method=m).decode) for m in methods}
    else:
        gens = {"copy": CopyGenerator(_stops(cfg))}

    out = Path(args.out)
    _echo(cfg, out)
    series = {}
    for label, gen in gens.items():
        points = sweep_num_queries(docs, gen, queries, qrels, ns, cfg.seed, cfg.depth, cfg.bm25,
                                   keep_runs=bool(args.runs_dir))
        path = out if len(gens) == 1 else out.with_name(f"{out.stem}.{label}{out.suffix}")
        write_sweep_tsv(points, path)
        if args.runs_dir:
            rd = Path(args.runs_dir)
            rd.mkdir(parents=True, exist_ok=True)
            for p in points:
                write_run(p.run, rd / f"{label}.n{p.n_appended}.run")
        series[label] = [(p.n_appended, p.mrr10) for p in points]
    if args.plot:
        from .plotting import plot_sweep
        plot_sweep(series, args.plot)
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args)
    queries = list(read_queries(_check_file(args.queries)).values())
    reports = []
    for spec in args.index:
        path, _, label = spec.partition(":")
        index = read_index(_check_file(path))
        reports.append(measure_latency(index, queries, cfg.depth, args.warmup, args.reps,
                                       cfg.bm25, cfg.rm3_params, label or Path(path).stem))
    payload = {"reports": [json.loads(r.to_json()) for r in reports]}
    if len(reports) > 1 and reports[0].mean_ms > 0:
        payload["ratio"] = reports[-1].mean_ms / reports[0].mean_ms
    _emit(json.dumps(payload, sort_keys=True), args.out)
    if args.plot:
        from .plotting import plot_latency
        plot_latency(reports, args.plot)
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    docs = list(read_corpus(_check_file(args.corpus)))
    records = read_expansions(_check_file(args.expansions))
    queries = read_queries(_check_file(args.queries))
    qrels = read_qrels(_check_file(args.qrels))
    if args.ablation:
        rows = expansion_ablation(docs, records, queries, qrels, _stops(cfg), cfg)
    else:
        rows = compare_presets(docs, records, queries, qrels, cfg)
    _echo(cfg, args.out)
    write_report_tsv(rows, args.out)
    if args.plot:
        from .plotting import plot_conditions
        plot_conditions(rows, args.plot)
    return 0


def cmd_synth(args) -> int:
    from .synthetic import make_benchmark

    bench = make_benchmark(seed=args.seed, n_docs=args.docs, n_queries=args.queries)
    bench.write(args.out_dir)
    return 0


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="expando", description="Document expansion retrieval toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("index", help="build an index from a corpus TSV")
    s.add_argument("--corpus", required=True)
    s.add_argument("--expansions", help="expansion TSV appended before indexing")
    s.add_argument("--num-queries", type=int, help="use at most N predicted queries per document")
    s.add_argument("--filter", choices=("all", "copied_only", "new_only"), default="all")
    s.add_argument("--stopwords")
    s.add_argument("--summary", help="write a JSON summary ('-' for stdout)")
    s.add_argument("--out", required=True)
    _add_config(s)
    s.set_defaults(func=cmd_index)

    s = sub.add_parser("expand", help="write an expansion TSV (file passthrough or copy baseline)")
    s.add_argument("--corpus", required=True)
    s.add_argument("--expansions", help="precomputed predictions; omit for the copy baseline")
    s.add_argument("--num-queries", type=int)
    s.add_argument("--filter", choices=("all", "copied_only", "new_only"), default="all")
    s.add_argument("--stopwords")
    s.add_argument("--summary")
    s.add_argument("--out", required=True)
    _add_config(s)
    s.set_defaults(func=cmd_expand)

    s = sub.add_parser("generate", help="predict queries with a trained count model")
    s.add_argument("--corpus", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--num-queries", type=int)
    s.add_argument("--out", required=True)
    _add_decode(s)
    _add_config(s)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("train-generator", help="fit the count model from query<TAB>doc pairs")
    s.add_argument("--pairs", required=True)
    s.add_argument("--mix", type=float)
    s.add_argument("--alpha", type=float)
    s.add_argument("--out", required=True)
    _add_config(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("search", help="retrieve and write a TREC run")
    s.add_argument("--index", required=True)
    s.add_argument("--queries", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--tag", default="expando")
    s.add_argument("--rerank", help="external scores TSV (qid, doc, score) merged into the run")
    s.add_argument("--rerank-depth", type=int, default=1000)
    _add_bm25(s)
    _add_rm3(s)
    _add_config(s)
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("eval", help="MRR@10, MAP and Recall@1000 of a run")
    s.add_argument("--run", required=True)
    s.add_argument("--qrels", required=True)
    s.add_argument("--per-query", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("analyze", help="stopword / copied / new token fractions")
    s.add_argument("--corpus", required=True)
    s.add_argument("--expansions", required=True)
    s.add_argument("--stopwords")
    s.add_argument("--by-type", action="store_true", help="count distinct tokens per document")
    s.add_argument("--out")
    _add_config(s)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="MRR@10 against number of appended queries")
    s.add_argument("--corpus", required=True)
    s.add_argument("--queries", required=True)
    s.add_argument("--qrels", required=True)
    src = s.add_mutually_exclusive_group()
    src.add_argument("--expansions")
    src.add_argument("--model")
    s.add_argument("--both", action="store_true", help="with --model: sweep beam and top-k")
    s.add_argument("--ns", default="0,1,5,10,20")
    s.add_argument("--runs-dir", help="also write the run of every sweep point")
    s.add_argument("--plot", help="figure path (png/pdf/svg)")
    s.add_argument("--stopwords")
    s.add_argument("--out", required=True)
    _add_bm25(s)
    _add_decode(s)
    _add_config(s)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("bench", help="per-query latency of one or more indexes")
    s.add_argument("--index", action="append", required=True, metavar="PATH[:LABEL]")
    s.add_argument("--queries", required=True)
    s.add_argument("--warmup", type=int, default=1)
    s.add_argument("--reps", type=int, default=3)
    s.add_argument("--plot")
    s.add_argument("--out")
    _add_bm25(s)
    _add_rm3(s)
    _add_config(s)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("compare", help="four-condition report (or the copied/new ablation)")
    s.add_argument("--corpus", required=True)
    s.add_argument("--expansions", required=True)
    s.add_argument("--queries", required=True)
    s.add_argument("--qrels", required=True)
    s.add_argument("--num-queries", type=int)
    s.add_argument("--ablation", action="store_true")
    s.add_argument("--stopwords")
    s.add_argument("--plot")
    s.add_argument("--out", required=True)
    _add_bm25(s)
    s.add_argument("--fb-docs", type=int)
    s.add_argument("--fb-terms", type=int)
    s.add_argument("--orig-weight", type=float)
    _add_config(s)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("synth", help="write the synthetic vocabulary-mismatch benchmark")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--docs", type=int, default=500)
    s.add_argument("--queries", type=int, default=100)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"error: usage: {_one_line(exc)}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ConfigError, KeyError, ValueError, RuntimeError, OSError) as exc:
        kind = type(exc).__name__
        print(f"error: {kind}: {_one_line(exc)}", file=sys.stderr)
        return 1


def _one_line(exc: BaseException) -> str:
    msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
    return " ".join(str(msg).split())


if __name__ == "__main__":
    sys.exit(main())

"""Single command-line entry point for the end-to-end pipeline.

Subcommands cover the batch flow from raw corpus files to retrieval
reports: ``lcs-score``, ``split``, ``pairs``, ``index``, ``search``,
``eval``, ``compare``, ``loss-check``.  All diagnostics go to stderr and
all data to files or stdout; output files are written atomically, so
re-running a command can never leave a half-written artifact.  Exit codes:
0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from lemurkit import corpus, evalkit, lcs, losses, textnorm, vindex
from lemurkit.embedclient import (
    EmbedRequest,
    ProtocolError,
    ProviderError,
    TransportError,
    embed_batch,
    make_provider,
)

DEFAULT_SEED = 0
EMBED_BATCH_SIZE = 64
PROVIDER_ENV = "LEMURKIT_PROVIDER"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract here is exit 1.
    def error(self, message):
        raise UsageError(message)


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(diagnostics) -> None:
    for d in diagnostics:
        print(d, file=sys.stderr)


def _read_jsonl(path: str) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: bad JSON: {exc}") from exc
    return records


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"--ratios needs three comma-separated values, got {text!r}")
    return tuple(float(p) for p in parts)


def _parse_int_list(text: str, flag: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError as exc:
        raise UsageError(f"{flag} needs comma-separated integers, got {text!r}") from exc


def _rules_from(args) -> corpus.BoundaryRules:
    if getattr(args, "rules", None):
        return corpus.BoundaryRules.from_file(args.rules)
    return corpus.BoundaryRules()


def _provider_from(args):
    spec = args.provider or os.environ.get(PROVIDER_ENV, "mock")
    try:
        return make_provider(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _embed_texts(texts: list[str], args) -> list[np.ndarray]:
    provider = _provider_from(args)
    policy = vindex.TruncationPolicy(caps=args.caps)
    vectors: list[np.ndarray] = []
    for start in range(0, len(texts), EMBED_BATCH_SIZE):
        chunk = texts[start : start + EMBED_BATCH_SIZE]
        req = EmbedRequest.new(model=args.model, texts=chunk)
        resp = embed_batch(req, provider, caps=policy)
        vectors.extend(np.asarray(v, dtype=np.float64) for v in resp.vectors)
    if hasattr(provider, "close"):
        provider.close()
    return vectors


# ---------------------------------------------------------------- commands


def _cmd_lcs_score(args) -> int:
    corpus_cache: dict[str, tuple[list[corpus.LegalAct], list[str]]] = {}
    records = _read_jsonl(args.infile)
    out_lines = []
    aggregate_input = []
    for rec in records:
        for key in ("celex_id", "language", "year", "html", "jsonl"):
            if key not in rec:
                raise DataError(f"lcs manifest record missing {key!r}: {rec}")
        with open(rec["html"], "r", encoding="utf-8") as fh:
            html_text = fh.read()
        if rec["jsonl"] not in corpus_cache:
            corpus_cache[rec["jsonl"]] = corpus.load_corpus([rec["jsonl"]])
        acts, diags = corpus_cache[rec["jsonl"]]
        _emit(diags)
        corpus_cache[rec["jsonl"]] = (acts, [])
        match = [
            a
            for a in acts
            if a.celex_id == rec["celex_id"] and a.language == rec["language"].lower()
        ]
        if not match:
            raise DataError(
                f"{rec['jsonl']}: no record for {rec['celex_id']}/{rec['language']}"
            )
        html_bow = lcs.bow_vectorize(textnorm.normalize_text(textnorm.strip_html(html_text)))
        pdf_bow = lcs.bow_vectorize(textnorm.normalize_text(match[0].full_text))
        result = lcs.lcs_score(html_bow, pdf_bow)
        out_lines.append(
            json.dumps(
                {
                    "celex_id": rec["celex_id"],
                    "language": rec["language"].lower(),
                    "year": int(rec["year"]),
                    "score": result.score,
                    "shared_vocab": result.shared_vocab,
                    "empty_side": result.empty_side_flag,
                },
                sort_keys=True,
            )
        )
        aggregate_input.append((rec["language"].lower(), int(rec["year"]), result))
    _atomic_write(args.out, "\n".join(out_lines) + ("\n" if out_lines else ""))
    if args.aggregate:
        agg: dict[str, dict[str, dict]] = {}
        for item in lcs.aggregate_lcs(aggregate_input):
            agg.setdefault(item.language, {})[str(item.year_bin)] = {
                "mean": item.mean_score,
                "count": item.count,
            }
        _atomic_write(args.aggregate, json.dumps(agg, sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_split(args) -> int:
    acts, diags = corpus.load_corpus([args.infile])
    _emit(diags)
    if not acts:
        raise DataError(f"{args.infile}: no valid acts")
    manifest = corpus.assign_splits(
        sorted({a.celex_id for a in acts}), ratios=args.ratios, seed=args.seed
    )
    rules = _rules_from(args)
    lines = []
    for act in acts:
        try:
            pair = corpus.split_metadata(
                act, rules, split=manifest.assignment[act.celex_id]
            )
        except corpus.CorpusError as exc:
            print(str(exc), file=sys.stderr)
            continue
        lines.append(json.dumps(corpus.pair_to_json(pair), sort_keys=True))
    _atomic_write(args.out, "\n".join(lines) + ("\n" if lines else ""))
    _atomic_write(args.manifest, manifest.to_json())
    return 0


def _cmd_pairs(args) -> int:
    acts, diags = corpus.load_corpus([args.infile])
    _emit(diags)
    manifest = corpus.SplitManifest.load(args.manifest)
    rules = _rules_from(args)
    if args.mode == "mono":
        if not args.lang:
            raise UsageError("--lang is required for --mode mono")
        items, build_diags = corpus.build_pairs(
            acts, manifest, "mono", args.lang, rules, split_filter=args.split
        )
        lines = [json.dumps(corpus.pair_to_json(p), sort_keys=True) for p in items]
    else:
        if not args.langs:
            raise UsageError("--langs is required for --mode bilingual")
        langs = args.langs.split(",")
        if len(langs) != 2:
            raise UsageError(f"--langs needs two comma-separated codes, got {args.langs!r}")
        items, build_diags = corpus.build_pairs(
            acts, manifest, "bilingual", langs, rules, split_filter=args.split
        )
        lines = [json.dumps(corpus.group_to_json(g), sort_keys=True) for g in items]
    _emit(build_diags)
    _atomic_write(args.out, "\n".join(lines) + ("\n" if lines else ""))
    return 0


def _load_pairs_file(path: str) -> list[corpus.QueryDocPair]:
    try:
        return [corpus.pair_from_json(rec) for rec in _read_jsonl(path)]
    except (KeyError, corpus.CorpusError) as exc:
        raise DataError(f"{path}: bad pairs record: {exc}") from exc


def _cmd_index(args) -> int:
    pairs = _load_pairs_file(args.infile)
    if args.lang:
        pairs = [p for p in pairs if p.language == args.lang.lower()]
    if args.split != "all":
        pairs = [p for p in pairs if p.split == args.split]
    if not pairs:
        raise DataError("no documents to index after filtering")
    texts = [getattr(p, args.field) for p in pairs]
    policy = vindex.TruncationPolicy(caps=args.caps)
    truncated, stats = vindex.truncate_many(texts, policy, args.limit)
    print(
        f"truncation: {stats.docs_truncated}/{stats.docs_total} docs truncated, "
        f"mean removed fraction {stats.mean_removed_fraction:.3f}",
        file=sys.stderr,
    )
    if args.stats:
        _atomic_write(
            args.stats,
            json.dumps(
                {
                    "docs_total": stats.docs_total,
                    "docs_truncated": stats.docs_truncated,
                    "mean_removed_fraction": stats.mean_removed_fraction,
                },
                sort_keys=True,
                indent=2,
            )
            + "\n",
        )
    vectors = _embed_texts([t for t, _ in truncated], args)
    index = vindex.build_index(list(zip((p.act_id for p in pairs), vectors)))
    index.save(args.out)
    print(f"indexed {len(index)} documents (dim {index.dim})", file=sys.stderr)
    return 0


def _cmd_search(args) -> int:
    index = vindex.VectorIndex.load(args.index)
    text = args.text if args.text is not None else sys.stdin.read()
    if not text.strip():
        raise DataError("empty query text")
    vector = _embed_texts([text], args)[0]
    result = vindex.search(index, vector, k=args.k)
    payload = {"hits": [{"doc_id": d, "score": s} for d, s in result.hits]}
    out = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        _atomic_write(args.out, out + "\n")
    else:
        print(out)
    return 0


def _cmd_eval(args) -> int:
    pairs = _load_pairs_file(args.queries)
    index = vindex.VectorIndex.load(args.index)
    if args.query_split != "all":
        query_pairs = [p for p in pairs if p.split == args.query_split]
    else:
        query_pairs = pairs
    if not query_pairs:
        raise DataError(f"no queries with split {args.query_split!r}")
    if args.setting == "test_only":
        test_ids = {p.act_id for p in pairs if p.split == "test"}
        if not test_ids:
            raise DataError("test_only setting needs pairs labeled 'test'")
        index = index.subset(test_ids)
        if not len(index):
            raise DataError("no test documents present in the index")
    config = evalkit.EvalConfig(setting=args.setting, ks=args.k)
    vectors = _embed_texts([p.query for p in query_pairs], args)
    queries = [
        (f"{p.act_id}/{p.language}", v, p.act_id)
        for p, v in zip(query_pairs, vectors)
    ]
    report, diags = evalkit.evaluate(queries, index, config)
    _emit(diags)
    if args.out:
        _atomic_write(args.out, report.to_json())
    else:
        print(report.to_json(), end="")
    if args.markdown:
        print(evalkit.report_to_markdown(report))
    return 0


def _cmd_compare(args) -> int:
    with open(args.base, "r", encoding="utf-8") as fh:
        base = evalkit.EvalReport.from_json_dict(json.load(fh))
    with open(args.tuned, "r", encoding="utf-8") as fh:
        tuned = evalkit.EvalReport.from_json_dict(json.load(fh))
    try:
        cmp_report = evalkit.compare(base, tuned)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if args.out:
        _atomic_write(args.out, cmp_report.to_json())
    else:
        print(cmp_report.to_json(), end="")
    if args.markdown:
        print(evalkit.compare_to_markdown(cmp_report))
    return 0


def _cmd_loss_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    temperatures = [args.temperature] if args.temperature else [0.05, 0.2, 1.0]
    max_rel_error = 0.0
    max_reduction_gap = 0.0
    failures = 0
    for case in range(args.cases):
        b = int(rng.integers(1, 9))
        d = int(rng.integers(2, 17))
        t = temperatures[case % len(temperatures)]
        q = rng.standard_normal((b, d))
        dmat = rng.standard_normal((b, d))

        plain = losses.LossBatch(Q=q, D=dmat, temperature=t)
        err = losses.finite_diff_check(plain)

        groups = [
            frozenset({i} | set(rng.choice(b, size=int(rng.integers(0, b)), replace=False).tolist()))
            for i in range(b)
        ]
        grouped = losses.LossBatch(Q=q, D=dmat, temperature=t, groups=groups)
        err = max(err, losses.finite_diff_check(grouped))

        singleton = losses.LossBatch(
            Q=q, D=dmat, temperature=t, groups=[frozenset({i}) for i in range(b)]
        )
        gap = abs(
            losses.grouped_mnr_loss(singleton).value - losses.mnr_loss(plain).value
        )
        max_rel_error = max(max_rel_error, err)
        max_reduction_gap = max(max_reduction_gap, gap)
        if err >= 1e-4 or gap > 1e-12:
            failures += 1
    summary = {
        "cases": args.cases,
        "max_rel_error": max_rel_error,
        "max_reduction_gap": max_reduction_gap,
        "failures": failures,
    }
    out = json.dumps(summary, sort_keys=True, indent=2)
    if args.out:
        _atomic_write(args.out, out + "\n")
    else:
        print(out)
    return 0 if failures == 0 else 2


# ------------------------------------------------------------------ parser


def build_parser() -> _Parser:
    parser = _Parser(
        prog="lemurkit",
        description="Corpus preparation, fidelity scoring, loss checking, "
        "and retrieval evaluation for multilingual legal documents.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add_provider_flags(p):
        p.add_argument(
            "--provider",
            default=None,
            help=f"'mock' or 'socket:<addr>' (default: ${PROVIDER_ENV} or 'mock')",
        )
        p.add_argument(
            "--model",
            default="mock:64:0",
            help="model name sent to the provider; mock models are mock:<dim>:<seed>",
        )
        p.add_argument(
            "--caps",
            type=lambda s: _parse_int_list(s, "--caps"),
            default=(2048, 1024, 512),
            help="decreasing token caps for truncation fallback (default 2048,1024,512)",
        )

    p = sub.add_parser(
        "lcs-score",
        help="score converted text against reference HTML",
        description="Read a manifest JSONL pairing HTML files with corpus JSONL "
        "files ({'celex_id','language','year','html','jsonl'} per line), write "
        "one score record per document and an optional aggregate report keyed "
        "by language and 5-year bin.",
    )
    p.add_argument("--in", dest="infile", required=True, help="manifest JSONL path")
    p.add_argument("--out", required=True, help="output scores JSONL path")
    p.add_argument("--aggregate", help="optional aggregate report JSON path")
    p.set_defaults(func=_cmd_lcs_score)

    p = sub.add_parser(
        "split",
        help="split acts into query/document pairs and assign splits",
        description="Read corpus JSONL ({'celex_id','language','year','pages'} "
        "per line), cut each act into metadata query and body document, assign "
        "deterministic train/val/test splits by act id, and write labeled pairs "
        "JSONL plus the split manifest JSON.",
    )
    p.add_argument("--in", dest="infile", required=True, help="corpus JSONL path")
    p.add_argument("--out", required=True, help="output pairs JSONL path")
    p.add_argument("--manifest", required=True, help="output split manifest JSON path")
    p.add_argument(
        "--ratios",
        type=_parse_ratios,
        default=corpus.DEFAULT_RATIOS,
        help="train,val,test ratios summing to 1 (default 0.6,0.2,0.2)",
    )
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="assignment seed")
    p.add_argument("--rules", help="optional boundary rules JSON file")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser(
        "pairs",
        help="build monolingual pairs or bilingual multi-positive groups",
        description="Read corpus JSONL plus a split manifest and emit either "
        "mono pairs ({'act_id','language','split','query','document'}) or "
        "bilingual groups ({'act_id','query_language','query','positives'}).",
    )
    p.add_argument("--in", dest="infile", required=True, help="corpus JSONL path")
    p.add_argument("--manifest", required=True, help="split manifest JSON path")
    p.add_argument("--mode", choices=("mono", "bilingual"), required=True)
    p.add_argument("--lang", help="language for mono mode")
    p.add_argument("--langs", help="two comma-separated languages for bilingual mode")
    p.add_argument("--split", choices=corpus.SPLIT_LABELS, help="keep only this split")
    p.add_argument("--rules", help="optional boundary rules JSON file")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=_cmd_pairs)

    p = sub.add_parser(
        "index",
        help="embed documents and build a vector index",
        description="Read pairs JSONL, truncate documents to the largest cap "
        "within --limit, embed them with the chosen provider, and save an "
        "index file (meta line plus one vector line per document).",
    )
    p.add_argument("--in", dest="infile", required=True, help="pairs JSONL path")
    p.add_argument("--out", required=True, help="output index path")
    p.add_argument("--lang", help="keep only this language")
    p.add_argument(
        "--split",
        choices=corpus.SPLIT_LABELS + ("all",),
        default="all",
        help="keep only this split (default all)",
    )
    p.add_argument(
        "--field",
        choices=("document", "query"),
        default="document",
        help="which side of the pair to embed (default document)",
    )
    p.add_argument(
        "--limit",
        type=int,
        default=2048,
        help="provider max tokens; the largest cap <= limit is applied",
    )
    p.add_argument("--stats", help="optional truncation stats JSON path")
    add_provider_flags(p)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser(
        "search",
        help="embed one query and print the top-k matches",
        description="Embed --text (or stdin) and print the exact cosine top-k "
        "hits from an index as JSON.",
    )
    p.add_argument("--index", required=True, help="index file path")
    p.add_argument("--text", help="query text (default: read stdin)")
    p.add_argument("--k", type=int, default=5, help="number of hits (default 5)")
    p.add_argument("--out", help="write hits JSON here instead of stdout")
    add_provider_flags(p)
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser(
        "eval",
        help="rank ground-truth documents and compute Acc@k",
        description="Embed query texts from a labeled pairs JSONL, rank each "
        "query's own document in the collection, and write the Acc@k report. "
        "Setting 'full' searches the whole index; 'test_only' restricts the "
        "collection to test-split documents.",
    )
    p.add_argument("--queries", required=True, help="labeled pairs JSONL path")
    p.add_argument("--index", required=True, help="index file path")
    p.add_argument(
        "--setting", choices=evalkit.SETTINGS, default="full", help="collection setting"
    )
    p.add_argument(
        "--query-split",
        choices=corpus.SPLIT_LABELS + ("all",),
        default="test",
        help="which queries to evaluate (default test)",
    )
    p.add_argument(
        "--k",
        type=lambda s: _parse_int_list(s, "--k"),
        default=evalkit.DEFAULT_KS,
        help="accuracy cutoffs (default 1,3,5)",
    )
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.add_argument("--markdown", action="store_true", help="also print a table")
    add_provider_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser(
        "compare",
        help="diff two evaluation reports",
        description="Per-k accuracy deltas and relative gains between a base "
        "report and a tuned report with identical settings.",
    )
    p.add_argument("--base", required=True, help="base report JSON")
    p.add_argument("--tuned", required=True, help="tuned report JSON")
    p.add_argument("--out", help="delta report JSON path (default: stdout)")
    p.add_argument("--markdown", action="store_true", help="also print a table")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser(
        "loss-check",
        help="run the randomized gradient and reduction suites",
        description="Verify analytic loss gradients against central finite "
        "differences and the singleton-group reduction on random batches; "
        "print a JSON summary. Exits 2 if any case fails.",
    )
    p.add_argument("--cases", type=int, default=100, help="number of random batches")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument(
        "--temperature",
        type=float,
        default=None,
        help="fixed temperature (default: cycle 0.05, 0.2, 1.0)",
    )
    p.add_argument("--out", help="summary JSON path (default: stdout)")
    p.set_defaults(func=_cmd_loss_check)

    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return 1
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (
        DataError,
        corpus.CorpusError,
        ProviderError,
        ProtocolError,
        TransportError,
        ValueError,
        OSError,
        KeyError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

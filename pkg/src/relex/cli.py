"""Command-line entry point.

Stages communicate only through documented files; every output is
written atomically (temp file + rename). Exit codes: 0 success, 1 usage
error, 2 data error (with file/line when known), 3 convergence error.
The RELEX_LOG environment variable sets log verbosity.

Seeds are explicit arguments everywhere randomness exists, never
wall-clock defaults, so reruns with identical inputs reproduce identical
outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from relex import __version__
from relex.classifiers import (
    TrainConfig,
    load_model,
    read_features_jsonl,
    train_maxent,
    train_ngram_linear,
)
from relex.conllu import read_corpus, sentence_index
from relex.errors import ConvergenceError, DataError, NoMainEntityError, RelexError
from relex.evaluation import (
    evaluate,
    matrix_tasks,
    matrix_to_json,
    parse_plan,
    run_matrix_cell,
    write_matrix_tsv,
    write_timings_tsv,
)
from relex.fact_index import BloomFilter, build_bloom
from relex.features import (
    MODE_FULL_SENTENCE,
    MODE_PATH,
    MODE_XY_ONLY,
    BrownClusters,
    FeatureConfig,
    canonical_surfaces,
    group_supports,
    write_features_jsonl,
)
from relex.gazetteer import build_page_gazetteer
from relex.kb_store import KnowledgeBase, load_denotations, load_kb
from relex.resolver import (
    POSITIVE,
    annotate_page,
    read_pairs_jsonl,
    sample_negatives,
    write_pairs_jsonl,
)

logger = logging.getLogger("relex")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CONVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for data errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _atomic_write(path: str, write_fn, mode: str = "w") -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, mode, encoding=None if "b" in mode else "utf-8") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _add_kb_args(p: argparse.ArgumentParser, *, url_map: bool = True) -> None:
    p.add_argument("--triples", required=True, help="triples TSV (subject, relation, object)")
    p.add_argument("--denotations", required=True, help="denotations TSV (entity, surface)")
    p.add_argument("--signatures", required=True, help="signatures TSV (relation, left, right, is_literal)")
    if url_map:
        p.add_argument("--url-map", required=True, help="page url -> main entity TSV")
    p.add_argument("--instance-of", default="instance_of", help="relation id for class membership")
    p.add_argument("--subclass-of", default="subclass_of", help="relation id for class hierarchy")


def _load_kb_from_args(args) -> KnowledgeBase:
    kb, report = load_kb(
        args.triples,
        args.denotations,
        args.signatures,
        getattr(args, "url_map", None),
        instance_of_relation=args.instance_of,
        subclass_of_relation=args.subclass_of,
    )
    if report.total_malformed():
        logger.warning("KB load: %d malformed lines\n%s", report.total_malformed(), report.summary())
    return kb


def cmd_load_check(args) -> int:
    kb, report = load_kb(
        args.triples,
        args.denotations,
        args.signatures,
        args.url_map,
        instance_of_relation=args.instance_of,
        subclass_of_relation=args.subclass_of,
    )
    print(report.summary())
    print(
        f"kb: {kb.num_facts} facts, {len(kb.denotations)} entities with denotations, "
        f"{len(kb.signatures)} signatures, {len(kb.literal_relations)} literal relations, "
        f"{len(kb.main_entity_by_url)} pages"
    )
    return EXIT_OK


def cmd_build_bloom(args) -> int:
    from relex.kb_store import Fact, LoadReport, _tsv_rows

    report = LoadReport()
    facts = [Fact(*cols) for _, cols in _tsv_rows(args.triples, 3, report, "triples")]
    if report.total_malformed():
        logger.warning("bloom build: %d malformed triple lines skipped", report.total_malformed())
    bloom = build_bloom(facts, args.fpr, seed=args.seed)
    tmp = f"{args.out}.tmp.{os.getpid()}"
    bloom.save(tmp)
    os.replace(tmp, args.out)
    print(f"bloom: n={bloom.n} m={bloom.m} k={bloom.k} -> {args.out}")
    return EXIT_OK


_WORKER: dict = {}


def _init_annotate_worker(kb: KnowledgeBase, relation: str, bloom_path: str | None, hops: int):
    _WORKER["kb"] = kb
    _WORKER["relation"] = relation
    _WORKER["bloom"] = BloomFilter.load(bloom_path) if bloom_path else None
    _WORKER["hops"] = hops


def _annotate_one(task):
    url, sentences = task
    kb = _WORKER["kb"]
    try:
        gazetteer, _ = build_page_gazetteer(kb, url, hops=_WORKER["hops"])
    except NoMainEntityError:
        return url, None
    return url, annotate_page(sentences, gazetteer, _WORKER["relation"], kb, _WORKER["bloom"])


def cmd_annotate(args) -> int:
    kb = _load_kb_from_args(args)
    corpus = read_corpus(args.corpus)
    tasks = sorted(corpus.items())

    all_pairs = []
    skipped = 0
    if args.jobs > 1:
        with ProcessPoolExecutor(
            max_workers=args.jobs,
            initializer=_init_annotate_worker,
            initargs=(kb, args.relation, args.bloom, args.hops),
        ) as pool:
            results = list(pool.map(_annotate_one, tasks, chunksize=8))
    else:
        _init_annotate_worker(kb, args.relation, args.bloom, args.hops)
        results = [_annotate_one(t) for t in tasks]
    for url, pairs in results:
        if pairs is None:
            skipped += 1
            logger.warning("skipping %s: no main entity", url)
            continue
        all_pairs.extend(pairs)

    all_pairs.sort(key=lambda p: (p.doc_url, p.sent_id, p.x_span, p.y_span, p.x, p.y))
    sampled = sample_negatives(all_pairs, args.ratio, args.seed)
    _atomic_write(args.out, lambda fh: write_pairs_jsonl(sampled, fh))
    positives = sum(1 for p in sampled if p.label == POSITIVE)
    print(
        f"annotate: {len(tasks) - skipped} pages ({skipped} skipped), "
        f"{len(sampled)} labeled pairs ({positives} positive) -> {args.out}"
    )
    return EXIT_OK


def _feature_config(args) -> FeatureConfig:
    mode = MODE_PATH
    if args.xy_only:
        mode = MODE_XY_ONLY
    if args.full_sentence:
        mode = MODE_FULL_SENTENCE
    return FeatureConfig(
        use_brown=not args.no_brown,
        use_lemma=not args.no_lemma,
        use_pos=not args.no_pos,
        use_dep=not args.no_dep,
        use_entities=not args.no_entities,
        use_satellites=not args.no_satellites,
        max_path_len=args.max_path_len,
        min_path_freq=args.min_path_freq,
        top_k_supports=args.top_supports,
        mode=mode,
    )


def cmd_featurize(args) -> int:
    pairs = read_pairs_jsonl(args.pairs)
    corpus = read_corpus(args.corpus)
    sentences = sentence_index(corpus)
    clusters = BrownClusters.load(args.brown)
    surfaces = {}
    if args.denotations:
        kb = KnowledgeBase([], load_denotations(args.denotations))
        surfaces = canonical_surfaces(kb)
    config = _feature_config(args)
    examples = group_supports(
        pairs, sentences, clusters, config, surfaces, grouped=not args.ungrouped
    )
    _atomic_write(args.out, lambda fh: write_features_jsonl(examples, clusters, config, fh))
    print(f"featurize: {len(pairs)} pairs -> {len(examples)} examples -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    examples = read_features_jsonl(args.data)
    if args.model == "ngram":
        cfg = TrainConfig(
            seed=args.seed,
            dim=args.dim,
            bucket_count=args.buckets,
            epochs=args.epochs,
            learning_rate=args.lr,
            ngram_order=args.ngram_order,
        )
        model = train_ngram_linear(examples, cfg)
    else:
        model = train_maxent(examples, args.sigma2, use_counts=args.counts)
    model.save(args.out + ".tmp")
    os.replace(args.out + ".tmp", args.out)
    print(f"train: {args.model} on {len(examples)} examples -> {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    examples = read_features_jsonl(args.data)

    def write(fh):
        for ex in examples:
            prob = model.predict_proba(ex.features)
            fh.write(
                json.dumps(
                    {"x": ex.x, "y": ex.y, "relation": ex.relation, "prob": round(prob, 6)}
                )
                + "\n"
            )

    _atomic_write(args.out, write)
    print(f"predict: {len(examples)} examples -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    examples = read_features_jsonl(args.data)
    try:
        precision, recall, f_score = evaluate(model, examples, args.threshold)
    except ValueError as exc:
        raise DataError(str(exc), path=args.data)
    result = {
        "threshold": args.threshold,
        "precision": round(precision, 6),
        "recall": round(recall, 6),
        "f_score": round(f_score, 6),
        "n_examples": len(examples),
    }
    if args.out:
        _atomic_write(args.out, lambda fh: fh.write(json.dumps(result, indent=2, sort_keys=True) + "\n"))
    print(f"precision={precision:.4f} recall={recall:.4f} f_score={f_score:.4f}")
    return EXIT_OK


def _run_matrix_task(task):
    plan, relation, cell = task
    return run_matrix_cell(plan, relation, cell)


def cmd_experiment(args) -> int:
    plan = parse_plan(args.plan)
    tasks = matrix_tasks(plan)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            chunks = list(pool.map(_run_matrix_task, [(plan, r, c) for r, c in tasks]))
    else:
        chunks = [run_matrix_cell(plan, r, c) for r, c in tasks]
    rows = [row for chunk in chunks for row in chunk]

    os.makedirs(args.out_dir, exist_ok=True)
    tsv_path = os.path.join(args.out_dir, "report.tsv")
    json_path = os.path.join(args.out_dir, "report.json")
    _atomic_write(tsv_path, lambda fh: write_matrix_tsv(rows, fh))
    _atomic_write(json_path, lambda fh: fh.write(matrix_to_json(rows) + "\n"))
    _atomic_write(os.path.join(args.out_dir, "timings.tsv"), lambda fh: write_timings_tsv(rows, fh))
    print(f"experiment: {len(rows)} cells -> {tsv_path}, {json_path}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="relex", description=__doc__.splitlines()[0] if __doc__ else "")
    parser.add_argument("--version", action="version", version=f"relex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("load-check", help="load the KB and report ingestion statistics")
    _add_kb_args(p)
    p.set_defaults(func=cmd_load_check)

    p = sub.add_parser("build-bloom", help="build a serialized fact membership filter")
    p.add_argument("--triples", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fpr", type=float, default=0.001, help="target false positive rate")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_build_bloom)

    p = sub.add_parser("annotate", help="label candidate pairs for one relation")
    _add_kb_args(p)
    p.add_argument("--corpus", required=True, help="directory of CoNLL-U files")
    p.add_argument("--relation", required=True)
    p.add_argument("--bloom", default=None, help="bloom filter file (default: exact lookup)")
    p.add_argument("--ratio", type=float, default=4.0, help="negative:positive group ratio")
    p.add_argument("--hops", type=int, default=1, choices=(1, 2))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("featurize", help="turn labeled pairs into feature token sequences")
    p.add_argument("--pairs", required=True, help="labeled pairs JSONL from annotate")
    p.add_argument("--corpus", required=True, help="directory of CoNLL-U files")
    p.add_argument("--brown", required=True, help="brown clusters TSV")
    p.add_argument("--denotations", default=None, help="denotations TSV for canonical entity surfaces")
    p.add_argument("--out", required=True)
    p.add_argument("--no-brown", action="store_true")
    p.add_argument("--no-lemma", action="store_true")
    p.add_argument("--no-pos", action="store_true")
    p.add_argument("--no-dep", action="store_true", help="drop dependency relation and direction")
    p.add_argument("--no-entities", action="store_true")
    p.add_argument("--no-satellites", action="store_true")
    p.add_argument("--xy-only", action="store_true", help="entity tokens only")
    p.add_argument("--full-sentence", action="store_true", help="lowercased sentence words, no path")
    p.add_argument("--ungrouped", action="store_true", help="one example per support")
    p.add_argument("--max-path-len", type=int, default=5)
    p.add_argument("--min-path-freq", type=int, default=0, help="corpus-wide path frequency filter (classic value 5; 0 = off)")
    p.add_argument("--top-supports", type=int, default=None)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train a classifier on featurized examples")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=("ngram", "maxent"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--buckets", type=int, default=2_000_000)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--ngram-order", type=int, default=4)
    p.add_argument("--sigma2", type=float, default=1.0, help="maxent gaussian prior variance")
    p.add_argument("--counts", action="store_true", help="maxent: token counts instead of presence")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score featurized examples with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="precision/recall/F at a threshold")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", default=None, help="optional JSON report path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a variant grid from a plan file")
    p.add_argument("--plan", required=True, help="key=value plan file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("RELEX_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except DataError as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except ConvergenceError as exc:
        logger.error("%s", exc)
        return EXIT_CONVERGENCE
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except RelexError as exc:
        logger.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

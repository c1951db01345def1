"""Acceptance suite: one test per release criterion, each printing a
pass/fail line. Run with ``pytest tests/test_acceptance.py -v -s``.

Everything here runs from checked-in fixtures and deterministic
generators; no external parser or network is needed.
"""

import io
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest

from relex.classifiers import (
    FeatureExample,
    TrainConfig,
    _design_matrix,
    _objective_factory,
    train_maxent,
    train_ngram_linear,
)
from relex.conllu import read_corpus, sentence_index
from relex.evaluation import (
    ExperimentPlan,
    audit_noise,
    evaluate,
    run_matrix,
    run_trials,
    split_by_pair,
    write_matrix_tsv,
)
from relex.fact_index import build_bloom
from relex.features import FeatureConfig, extract_path, group_supports, grouped_feature_tokens
from relex.gazetteer import build_page_gazetteer
from relex.kb_store import Fact, load_kb
from relex.resolver import POSITIVE, annotate_page, sample_negatives
from relex.synthetic import make_signal_examples, read_truth
from tests.conftest import fisher_sentence_1, fisher_sentence_2, make_sentence
from tests.test_features import GOLDEN, _brute_force_path


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"[acceptance] {name}: FAIL")
        raise
    print(f"[acceptance] {name}: PASS")


@pytest.fixture(scope="module")
def synth(data_dir):
    kb, _ = load_kb(
        str(data_dir / "synth" / "triples.tsv"),
        str(data_dir / "synth" / "denotations.tsv"),
        str(data_dir / "synth" / "signatures.tsv"),
        str(data_dir / "synth" / "urlmap.tsv"),
    )
    corpus = read_corpus(data_dir / "synth")
    truth = read_truth(data_dir / "synth" / "truth.jsonl")
    return kb, corpus, truth


def _annotate_all(kb, corpus, relation):
    pairs = []
    for url in sorted(corpus):
        gazetteer, _ = build_page_gazetteer(kb, url)
        pairs.extend(annotate_page(corpus[url], gazetteer, relation, kb))
    pairs.sort(key=lambda p: (p.doc_url, p.sent_id, p.x_span, p.y_span, p.x, p.y))
    return pairs


def test_bloom_filter_rates():
    """100k inserts at target FPR 0.001: no false negatives, measured FPR
    within [0.0005, 0.0015] over one million absent keys, under 30 s."""
    with criterion("bloom 100k@0.001: zero FN, FPR in [0.0005, 0.0015], <30s"):
        start = time.perf_counter()
        facts = [Fact(f"s{i}", "r", f"o{i}") for i in range(100_000)]
        bloom = build_bloom(facts, 0.001, seed=17)
        assert (bloom.m, bloom.k) == (1_437_759, 10)

        false_negatives = sum(not bloom.contains_fact(f) for f in facts)
        assert false_negatives == 0

        trials = 1_000_000
        hits = sum(bloom.contains_key(b"absent\x1f%d" % i) for i in range(trials))
        elapsed = time.perf_counter() - start
        rate = hits / trials
        assert 0.0005 <= rate <= 0.0015, f"measured FPR {rate}"
        assert elapsed < 30.0, f"took {elapsed:.1f}s"


def test_feature_golden_string(golden_clusters):
    """The two hand-built example parses reproduce the documented feature
    token sequence exactly."""
    with criterion("feature golden string: exact token-for-token match"):
        from relex.resolver import LabeledPair

        s1, s2 = fisher_sentence_1(), fisher_sentence_2()
        url = s1.doc_url
        pairs = [
            LabeledPair("carrie_fisher", "star_wars", "starred_in", POSITIVE, url, "cf1", (4, 4), (11, 12)),
            LabeledPair("carrie_fisher", "star_wars", "starred_in", POSITIVE, url, "cf2", (1, 1), (10, 11)),
        ]
        sentences = {(url, "cf1"): s1, (url, "cf2"): s2}
        surfaces = {"carrie_fisher": "Carrie_Fisher", "star_wars": "Star_Wars"}
        config = FeatureConfig(use_satellites=False)
        examples = group_supports(pairs, sentences, golden_clusters, config, surfaces)
        assert len(examples) == 1
        tokens = grouped_feature_tokens(examples[0], golden_clusters, config)
        assert tokens == GOLDEN
        assert tokens[0] == "Carrie_Fisher/0111"
        assert tokens[-1] == "Star_Wars/0011"


def test_path_extraction_oracle():
    """1,000 random trees of up to 12 tokens: the extracted path equals
    brute-force search between the two heads every time."""
    with criterion("path oracle: 1000/1000 agreement with tree search"):
        rng = random.Random(29)
        agreements = 0
        for _ in range(1000):
            n = rng.randint(2, 12)
            heads = [0] + [rng.randint(1, i) for i in range(1, n)]
            rows = [
                (f"w{i+1}", f"w{i+1}", "N", "dep" if heads[i] else "root", heads[i])
                for i in range(n)
            ]
            sentence = make_sentence(rows)
            x, y = rng.sample(range(1, n + 1), 2)
            path = extract_path(sentence, (x, x), (y, y), max_path_len=100)
            assert [node.index for node in path] == _brute_force_path(heads, x, y)
            agreements += 1
        assert agreements == 1000


def test_noise_direction(synth):
    """Page-specific gazetteers keep labeling noise near zero while the
    global-gazetteer baseline drowns in false positives."""
    with criterion("noise direction: page-specific FP <= 2%, global > 20%"):
        kb, corpus, truth = synth
        page = audit_noise(corpus, kb, "instance_of", truth, page_specific=True)
        baseline = audit_noise(corpus, kb, "instance_of", truth, page_specific=False)
        assert page.positive_labels > 0
        assert page.fp_rate <= 0.02, f"page-specific fp_rate {page.fp_rate}"
        assert baseline.fp_rate > 0.20, f"global fp_rate {baseline.fp_rate}"


def test_negative_ratio_exact(synth):
    """Sampled grouped negatives match min(available, round(4 x positives))
    exactly for every relation; one relation exercises the cap."""
    with criterion("negative sampling: exact 4:1 group ratio per relation"):
        kb, corpus, _ = synth
        observed_cap = False
        for relation in ("instance_of", "author_of"):
            raw = _annotate_all(kb, corpus, relation)
            groups = {}
            for p in raw:
                groups[p.group_key] = POSITIVE if groups.get(p.group_key) == POSITIVE or p.label == POSITIVE else p.label
            positives = sum(1 for v in groups.values() if v == POSITIVE)
            available = len(groups) - positives

            sampled = sample_negatives(raw, 4.0, seed=23)
            kept = {}
            for p in sampled:
                kept[p.group_key] = p.label
            kept_negatives = sum(1 for v in kept.values() if v != POSITIVE)
            kept_positives = len(kept) - kept_negatives

            assert kept_positives == positives
            assert kept_negatives == min(available, round(4 * positives))
            if available < round(4 * positives):
                observed_cap = True
        assert observed_cap, "fixture should exercise the availability cap"


def test_maxent_gradient_and_variance():
    """Analytic gradient vs central differences (<=1e-4 relative), a
    monotone objective trace, and zero variance across three trials."""
    with criterion("maxent: gradient check <=1e-4, monotone objective, std=0"):
        examples = make_signal_examples(n=600, seed=31)
        vocab = {}
        for ex in examples:
            for t in ex.features:
                vocab.setdefault(t, len(vocab))
        X = _design_matrix(examples, vocab, use_counts=False)
        y = np.array([ex.label for ex in examples], dtype=np.float64)
        objective = _objective_factory(X, y, sigma2=1.0)

        rng = np.random.default_rng(37)
        h = 1e-6
        worst = 0.0
        for _ in range(20):
            point = rng.normal(scale=0.5, size=len(vocab) + 1)
            _, grad = objective(point)
            idx = int(rng.integers(len(point)))
            plus, minus = point.copy(), point.copy()
            plus[idx] += h
            minus[idx] -= h
            numeric = (objective(plus)[0] - objective(minus)[0]) / (2 * h)
            worst = max(worst, abs(numeric - grad[idx]) / max(1.0, abs(numeric)))
        assert worst <= 1e-4, f"max relative error {worst:.2e}"

        model = train_maxent(examples, sigma2=1.0)
        trace = model.objective_trace
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))

        train, _, test = split_by_pair(examples, 400, 100, 100, seed=5)
        report = run_trials(train, test, "maxent", relation="located_in", trials=3, seed=41)
        assert report.f_std == 0.0


def test_classifier_sanity():
    """On 5k examples whose label is a pure path-pattern function, the
    hashed-ngram model reaches F >= 0.95 inside 5 epochs and under a
    minute; MaxEnt reaches F >= 0.90."""
    with criterion("classifier sanity: ngram F>=0.95 in <60s, maxent F>=0.90"):
        examples = make_signal_examples(n=5000, seed=43)
        train, _, test = split_by_pair(examples, 3500, 500, 1000, seed=3)

        cfg = TrainConfig(seed=47, dim=100, bucket_count=200_000, epochs=5, learning_rate=0.1, ngram_order=4)
        start = time.perf_counter()
        ngram = train_ngram_linear(train, cfg)
        elapsed = time.perf_counter() - start
        _, _, f_ngram = evaluate(ngram, test, threshold=0.5)
        assert f_ngram >= 0.95, f"ngram F {f_ngram:.4f}"
        assert elapsed < 60.0, f"ngram training took {elapsed:.1f}s"

        maxent = train_maxent(train, sigma2=1.0)
        _, _, f_maxent = evaluate(maxent, test, threshold=0.5)
        assert f_maxent >= 0.90, f"maxent F {f_maxent:.4f}"


def test_grouping_identity(synth, golden_clusters, tmp_path):
    """Single-support pairs: grouped and ungrouped featurization produce
    identical sequences and identical F-scores; multi-support groups
    concatenate their support renderings between the entity brackets."""
    with criterion("grouping identity: single-support grouped == ungrouped"):
        kb, corpus, _ = synth
        from relex.features import canonical_surfaces

        clusters = golden_clusters
        surfaces = canonical_surfaces(kb)
        single_corpus = {url: [s for s in doc if s.sent_id == "s1"] for url, doc in corpus.items()}
        pairs = _annotate_all(kb, single_corpus, "instance_of")
        pairs = sample_negatives(pairs, 4.0, seed=53)
        sentences = sentence_index(single_corpus)

        config = FeatureConfig()
        grouped = group_supports(pairs, sentences, clusters, config, surfaces)
        ungrouped = group_supports(pairs, sentences, clusters, config, surfaces, grouped=False)
        assert len(grouped) == len(ungrouped)
        assert all(len(ex.supports) == 1 for ex in grouped)
        grouped_tokens = [grouped_feature_tokens(ex, clusters, config) for ex in grouped]
        ungrouped_tokens = [grouped_feature_tokens(ex, clusters, config) for ex in ungrouped]
        assert grouped_tokens == ungrouped_tokens

        def featurized(examples):
            return [
                FeatureExample(
                    features=grouped_feature_tokens(ex, clusters, config),
                    label=1 if ex.label == POSITIVE else 0,
                    x=ex.x, y=ex.y, relation=ex.relation,
                )
                for ex in examples
            ]

        cfg = TrainConfig(seed=59, dim=32, bucket_count=16_384, epochs=5)
        f_scores = []
        for examples in (featurized(grouped), featurized(ungrouped)):
            train, _, test = split_by_pair(examples, 600, 100, 300, seed=7)
            model = train_ngram_linear(train, cfg)
            f_scores.append(evaluate(model, test, threshold=0.5)[2])
        assert f_scores[0] == f_scores[1]

        # multi-support structural identity on the full corpus
        full_pairs = sample_negatives(_annotate_all(kb, corpus, "instance_of"), 4.0, seed=53)
        full_sentences = sentence_index(corpus)
        full_grouped = group_supports(full_pairs, full_sentences, clusters, config, surfaces)
        multi = [ex for ex in full_grouped if len(ex.supports) > 1]
        assert multi, "fixture should contain multi-support groups"
        for ex in multi[:20]:
            tokens = grouped_feature_tokens(ex, clusters, config)
            interior = [t for support in ex.supports for t in support.rendered]
            assert tokens == [tokens[0]] + interior + [tokens[-1]]


VARIANT_CONFIGS = {
    "full": dict(top_k_supports=5),
    "no_brown": dict(top_k_supports=5, use_brown=False),
    "no_lemma": dict(top_k_supports=5, use_lemma=False),
    "no_pos": dict(top_k_supports=5, use_pos=False),
    "no_dep": dict(top_k_supports=5, use_dep=False),
    "no_entities": dict(top_k_supports=5, use_entities=False),
    "xy_only": dict(mode="xy_only"),
    "full_sentence": dict(mode="full_sentence"),
}


def test_experiment_matrix(synth, tmp_path, data_dir):
    """The feature-ablation grid runs end to end on the synthetic corpus:
    8 configs per relation including the entity-only and full-sentence
    baselines, with byte-identical reports on rerun."""
    with criterion("experiment matrix: 8 deterministic ablation rows per relation"):
        kb, corpus, _ = synth
        from relex.features import BrownClusters, canonical_surfaces, write_features_jsonl

        clusters = BrownClusters.load(str(data_dir / "synth" / "brown.tsv"))
        surfaces = canonical_surfaces(kb)
        sentences = sentence_index(corpus)
        relations = ["instance_of", "author_of"]

        datasets = {}
        for relation in relations:
            pairs = sample_negatives(_annotate_all(kb, corpus, relation), 4.0, seed=61)
            for cell, overrides in VARIANT_CONFIGS.items():
                config = FeatureConfig(**overrides)
                examples = group_supports(pairs, sentences, clusters, config, surfaces)
                path = tmp_path / f"{relation}_{cell}.jsonl"
                with open(path, "w", encoding="utf-8") as fh:
                    write_features_jsonl(examples, clusters, config, fh)
                datasets[(relation, cell)] = str(path)

        plan = ExperimentPlan(
            relations=relations,
            variant="ablation",
            seed=67,
            datasets=datasets,
            model="ngram",
            trials=1,
            train_size=150,
            val_size=30,
            test_size=60,
            dim=32,
            bucket_count=16_384,
            epochs=5,
        )
        tables = []
        for _ in range(2):
            rows = run_matrix(plan)
            assert len(rows) == 16  # 2 relations x 8 configs
            per_relation = {rel: [r.cell for r in rows if r.relation == rel] for rel in relations}
            for rel in relations:
                assert per_relation[rel] == list(VARIANT_CONFIGS)
            buf = io.StringIO()
            write_matrix_tsv(rows, buf)
            tables.append(buf.getvalue())
        assert tables[0] == tables[1]

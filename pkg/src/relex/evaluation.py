"""Measurement protocol: P/R/F at a fixed threshold, repeated trials,
and the experiment matrix (grouping, satellites, top-k supports, feature
ablations, training-size sweeps).

Splits are made over grouped (x, relation, y) keys with a seeded,
hash-stable ordering, so no pair leaks across splits and every variant
of the same corpus receives the identical partition.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from hashlib import blake2b

import numpy as np

from relex.classifiers import (
    FeatureExample,
    TrainConfig,
    read_features_jsonl,
    train_maxent,
    train_ngram_linear,
)
from relex.conllu import ParsedSentence
from relex.errors import DataError, NoMainEntityError, RelexError
from relex.fact_index import BloomFilter
from relex.gazetteer import Gazetteer, GazetteerBuildReport, _collect_entries, build_page_gazetteer
from relex.kb_store import KnowledgeBase
from relex.resolver import POSITIVE, annotate_page

logger = logging.getLogger(__name__)

MODEL_NGRAM = "ngram"
MODEL_MAXENT = "maxent"

ABLATION_CELLS = (
    "full",
    "no_brown",
    "no_lemma",
    "no_pos",
    "no_dep",
    "no_entities",
    "xy_only",
    "full_sentence",
)
VARIANT_CELLS = {
    "single": ("full",),
    "grouping": ("grouped", "ungrouped"),
    "satellites": ("satellites", "no_satellites"),
    "supports": ("top5", "all"),
    "ablation": ABLATION_CELLS,
    "size_sweep": ("full",),
}


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision/recall/F on the positive class; degenerate denominators
    yield 0 by convention."""
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f_score = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f_score


def evaluate_predictions(labels, probs, threshold: float = 0.5) -> tuple[float, float, float]:
    """A prediction is positive iff its probability >= threshold."""
    if len(labels) == 0:
        raise ValueError("empty test set")
    if len(set(labels)) < 2:
        raise ValueError("test set must contain both classes")
    tp = fp = fn = 0
    for label, prob in zip(labels, probs):
        predicted = prob >= threshold
        if predicted and label == 1:
            tp += 1
        elif predicted:
            fp += 1
        elif label == 1:
            fn += 1
    return prf(tp, fp, fn)


def evaluate(model, examples: list[FeatureExample], threshold: float = 0.5) -> tuple[float, float, float]:
    labels = [ex.label for ex in examples]
    probs = [model.predict_proba(ex.features) for ex in examples]
    return evaluate_predictions(labels, probs, threshold)


@dataclass
class TrialResult:
    seed: int
    precision: float
    recall: float
    f_score: float
    train_seconds: float


@dataclass
class EvalReport:
    relation: str
    model_kind: str
    config_fingerprint: str
    threshold: float
    trials: list[TrialResult]
    precision: float = 0.0
    recall: float = 0.0
    f_score: float = 0.0
    f_mean: float = 0.0
    f_std: float = 0.0

    def __post_init__(self):
        fs = np.array([t.f_score for t in self.trials])
        self.precision = float(np.mean([t.precision for t in self.trials]))
        self.recall = float(np.mean([t.recall for t in self.trials]))
        self.f_mean = float(fs.mean())
        self.f_score = self.f_mean
        self.f_std = float(fs.std())  # population std across trials


def _stable_hash(text: str) -> str:
    return blake2b(text.encode("utf-8"), digest_size=16).hexdigest()


def config_fingerprint(config: dict) -> str:
    return _stable_hash(json.dumps(config, sort_keys=True))[:12]


def split_by_pair(
    examples: list[FeatureExample],
    train_size: int,
    val_size: int,
    test_size: int,
    seed: int,
) -> tuple[list[FeatureExample], list[FeatureExample], list[FeatureExample]]:
    """Partition by grouped pair key in hash order.

    The hash depends only on the key and the seed, so two featurized
    variants of the same corpus split identically, and the first-k
    prefix of the train keys is stable for size sweeps.
    """
    keys: list[tuple[str, str, str]] = []
    seen = set()
    for ex in examples:
        key = (ex.x, ex.relation, ex.y)
        if key not in seen:
            seen.add(key)
            keys.append(key)
    keys.sort(key=lambda k: _stable_hash("\x1f".join(k) + f"|{seed}"))

    total = train_size + val_size + test_size
    if total > len(keys):
        raise DataError(
            f"split sizes {train_size}/{val_size}/{test_size} need {total} pair keys, "
            f"corpus has {len(keys)}"
        )
    train_keys = set(keys[:train_size])
    val_keys = set(keys[train_size : train_size + val_size])
    test_keys = set(keys[train_size + val_size : total])
    assert not (train_keys & val_keys or train_keys & test_keys or val_keys & test_keys)

    by_split = ([], [], [])
    for ex in examples:
        key = (ex.x, ex.relation, ex.y)
        if key in train_keys:
            by_split[0].append(ex)
        elif key in val_keys:
            by_split[1].append(ex)
        elif key in test_keys:
            by_split[2].append(ex)
    return by_split


def _train_subset(train: list[FeatureExample], size: int, seed: int) -> list[FeatureExample]:
    """First ``size`` pair keys of the train split, in split-hash order,
    so smaller sweep points are strict subsets of larger ones."""
    keys = []
    seen = set()
    for ex in train:
        key = (ex.x, ex.relation, ex.y)
        if key not in seen:
            seen.add(key)
            keys.append(key)
    if size > len(keys):
        logger.warning("sweep point %d exceeds the %d available train pairs", size, len(keys))
    keys.sort(key=lambda k: _stable_hash("\x1f".join(k) + f"|{seed}"))
    chosen = set(keys[:size])
    return [ex for ex in train if (ex.x, ex.relation, ex.y) in chosen]


def run_trials(
    train: list[FeatureExample],
    test: list[FeatureExample],
    model_kind: str,
    *,
    relation: str,
    trials: int = 3,
    threshold: float = 0.5,
    seed: int,
    train_config: TrainConfig | None = None,
    sigma2: float = 1.0,
) -> EvalReport:
    """Train ``trials`` models differing only in seed and aggregate their
    F-scores. MaxEnt's objective is convex, so the harness asserts zero
    variance across its trials."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    results = []
    for i in range(trials):
        trial_seed = seed + i
        start = time.perf_counter()
        if model_kind == MODEL_NGRAM:
            cfg = train_config if train_config is not None else TrainConfig(seed=trial_seed)
            cfg = TrainConfig(**{**cfg.__dict__, "seed": trial_seed})
            model = train_ngram_linear(train, cfg)
            fingerprint = config_fingerprint({**cfg.__dict__, "seed": None})
        elif model_kind == MODEL_MAXENT:
            model = train_maxent(train, sigma2)
            fingerprint = config_fingerprint({"sigma2": sigma2})
        else:
            raise ValueError(f"unknown model kind {model_kind!r}")
        elapsed = time.perf_counter() - start
        precision, recall, f_score = evaluate(model, test, threshold)
        results.append(TrialResult(trial_seed, precision, recall, f_score, elapsed))

    report = EvalReport(relation, model_kind, fingerprint, threshold, results)
    if model_kind == MODEL_MAXENT and report.f_std != 0.0:
        raise RelexError(
            f"MaxEnt trials must not vary (convex objective), got std {report.f_std}"
        )
    return report


@dataclass
class ExperimentPlan:
    relations: list[str]
    variant: str
    seed: int
    datasets: dict[tuple[str, str], str]  # (relation, cell) -> featurized jsonl
    model: str = MODEL_NGRAM
    trials: int = 3
    threshold: float = 0.5
    train_size: int = 50_000
    val_size: int = 10_000
    test_size: int = 10_000
    sweep_points: list[int] = field(default_factory=lambda: [1_000, 5_000, 10_000, 25_000, 50_000])
    dim: int = 100
    bucket_count: int = 2_000_000
    epochs: int = 5
    learning_rate: float = 0.1
    ngram_order: int = 4
    sigma2: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANT_CELLS:
            raise ValueError(f"unknown variant {self.variant!r} (have {sorted(VARIANT_CELLS)})")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            seed=seed,
            dim=self.dim,
            bucket_count=self.bucket_count,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            ngram_order=self.ngram_order,
        )


_PLAN_INT_KEYS = {
    "seed", "trials", "train_size", "val_size", "test_size",
    "dim", "bucket_count", "epochs", "ngram_order",
}
_PLAN_FLOAT_KEYS = {"threshold", "learning_rate", "sigma2"}


def parse_plan(path: str) -> ExperimentPlan:
    """Read the key=value plan format. Dataset lines look like
    ``data.<relation>.<cell> = path/to/featurized.jsonl``."""
    values: dict = {"datasets": {}}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError("expected key = value", path=path, line=lineno)
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key.startswith("data."):
                parts = key.split(".")
                if len(parts) != 3:
                    raise DataError(f"dataset key {key!r} must be data.<relation>.<cell>", path=path, line=lineno)
                values["datasets"][(parts[1], parts[2])] = value
            elif key == "relations":
                values["relations"] = [r.strip() for r in value.split(",") if r.strip()]
            elif key == "sweep_points":
                values["sweep_points"] = [int(v) for v in value.split(",") if v.strip()]
            elif key in _PLAN_INT_KEYS:
                values[key] = int(value)
            elif key in _PLAN_FLOAT_KEYS:
                values[key] = float(value)
            elif key in ("variant", "model"):
                values[key] = value
            else:
                raise DataError(f"unknown plan key {key!r}", path=path, line=lineno)
    for required in ("relations", "variant", "seed"):
        if required not in values:
            raise DataError(f"plan is missing required key {required!r}", path=path)
    try:
        return ExperimentPlan(**values)
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad plan: {exc}", path=path)


@dataclass
class MatrixRow:
    relation: str
    variant: str
    cell: str
    report: EvalReport


def matrix_tasks(plan: ExperimentPlan) -> list[tuple[str, str]]:
    return [(relation, cell) for relation in plan.relations for cell in VARIANT_CELLS[plan.variant]]


def run_matrix_cell(plan: ExperimentPlan, relation: str, cell: str) -> list[MatrixRow]:
    """One (relation, cell) of the grid; the size sweep expands into one
    row per sweep point."""
    path = plan.datasets.get((relation, cell))
    if path is None:
        raise DataError(f"no featurized input for cell {relation}/{cell}")
    examples = read_features_jsonl(path)
    train, _, test = split_by_pair(
        examples, plan.train_size, plan.val_size, plan.test_size, plan.seed
    )
    rows: list[MatrixRow] = []
    if plan.variant == "size_sweep":
        for size in plan.sweep_points:
            subset = _train_subset(train, size, plan.seed)
            report = _run_cell(plan, relation, subset, test)
            rows.append(MatrixRow(relation, plan.variant, f"n={size}", report))
    else:
        report = _run_cell(plan, relation, train, test)
        rows.append(MatrixRow(relation, plan.variant, cell, report))
    return rows


def run_matrix(plan: ExperimentPlan) -> list[MatrixRow]:
    """Run every (relation, cell) of the plan's variant grid. Each cell
    needs its featurized input registered in the plan; a missing one is
    an error naming the cell."""
    return [row for task in matrix_tasks(plan) for row in run_matrix_cell(plan, *task)]


def _run_cell(plan, relation, train, test) -> EvalReport:
    return run_trials(
        train,
        test,
        plan.model,
        relation=relation,
        trials=plan.trials,
        threshold=plan.threshold,
        seed=plan.seed,
        train_config=plan.train_config(plan.seed),
        sigma2=plan.sigma2,
    )


def write_matrix_tsv(rows: list[MatrixRow], fh) -> None:
    """Deterministic result table: identical plan + seeds reproduce it
    byte for byte. Wall-clock timings live in their own file because they
    can never be reproducible."""
    fh.write("relation\tmodel\tvariant\tcell\ttrial\tseed\tprecision\trecall\tf_score\n")
    for row in rows:
        r = row.report
        for i, t in enumerate(r.trials, start=1):
            fh.write(
                f"{row.relation}\t{r.model_kind}\t{row.variant}\t{row.cell}\t{i}"
                f"\t{t.seed}\t{t.precision:.6f}\t{t.recall:.6f}\t{t.f_score:.6f}\n"
            )
        fh.write(
            f"{row.relation}\t{r.model_kind}\t{row.variant}\t{row.cell}\tmean\t-"
            f"\t{r.precision:.6f}\t{r.recall:.6f}\t{r.f_mean:.6f}\n"
        )
        fh.write(
            f"{row.relation}\t{r.model_kind}\t{row.variant}\t{row.cell}\tstd\t-"
            f"\t-\t-\t{r.f_std:.6f}\n"
        )


def write_timings_tsv(rows: list[MatrixRow], fh) -> None:
    fh.write("relation\tmodel\tvariant\tcell\ttrial\tseed\ttrain_seconds\n")
    for row in rows:
        r = row.report
        for i, t in enumerate(r.trials, start=1):
            fh.write(
                f"{row.relation}\t{r.model_kind}\t{row.variant}\t{row.cell}\t{i}"
                f"\t{t.seed}\t{t.train_seconds:.3f}\n"
            )


def matrix_to_json(rows: list[MatrixRow]) -> str:
    payload = []
    for row in rows:
        r = row.report
        payload.append(
            {
                "relation": row.relation,
                "model": r.model_kind,
                "variant": row.variant,
                "cell": row.cell,
                "config_fingerprint": r.config_fingerprint,
                "threshold": r.threshold,
                "precision": round(r.precision, 6),
                "recall": round(r.recall, 6),
                "f_mean": round(r.f_mean, 6),
                "f_std": round(r.f_std, 6),
                "trials": [
                    {
                        "seed": t.seed,
                        "precision": round(t.precision, 6),
                        "recall": round(t.recall, 6),
                        "f_score": round(t.f_score, 6),
                    }
                    for t in r.trials
                ],
            }
        )
    return json.dumps(payload, indent=2, sort_keys=True)


def build_global_gazetteer(kb: KnowledgeBase) -> Gazetteer:
    """Every denotation in the KB in one table: the noisy baseline the
    page-specific method replaces. Evaluation-only."""
    entries = _collect_entries(kb, set(kb.denotations), GazetteerBuildReport())
    max_tokens = max((len(k.split(" ")) for k in entries), default=0)
    return Gazetteer(main="", entries=entries, max_entry_tokens=max_tokens)


@dataclass
class NoiseAudit:
    positive_labels: int
    false_positives: int
    intended_instances: int
    matched_instances: int

    @property
    def fp_rate(self) -> float:
        return self.false_positives / self.positive_labels if self.positive_labels else 0.0

    @property
    def fn_rate(self) -> float:
        missed = self.intended_instances - self.matched_instances
        return missed / self.intended_instances if self.intended_instances else 0.0


def audit_noise(
    corpus: dict[str, list[ParsedSentence]],
    kb: KnowledgeBase,
    relation: str,
    truth: dict[tuple[str, str], frozenset],
    *,
    page_specific: bool = True,
    hops: int = 1,
    bloom: BloomFilter | None = None,
) -> NoiseAudit:
    """Compare produced positive labels against per-sentence ground
    truth. A positive label is false when its (x, relation, y) is not
    among the facts the sentence actually expresses."""
    global_gazetteer = None if page_specific else build_global_gazetteer(kb)
    positives = 0
    false_positives = 0
    matched: set[tuple[str, str, str, str, str]] = set()
    for url in sorted(corpus):
        if page_specific:
            try:
                gazetteer, _ = build_page_gazetteer(kb, url, hops=hops)
            except NoMainEntityError:
                logger.warning("skipping %s: no main entity", url)
                continue
        else:
            gazetteer = global_gazetteer
        for pair in annotate_page(corpus[url], gazetteer, relation, kb, bloom):
            if pair.label != POSITIVE:
                continue
            positives += 1
            intended = truth.get((pair.doc_url, pair.sent_id), frozenset())
            if (pair.x, pair.relation, pair.y) in intended:
                matched.add((pair.doc_url, pair.sent_id, pair.x, pair.relation, pair.y))
            else:
                false_positives += 1

    intended_instances = sum(
        1
        for key, facts in truth.items()
        for fact in facts
        if fact[1] == relation
    )
    matched_count = len(matched)
    return NoiseAudit(positives, false_positives, intended_instances, matched_count)

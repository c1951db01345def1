"""Mention resolution and pair labeling.

Greedy longest-match scanning assigns entity ids to token windows found
in the page gazetteer; every ordered pair of distinct mentions in a
sentence is then pushed through the label decision, and negatives are
down-sampled to the configured ratio at the grouped-pair level.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass

from relex.conllu import ParsedSentence
from relex.fact_index import BloomFilter, Verdict, decide_label
from relex.gazetteer import Gazetteer, normalize_surface
from relex.kb_store import KnowledgeBase

logger = logging.getLogger(__name__)

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class Mention:
    entity: str
    start: int  # token indices, inclusive
    end: int
    surface: str


@dataclass(frozen=True)
class LabeledPair:
    x: str
    y: str
    relation: str
    label: str  # POSITIVE or NEGATIVE
    doc_url: str
    sent_id: str
    x_span: tuple[int, int]
    y_span: tuple[int, int]

    @property
    def group_key(self) -> tuple[str, str, str]:
        return (self.x, self.relation, self.y)


def resolve_mentions(sentence: ParsedSentence, gazetteer: Gazetteer) -> list[Mention]:
    """Left-to-right scan; at each position the longest normalized token
    window present in the gazetteer wins, and scanning resumes after the
    match, so mentions never overlap."""
    forms = sentence.forms
    n = len(forms)
    mentions: list[Mention] = []
    i = 0
    while i < n:
        hit = None
        for length in range(min(gazetteer.max_entry_tokens, n - i), 0, -1):
            window = normalize_surface(" ".join(forms[i : i + length]))
            entity = gazetteer.entries.get(window)
            if entity is not None:
                hit = (length, entity)
                break
        if hit is None:
            i += 1
            continue
        length, entity = hit
        mentions.append(
            Mention(entity=entity, start=i + 1, end=i + length, surface=" ".join(forms[i : i + length]))
        )
        i += length
    return mentions


def annotate_page(
    doc: list[ParsedSentence],
    gazetteer: Gazetteer,
    relation: str,
    kb: KnowledgeBase,
    bloom: BloomFilter | None = None,
) -> list[LabeledPair]:
    """Label every ordered pair of distinct mentions in every sentence.

    Both orientations of each mention pair are evaluated because surface
    order does not determine relation direction; the class-signature
    constraint prunes the bulk of the reversed candidates. Pairs the
    constraint rejects are dropped entirely.
    """
    urls = {s.doc_url for s in doc}
    if len(urls) > 1:
        raise ValueError(f"annotate_page got sentences from multiple documents: {sorted(urls)}")
    pairs: list[LabeledPair] = []
    for sentence in doc:
        mentions = resolve_mentions(sentence, gazetteer)
        for i in range(len(mentions)):
            for j in range(i + 1, len(mentions)):
                if mentions[i].entity == mentions[j].entity:
                    continue
                for mx, my in ((mentions[i], mentions[j]), (mentions[j], mentions[i])):
                    decision = decide_label((mx.entity, my.entity), relation, kb, bloom)
                    if decision.verdict is Verdict.CONSTRAINT_REJECTED:
                        continue
                    pairs.append(
                        LabeledPair(
                            x=mx.entity,
                            y=my.entity,
                            relation=relation,
                            label=POSITIVE if decision.verdict is Verdict.POSITIVE else NEGATIVE,
                            doc_url=sentence.doc_url,
                            sent_id=sentence.sent_id,
                            x_span=(mx.start, mx.end),
                            y_span=(my.start, my.end),
                        )
                    )
    return pairs


def sample_negatives(pairs: list[LabeledPair], ratio: float, seed: int) -> list[LabeledPair]:
    """Down-sample negative groups to ``round(ratio * positives)`` per
    relation.

    Sampling operates on grouped (x, relation, y) keys, not sentences: a
    group is kept or dropped with all of its supports. Positives are
    always kept. Deterministic for a fixed seed.
    """
    if ratio <= 0:
        raise ValueError(f"ratio must be positive, got {ratio}")

    by_relation: dict[str, dict[tuple, str]] = {}
    for p in pairs:
        groups = by_relation.setdefault(p.relation, {})
        label = groups.get(p.group_key)
        groups[p.group_key] = POSITIVE if POSITIVE in (label, p.label) else NEGATIVE

    keep: set[tuple] = set()
    rng = random.Random(seed)
    for relation in sorted(by_relation):
        groups = by_relation[relation]
        pos_keys = [k for k, label in groups.items() if label == POSITIVE]
        neg_keys = sorted(k for k, label in groups.items() if label == NEGATIVE)
        target = min(len(neg_keys), round(ratio * len(pos_keys)))
        keep.update(pos_keys)
        keep.update(rng.sample(neg_keys, target))
        logger.info(
            "relation %s: %d positive groups, %d/%d negative groups kept",
            relation,
            len(pos_keys),
            target,
            len(neg_keys),
        )
    return [p for p in pairs if p.group_key in keep]


def write_pairs_jsonl(pairs: list[LabeledPair], fh) -> None:
    for p in pairs:
        fh.write(
            json.dumps(
                {
                    "x": p.x,
                    "y": p.y,
                    "relation": p.relation,
                    "label": p.label,
                    "doc_url": p.doc_url,
                    "sent_id": p.sent_id,
                    "x_span": list(p.x_span),
                    "y_span": list(p.y_span),
                },
                ensure_ascii=False,
            )
            + "\n"
        )


def read_pairs_jsonl(path: str) -> list[LabeledPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            pairs.append(
                LabeledPair(
                    x=d["x"],
                    y=d["y"],
                    relation=d["relation"],
                    label=d["label"],
                    doc_url=d["doc_url"],
                    sent_id=d["sent_id"],
                    x_span=tuple(d["x_span"]),
                    y_span=tuple(d["y_span"]),
                )
            )
    return pairs

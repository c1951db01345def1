"""Knowledge-base loading and indexing.

The store answers three query families used downstream: one-hop
neighborhoods (gazetteer construction), class membership (ontological
constraints), and exact fact membership (labeling). It is immutable
after load and safe for concurrent readers.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from relex.errors import DataError

logger = logging.getLogger(__name__)

# Wildcard in a signature column: that side is unconstrained.
UNCONSTRAINED = "*"


@dataclass(frozen=True)
class Fact:
    """A directed triple. For literal-valued relations the object holds
    the raw literal string instead of an entity id."""

    subject: str
    relation: str
    object: str


@dataclass(frozen=True)
class RelationSignature:
    """Admissible classes for a relation's left/right entities.

    ``*`` on either side means unconstrained. ``is_literal`` marks
    relations whose objects are string literals rather than entities.
    """

    relation: str
    left_class: str
    right_class: str
    is_literal: bool = False


@dataclass
class LoadReport:
    """Per-source ingestion counts; malformed lines are counted, never
    silently dropped."""

    parsed: dict = field(default_factory=dict)
    malformed: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def total_malformed(self) -> int:
        return sum(self.malformed.values())

    def summary(self) -> str:
        lines = []
        for source in sorted(self.parsed):
            bad = self.malformed.get(source, 0)
            lines.append(f"{source}: {self.parsed[source]} records, {bad} malformed")
        for w in self.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines)


class KnowledgeBase:
    """Indexed triples, denotations, signatures, and the page-URL map.

    Class membership (``classes_of``) follows one instance-of edge and
    then closes over subclass-of edges, bounded by ``max_class_depth``.
    The relation ids used for those two edges are configurable because
    KBs name them differently (e.g. Wikidata's P31/P279).
    """

    def __init__(
        self,
        facts: Iterable[Fact],
        denotations: dict[str, set[str]] | None = None,
        signatures: dict[str, RelationSignature] | None = None,
        main_entity_by_url: dict[str, str] | None = None,
        *,
        instance_of_relation: str = "instance_of",
        subclass_of_relation: str = "subclass_of",
        max_class_depth: int = 10,
    ):
        self.denotations = {e: set(d) for e, d in (denotations or {}).items()}
        self.signatures = dict(signatures or {})
        self.main_entity_by_url = dict(main_entity_by_url or {})
        self.instance_of_relation = instance_of_relation
        self.subclass_of_relation = subclass_of_relation
        self.max_class_depth = max_class_depth
        self.literal_relations = {s.relation for s in self.signatures.values() if s.is_literal}

        self._facts: set[tuple[str, str, str]] = set()
        self._by_subject: dict[str, list[Fact]] = defaultdict(list)
        self._by_object: dict[str, list[Fact]] = defaultdict(list)
        self._by_subject_relation: dict[tuple[str, str], set[str]] = defaultdict(set)
        self._fact_count: Counter = Counter()
        for f in facts:
            key = (f.subject, f.relation, f.object)
            if key in self._facts:
                continue
            self._facts.add(key)
            self._by_subject[f.subject].append(f)
            self._by_object[f.object].append(f)
            self._by_subject_relation[(f.subject, f.relation)].add(f.object)
            self._fact_count[f.subject] += 1
            self._fact_count[f.object] += 1

    @property
    def num_facts(self) -> int:
        return len(self._facts)

    def iter_facts(self) -> Iterator[Fact]:
        for s, r, o in sorted(self._facts):
            yield Fact(s, r, o)

    def entities(self) -> set[str]:
        """All entity ids the KB knows about (fact endpoints, denotation
        owners, signature classes, page mains). Literal objects of
        literal relations are excluded."""
        out: set[str] = set()
        for s, r, o in self._facts:
            out.add(s)
            if r not in self.literal_relations:
                out.add(o)
        out.update(self.denotations)
        out.update(self.main_entity_by_url.values())
        for sig in self.signatures.values():
            for c in (sig.left_class, sig.right_class):
                if c != UNCONSTRAINED:
                    out.add(c)
        return out

    def has_fact(self, f: Fact) -> bool:
        """Exact membership test; no false positives."""
        return (f.subject, f.relation, f.object) in self._facts

    def objects_of(self, subject: str, relation: str) -> set[str]:
        return self._by_subject_relation.get((subject, relation), set())

    def fact_count(self, entity: str) -> int:
        """Number of facts the entity participates in (either side)."""
        return self._fact_count.get(entity, 0)

    def one_hop_neighbors(self, main: str) -> set[str]:
        """Entities one edge away from ``main``, excluding literal-valued
        relations and ``main`` itself."""
        out: set[str] = set()
        for f in self._by_subject.get(main, ()):
            if f.relation not in self.literal_relations:
                out.add(f.object)
        for f in self._by_object.get(main, ()):
            if f.relation not in self.literal_relations:
                out.add(f.subject)
        out.discard(main)
        return out

    def classes_of(self, entity: str) -> set[str]:
        """Classes reachable by one instance-of edge followed by up to
        ``max_class_depth`` subclass-of edges. Cycle-safe."""
        classes = set(self.objects_of(entity, self.instance_of_relation))
        frontier = list(classes)
        for _ in range(self.max_class_depth):
            if not frontier:
                break
            nxt = []
            for c in frontier:
                for sup in self.objects_of(c, self.subclass_of_relation):
                    if sup not in classes:
                        classes.add(sup)
                        nxt.append(sup)
            frontier = nxt
        return classes


def _tsv_rows(path: str, n_cols: int, report: LoadReport, source: str):
    """Yield (line_number, columns) for well-formed rows; count the rest."""
    report.parsed.setdefault(source, 0)
    report.malformed.setdefault(source, 0)
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != n_cols or any(not c.strip() for c in cols):
                report.malformed[source] += 1
                if report.malformed[source] <= 3:
                    report.warnings.append(f"{source} line {lineno}: malformed ({line[:80]!r})")
                continue
            report.parsed[source] += 1
            yield lineno, [c.strip() for c in cols]


def load_denotations(path: str, report: LoadReport | None = None) -> dict[str, set[str]]:
    """Load the ``entity_id<TAB>surface`` file on its own (used by stages
    that only need canonical surfaces)."""
    report = report if report is not None else LoadReport()
    denotations: dict[str, set[str]] = defaultdict(set)
    for _, (entity, surface) in _tsv_rows(path, 2, report, "denotations"):
        denotations[entity].add(surface)
    return dict(denotations)


def load_kb(
    triples_path: str,
    denotations_path: str | None = None,
    signatures_path: str | None = None,
    url_map_path: str | None = None,
    *,
    instance_of_relation: str = "instance_of",
    subclass_of_relation: str = "subclass_of",
    max_class_depth: int = 10,
) -> tuple[KnowledgeBase, LoadReport]:
    """Load all sources and build the indexed store.

    Unreadable files raise OSError (fatal). Malformed lines are counted
    in the report. A URL mapped to two different main entities is fatal
    because it would corrupt every gazetteer built for that page.
    """
    report = LoadReport()

    facts = [Fact(*cols) for _, cols in _tsv_rows(triples_path, 3, report, "triples")]

    denotations: dict[str, set[str]] = {}
    if denotations_path:
        denotations = load_denotations(denotations_path, report)

    signatures: dict[str, RelationSignature] = {}
    if signatures_path:
        for lineno, (rel, left, right, literal) in _tsv_rows(
            signatures_path, 4, report, "signatures"
        ):
            if literal not in ("0", "1"):
                report.malformed["signatures"] += 1
                report.parsed["signatures"] -= 1
                report.warnings.append(f"signatures line {lineno}: is_literal must be 0 or 1")
                continue
            signatures[rel] = RelationSignature(rel, left, right, is_literal=literal == "1")

    url_map: dict[str, str] = {}
    if url_map_path:
        for lineno, (url, entity) in _tsv_rows(url_map_path, 2, report, "url_map"):
            if url in url_map and url_map[url] != entity:
                raise DataError(
                    f"url {url!r} maps to multiple main entities "
                    f"({url_map[url]!r} and {entity!r})",
                    path=url_map_path,
                    line=lineno,
                )
            url_map[url] = entity

    known_relations = {f.relation for f in facts}
    for rel in signatures:
        if rel not in known_relations:
            report.warnings.append(f"signature for relation {rel!r} which has no facts")

    kb = KnowledgeBase(
        facts,
        denotations,
        signatures,
        url_map,
        instance_of_relation=instance_of_relation,
        subclass_of_relation=subclass_of_relation,
        max_class_depth=max_class_depth,
    )
    logger.info(
        "loaded KB: %d facts, %d entities with denotations, %d signatures, %d pages",
        kb.num_facts,
        len(kb.denotations),
        len(kb.signatures),
        len(kb.main_entity_by_url),
    )
    return kb, report

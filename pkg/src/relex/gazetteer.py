"""Page-specific gazetteers.

A gazetteer maps normalized denotation strings to entity ids for one
page: the page's main entity plus everything one hop away in the KB
graph. Restricting resolution to that neighborhood is what keeps
distant-supervision labels clean, at the cost of recall.
"""

from __future__ import annotations

import json
import logging
import unicodedata
from dataclasses import dataclass, field

from relex.errors import NoMainEntityError
from relex.kb_store import KnowledgeBase

logger = logging.getLogger(__name__)


def normalize_surface(s: str) -> str:
    """NFC, lowercase, collapse internal whitespace. No stemming: greedy
    matching needs exact token sequences."""
    return " ".join(unicodedata.normalize("NFC", s).lower().split())


@dataclass
class Gazetteer:
    main: str
    entries: dict[str, str] = field(default_factory=dict)
    max_entry_tokens: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, normalized: str) -> str | None:
        return self.entries.get(normalized)

    def dump_jsonl(self, fh) -> None:
        """Debug dump, one entry per line, sorted so rebuilds are
        byte-identical."""
        for surface in sorted(self.entries):
            fh.write(json.dumps({"surface": surface, "entity": self.entries[surface]}) + "\n")


@dataclass
class GazetteerBuildReport:
    candidates: int = 0
    entries: int = 0
    collisions: int = 0
    empty_keys: int = 0


def _tie_break(kb: KnowledgeBase, a: str, b: str) -> str:
    # More KB facts wins; ties go to the lexicographically smaller id so
    # collision resolution is deterministic and order-independent.
    return min((a, b), key=lambda e: (-kb.fact_count(e), e))


def _collect_entries(
    kb: KnowledgeBase, candidates: set[str], report: GazetteerBuildReport
) -> dict[str, str]:
    entries: dict[str, str] = {}
    for entity in sorted(candidates):
        for denotation in kb.denotations.get(entity, ()):
            key = normalize_surface(denotation)
            if not key:
                report.empty_keys += 1
                continue
            current = entries.get(key)
            if current is None:
                entries[key] = entity
            elif current != entity:
                report.collisions += 1
                entries[key] = _tie_break(kb, current, entity)
    return entries


def build_page_gazetteer(
    kb: KnowledgeBase, page_url: str, *, hops: int = 1
) -> tuple[Gazetteer, GazetteerBuildReport]:
    """Build the gazetteer for one page.

    ``hops=2`` widens the candidate set to the two-hop neighborhood,
    trading precision for recall; it is off by default.
    """
    main = kb.main_entity_by_url.get(page_url)
    if main is None:
        raise NoMainEntityError(f"no main entity for url {page_url!r}")

    candidates = {main} | kb.one_hop_neighbors(main)
    if hops >= 2:
        for neighbor in sorted(candidates - {main}):
            candidates |= kb.one_hop_neighbors(neighbor)

    report = GazetteerBuildReport(candidates=len(candidates))
    entries = _collect_entries(kb, candidates, report)
    report.entries = len(entries)
    if report.collisions:
        logger.debug("gazetteer for %s: %d denotation collisions", page_url, report.collisions)

    max_tokens = max((len(k.split(" ")) for k in entries), default=0)
    return Gazetteer(main=main, entries=entries, max_entry_tokens=max_tokens), report

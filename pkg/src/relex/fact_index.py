"""Fact membership at scale plus the labeling decision.

Exact lookup works for desk-scale KBs; the Bloom filter is the
memory-efficient path for KBs where a hash set of all triples would not
fit. Both are gated behind the same ontological-constraint pre-filter.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from hashlib import blake2b
from typing import Iterable

from relex.errors import DataError
from relex.kb_store import UNCONSTRAINED, Fact, KnowledgeBase

BLOOM_MAGIC = b"RLXBLOOM"
_HEADER = struct.Struct("<QQQQ")  # m, k, n, seed, little-endian u64

# \x1f between fields so ("a", "b c") and ("a b", "c") cannot collide.
_FIELD_SEP = "\x1f"


def fact_key(subject: str, relation: str, obj: str) -> bytes:
    return _FIELD_SEP.join((subject, relation, obj)).encode("utf-8")


class BloomFilter:
    """Plain Bloom filter with double hashing.

    Sizing follows the standard formulas: m = ceil(-n*ln(p)/ln(2)^2) bits
    and k = round((m/n)*ln 2) probes. The k probe positions come from two
    independent 64-bit halves of a keyed blake2b digest via
    h_i = h1 + i*h2 mod m, so membership answers are reproducible across
    runs for a given seed.
    """

    def __init__(self, m: int, k: int, *, seed: int = 0, n: int = 0, bits: bytearray | None = None):
        if m <= 0 or k <= 0:
            raise ValueError("m and k must be positive")
        self.m = m
        self.k = k
        self.n = n
        self.seed = seed
        self.bits = bits if bits is not None else bytearray((m + 7) // 8)
        self._key = seed.to_bytes(8, "little")

    @staticmethod
    def size_for(n: int, target_fpr: float) -> tuple[int, int]:
        if not 0.0 < target_fpr < 1.0:
            raise ValueError(f"target_fpr must be in (0, 1), got {target_fpr}")
        if n <= 0:
            return 8, 1
        m = math.ceil(-n * math.log(target_fpr) / (math.log(2) ** 2))
        k = max(1, round((m / n) * math.log(2)))
        return m, k

    @property
    def implied_fpr(self) -> float:
        """Target rate implied by the stored sizing (survives serialization)."""
        if self.n == 0:
            return 0.0
        return math.exp(-self.m * (math.log(2) ** 2) / self.n)

    def _positions(self, key: bytes):
        digest = blake2b(key, digest_size=16, key=self._key).digest()
        h1 = int.from_bytes(digest[:8], "little")
        h2 = int.from_bytes(digest[8:], "little") or 1
        m = self.m
        for i in range(self.k):
            yield (h1 + i * h2) % m

    def add_key(self, key: bytes) -> None:
        bits = self.bits
        for pos in self._positions(key):
            bits[pos >> 3] |= 1 << (pos & 7)

    def contains_key(self, key: bytes) -> bool:
        bits = self.bits
        for pos in self._positions(key):
            if not bits[pos >> 3] & (1 << (pos & 7)):
                return False
        return True

    def add_fact(self, f: Fact) -> None:
        self.add_key(fact_key(f.subject, f.relation, f.object))

    def contains_fact(self, f: Fact) -> bool:
        return self.contains_key(fact_key(f.subject, f.relation, f.object))

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(BLOOM_MAGIC)
            fh.write(_HEADER.pack(self.m, self.k, self.n, self.seed))
            fh.write(bytes(self.bits))

    @classmethod
    def load(cls, path: str) -> "BloomFilter":
        with open(path, "rb") as fh:
            magic = fh.read(len(BLOOM_MAGIC))
            if magic != BLOOM_MAGIC:
                raise DataError("not a bloom filter file (bad magic)", path=path)
            m, k, n, seed = _HEADER.unpack(fh.read(_HEADER.size))
            bits = bytearray(fh.read())
        expected = (m + 7) // 8
        if len(bits) != expected:
            raise DataError(
                f"bloom bit array truncated ({len(bits)} bytes, expected {expected})", path=path
            )
        return cls(m, k, seed=seed, n=n, bits=bits)


def build_bloom(facts: Iterable[Fact], target_fpr: float, *, seed: int = 0) -> BloomFilter:
    """Size the filter for the fact count and insert everything."""
    facts = facts if isinstance(facts, (list, tuple)) else list(facts)
    m, k = BloomFilter.size_for(len(facts), target_fpr)
    bloom = BloomFilter(m, k, seed=seed, n=len(facts))
    for f in facts:
        bloom.add_fact(f)
    return bloom


class Verdict(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE_CANDIDATE = "negative_candidate"
    CONSTRAINT_REJECTED = "constraint_rejected"


class LookupVia(enum.Enum):
    EXACT = "exact"
    BLOOM = "bloom"


@dataclass(frozen=True)
class LabelDecision:
    verdict: Verdict
    via: LookupVia | None  # None iff the fact test was never consulted


def decide_label(
    pair: tuple[str, str],
    relation: str,
    kb: KnowledgeBase,
    bloom: BloomFilter | None = None,
) -> LabelDecision:
    """Label one candidate (left, right) pair for ``relation``.

    Class-signature constraints run first and short-circuit: a rejected
    pair never touches the fact index. A missing signature means both
    sides are unconstrained.
    """
    left, right = pair
    sig = kb.signatures.get(relation)
    if sig is not None:
        if sig.left_class != UNCONSTRAINED and sig.left_class not in kb.classes_of(left):
            return LabelDecision(Verdict.CONSTRAINT_REJECTED, None)
        if sig.right_class != UNCONSTRAINED and sig.right_class not in kb.classes_of(right):
            return LabelDecision(Verdict.CONSTRAINT_REJECTED, None)

    fact = Fact(left, relation, right)
    if bloom is not None:
        hit = bloom.contains_fact(fact)
        via = LookupVia.BLOOM
    else:
        hit = kb.has_fact(fact)
        via = LookupVia.EXACT
    return LabelDecision(Verdict.POSITIVE if hit else Verdict.NEGATIVE_CANDIDATE, via)

"""Dependency-path feature tokens.

Each candidate pair's support sentence is reduced to the tree path
between the two entity heads. Every path node renders as
``lemma/brown4/UPOS/deprel[/dir]``: the lemma (literal ``X``/``Y`` at the
entity positions), the 4-bit Brown cluster prefix of the lemma, the
part of speech, the dependency relation, and a direction mark ('>' while
ascending toward the lowest common ancestor, '<' while descending, none
on the LCA itself). The grouped feature sequence for a pair brackets the
concatenated support renderings with one token per entity:
``Surface_String/brown4``.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace

from relex.conllu import ParsedSentence, Token
from relex.errors import DataError, TreeError
from relex.kb_store import KnowledgeBase
from relex.resolver import POSITIVE, LabeledPair

logger = logging.getLogger(__name__)

ASCENDING = ">"
DESCENDING = "<"
AT_LCA = ""

UNKNOWN_CLUSTER = "UNK"
# Substituted entity lemmas carry no distributional identity of their
# own; they get a fixed all-zero cluster prefix.
ENTITY_CLUSTER_PREFIX = "0000"

MODE_PATH = "path"
MODE_XY_ONLY = "xy_only"
MODE_FULL_SENTENCE = "full_sentence"


class BrownClusters:
    """Word -> cluster bit-string table, with case-insensitive fallback."""

    def __init__(self, paths: dict[str, str]):
        self.paths = dict(paths)
        self._lower = {}
        for word, bits in paths.items():
            self._lower.setdefault(word.lower(), bits)

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def cluster_count(self) -> int:
        return len(set(self.paths.values()))

    def lookup(self, word: str) -> str | None:
        bits = self.paths.get(word)
        if bits is None:
            bits = self._lower.get(word.lower())
        return bits

    @classmethod
    def load(cls, path: str) -> "BrownClusters":
        """Read the standard cluster-output format:
        ``bit-string<TAB>word<TAB>frequency``."""
        paths: dict[str, str] = {}
        skipped = 0
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line.strip():
                    continue
                cols = line.split("\t")
                if len(cols) < 2 or not cols[0] or not cols[1]:
                    skipped += 1
                    continue
                if set(cols[0]) - {"0", "1"}:
                    raise DataError(f"cluster path {cols[0]!r} is not binary", path=path, line=lineno)
                paths[cols[1]] = cols[0]
        if skipped:
            logger.warning("brown clusters %s: skipped %d malformed lines", path, skipped)
        return cls(paths)


def brown_prefix4(clusters: BrownClusters, word: str) -> str:
    """First 4 characters of the cluster path, right-padded with '0';
    ``UNK`` for words missing from the table."""
    bits = clusters.lookup(word)
    if bits is None:
        return UNKNOWN_CLUSTER
    return bits[:4].ljust(4, "0")


@dataclass(frozen=True)
class PathNode:
    index: int  # token index in the sentence
    lemma: str  # literal "X"/"Y" at entity positions
    upos: str
    deprel: str
    direction: str  # ASCENDING, DESCENDING, or AT_LCA
    is_entity: bool = False


@dataclass(frozen=True)
class FeatureConfig:
    use_brown: bool = True
    use_lemma: bool = True
    use_pos: bool = True
    use_dep: bool = True  # drops both deprel and direction when off
    use_entities: bool = True
    use_satellites: bool = True
    max_path_len: int = 5  # interior nodes allowed between X and Y
    min_path_freq: int = 0  # corpus-wide; 0/1 = off (classic value: 5)
    top_k_supports: int | None = None
    mode: str = MODE_PATH

    def __post_init__(self):
        if self.mode not in (MODE_PATH, MODE_XY_ONLY, MODE_FULL_SENTENCE):
            raise ValueError(f"unknown feature mode {self.mode!r}")
        if self.mode == MODE_PATH and not (
            self.use_brown or self.use_lemma or self.use_pos or self.use_dep
        ):
            raise ValueError("at least one path feature family must be enabled")


def span_head(sentence: ParsedSentence, span: tuple[int, int]) -> int:
    """Index of the span's syntactic head: the token whose head lies
    outside the span. For non-projective spans with several such tokens
    the last one wins (English NPs tend to be head-final)."""
    start, end = span
    if not (1 <= start <= end <= len(sentence)):
        raise ValueError(f"span {span} outside sentence of length {len(sentence)}")
    heads = [i for i in range(start, end + 1) if not start <= sentence.token(i).head <= end]
    if not heads:
        raise TreeError(f"span {span} in sentence {sentence.sent_id!r} has no external head")
    return heads[-1]


def _chain_to_root(sentence: ParsedSentence, start: int) -> list[int]:
    chain = [start]
    seen = {start}
    node = start
    while True:
        head = sentence.token(node).head
        if head == 0:
            return chain
        if head in seen:
            raise TreeError(f"head cycle at token {head} in sentence {sentence.sent_id!r}")
        chain.append(head)
        seen.add(head)
        node = head


def extract_path(
    sentence: ParsedSentence,
    x_span: tuple[int, int],
    y_span: tuple[int, int],
    *,
    max_path_len: int = 5,
) -> list[PathNode] | None:
    """Tree path between the two span heads, via their lowest common
    ancestor.

    Returns None when the path is too long (more than ``max_path_len``
    interior nodes between the X and Y endpoints) or degenerate; raises
    TreeError for malformed trees, naming the sentence.
    """
    if max(x_span[0], y_span[0]) <= min(x_span[1], y_span[1]):
        raise ValueError(f"spans {x_span} and {y_span} overlap")
    x_head = span_head(sentence, x_span)
    y_head = span_head(sentence, y_span)
    if x_head == y_head:
        return None

    x_chain = _chain_to_root(sentence, x_head)
    y_chain = _chain_to_root(sentence, y_head)
    x_positions = {idx: pos for pos, idx in enumerate(x_chain)}
    lca = None
    y_pos = None
    for pos, idx in enumerate(y_chain):
        if idx in x_positions:
            lca = idx
            y_pos = pos
            break
    if lca is None:
        raise TreeError(f"no common ancestor in sentence {sentence.sent_id!r} (multiple trees?)")

    indices = x_chain[: x_positions[lca]] + [lca] + list(reversed(y_chain[:y_pos]))
    if len(indices) > max_path_len + 2:
        return None

    nodes = []
    for idx in indices:
        token = sentence.token(idx)
        if idx == x_head:
            lemma, is_entity = "X", True
        elif idx == y_head:
            lemma, is_entity = "Y", True
        else:
            lemma, is_entity = token.lemma, False
        if idx == lca:
            direction = AT_LCA
        elif idx in x_positions and x_positions[idx] < x_positions[lca]:
            direction = ASCENDING
        else:
            direction = DESCENDING
        nodes.append(PathNode(idx, lemma, token.upos, token.deprel, direction, is_entity))
    return nodes


def linear_satellites(
    sentence: ParsedSentence, x_span: tuple[int, int], y_span: tuple[int, int]
) -> tuple[Token | None, Token | None]:
    """The single token immediately before the X span and immediately
    after the Y span, when they exist."""
    pre = sentence.token(x_span[0] - 1) if x_span[0] > 1 else None
    post = sentence.token(y_span[1] + 1) if y_span[1] < len(sentence) else None
    return pre, post


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace("/", "\\/")


def _render_fields(
    lemma: str, brown4: str, upos: str, deprel: str, direction: str, cfg: FeatureConfig
) -> str:
    fields = []
    if cfg.use_lemma:
        fields.append(_escape(lemma))
    if cfg.use_brown:
        fields.append(brown4)
    if cfg.use_pos:
        fields.append(upos)
    if cfg.use_dep:
        fields.append(deprel)
        if direction:
            fields.append(direction)
    return "/".join(fields)


def render_support(
    path: list[PathNode],
    satellites: tuple[Token | None, Token | None] | None,
    clusters: BrownClusters,
    config: FeatureConfig,
) -> tuple[str, ...]:
    """Feature tokens for one support: optional pre-X satellite, the path
    nodes, optional post-Y satellite. Disabled families drop their field
    slot entirely rather than leaving it empty."""
    if not path:
        raise ValueError("cannot render an empty path")
    tokens = []
    pre, post = satellites if satellites is not None else (None, None)
    if config.use_satellites and pre is not None:
        tokens.append(
            _render_fields(pre.lemma, brown_prefix4(clusters, pre.lemma), pre.upos, pre.deprel, ASCENDING, config)
        )
    for node in path:
        brown4 = ENTITY_CLUSTER_PREFIX if node.is_entity else brown_prefix4(clusters, node.lemma)
        tokens.append(_render_fields(node.lemma, brown4, node.upos, node.deprel, node.direction, config))
    if config.use_satellites and post is not None:
        tokens.append(
            _render_fields(post.lemma, brown_prefix4(clusters, post.lemma), post.upos, post.deprel, DESCENDING, config)
        )
    return tuple(tokens)


def render_entity_token(surface: str, head_lemma: str, clusters: BrownClusters, config: FeatureConfig) -> str:
    """``Surface_String/brown4`` where the cluster comes from the span
    head's lemma (multiword entities get exactly one cluster)."""
    fields = [_escape(surface)]
    if config.use_brown:
        fields.append(brown_prefix4(clusters, head_lemma))
    return "/".join(fields)


@dataclass
class Support:
    rendered: tuple[str, ...]
    frequency: int = 1
    path: list[PathNode] | None = None
    satellites: tuple[Token | None, Token | None] | None = None
    words: tuple[str, ...] | None = None  # full-sentence mode


@dataclass
class GroupedExample:
    x: str
    y: str
    x_surface: str
    y_surface: str
    relation: str
    label: str
    supports: list[Support] = field(default_factory=list)
    x_head_lemma: str = ""
    y_head_lemma: str = ""

    @property
    def n_support_sentences(self) -> int:
        return sum(s.frequency for s in self.supports)


def canonical_surfaces(kb: KnowledgeBase) -> dict[str, str]:
    """Entity id -> underscored canonical surface string: the longest
    denotation (lexicographically smallest on ties), falling back to the
    id itself."""
    out = {}
    for entity, denotations in kb.denotations.items():
        best = min(denotations, key=lambda d: (-len(d), d))
        out[entity] = "_".join(best.split())
    return out


def _surface_of(surfaces: dict[str, str], entity: str) -> str:
    return surfaces.get(entity, "_".join(entity.split()))


def group_supports(
    pairs: list[LabeledPair],
    sentences: dict[tuple[str, str], ParsedSentence],
    clusters: BrownClusters,
    config: FeatureConfig,
    surfaces: dict[str, str] | None = None,
    *,
    grouped: bool = True,
) -> list[GroupedExample]:
    """Assemble (x, relation, y) groups from labeled pairs.

    Supports with identical renderings are merged and counted so top-k
    selection can rank by frequency. Pairs whose path exceeds the length
    cap (or is degenerate) contribute no support; groups that end up
    empty are dropped. With ``grouped=False`` one example per support is
    emitted instead.
    """
    surfaces = surfaces or {}
    groups: dict[tuple[str, str, str], GroupedExample] = {}

    for pair in pairs:
        sentence = sentences.get((pair.doc_url, pair.sent_id))
        if sentence is None:
            raise DataError(f"no sentence {pair.sent_id!r} in document {pair.doc_url!r}")

        if config.mode == MODE_FULL_SENTENCE:
            words = tuple(f.lower() for f in sentence.forms)
            support = Support(rendered=words, words=words)
        elif config.mode == MODE_XY_ONLY:
            support = Support(rendered=())
        else:
            path = extract_path(sentence, pair.x_span, pair.y_span, max_path_len=config.max_path_len)
            if path is None:
                continue
            satellites = linear_satellites(sentence, pair.x_span, pair.y_span)
            support = Support(
                rendered=render_support(path, satellites, clusters, config),
                path=path,
                satellites=satellites,
            )

        key = pair.group_key
        example = groups.get(key)
        if example is None:
            example = GroupedExample(
                x=pair.x,
                y=pair.y,
                x_surface=_surface_of(surfaces, pair.x),
                y_surface=_surface_of(surfaces, pair.y),
                relation=pair.relation,
                label=pair.label,
                x_head_lemma=_head_lemma(sentence, pair.x_span),
                y_head_lemma=_head_lemma(sentence, pair.y_span),
            )
            groups[key] = example
        if pair.label == POSITIVE:
            example.label = POSITIVE

        for existing in example.supports:
            if existing.rendered == support.rendered:
                existing.frequency += 1
                break
        else:
            example.supports.append(support)

    examples = [g for g in groups.values() if g.supports]
    if config.min_path_freq > 1:
        examples = _apply_min_path_freq(examples, config.min_path_freq)
    if config.top_k_supports is not None:
        examples = [select_top_supports(ex, config.top_k_supports) for ex in examples]
    if not grouped:
        examples = [
            replace(ex, supports=[support]) for ex in examples for support in ex.supports
        ]
    return examples


def _head_lemma(sentence: ParsedSentence, span: tuple[int, int]) -> str:
    try:
        return sentence.token(span_head(sentence, span)).lemma
    except TreeError:
        return sentence.token(span[1]).lemma


def _apply_min_path_freq(examples: list[GroupedExample], threshold: int) -> list[GroupedExample]:
    """Corpus-wide frequency filter from the original pipeline: drop
    supports whose rendering occurs fewer than ``threshold`` times."""
    counts: Counter = Counter()
    for ex in examples:
        for s in ex.supports:
            counts[s.rendered] += s.frequency
    out = []
    for ex in examples:
        kept = [s for s in ex.supports if counts[s.rendered] >= threshold]
        if kept:
            out.append(replace(ex, supports=kept))
    return out


def select_top_supports(example: GroupedExample, k: int) -> GroupedExample:
    """Keep the k most frequent supports, ties broken by first occurrence;
    survivors stay in occurrence order."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(example.supports) <= k:
        return example
    ranked = sorted(range(len(example.supports)), key=lambda i: (-example.supports[i].frequency, i))
    chosen = sorted(ranked[:k])
    return replace(example, supports=[example.supports[i] for i in chosen])


def grouped_feature_tokens(
    example: GroupedExample, clusters: BrownClusters, config: FeatureConfig
) -> list[str]:
    """Final token sequence for one example: entity-X token, every
    support's rendering in order, entity-Y token. Entity tokens appear
    once per example, not per support."""
    tokens: list[str] = []
    with_entities = config.use_entities and config.mode != MODE_FULL_SENTENCE
    if with_entities:
        tokens.append(render_entity_token(example.x_surface, example.x_head_lemma, clusters, config))
    for support in example.supports:
        tokens.extend(support.rendered)
    if with_entities:
        tokens.append(render_entity_token(example.y_surface, example.y_head_lemma, clusters, config))
    return tokens


def write_features_jsonl(
    examples: list[GroupedExample], clusters: BrownClusters, config: FeatureConfig, fh
) -> None:
    for ex in examples:
        fh.write(
            json.dumps(
                {
                    "x": ex.x,
                    "y": ex.y,
                    "relation": ex.relation,
                    "label": 1 if ex.label == POSITIVE else 0,
                    "features": grouped_feature_tokens(ex, clusters, config),
                    "n_supports": ex.n_support_sentences,
                },
                ensure_ascii=False,
            )
            + "\n"
        )

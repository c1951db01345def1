"""Deterministic synthetic fixtures for tests and benchmarks.

Two generators:

* ``build_noise_world`` -- a desk-scale corpus of song pages with
  planted ambiguous denotations. Every page carries sentences that
  genuinely express KB facts plus trap sentences whose common words
  ("intro", "war", ...) are also denotations of unrelated KB entities.
  A global gazetteer resolves those words everywhere and produces false
  positive labels; the page-specific gazetteer never sees them.

* ``make_signal_examples`` -- featurized examples where the label is a
  deterministic function of a single path pattern, for classifier
  sanity checks.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from hashlib import blake2b
from pathlib import Path

from relex.classifiers import FeatureExample
from relex.conllu import ParsedSentence, Token, write_corpus
from relex.features import BrownClusters
from relex.kb_store import Fact, KnowledgeBase, RelationSignature

INSTANCE_OF = "instance_of"
AUTHOR_OF = "author_of"

_ADJECTIVES = [
    "velvet", "crimson", "silent", "golden", "broken", "electric", "hollow",
    "winter", "neon", "paper", "gentle", "scarlet", "rusty", "lunar", "coastal",
    "amber", "midnight", "emerald", "wandering", "quiet",
]
_NOUNS = [
    "horizon", "river", "garden", "mirror", "empire", "harbor", "lantern",
    "meadow", "signal", "anthem", "voyage", "orchard", "citadel", "parade",
    "monsoon", "compass", "aurora", "thicket", "paradox", "ember",
]
_FIRST_NAMES = [
    "maria", "jonas", "priya", "kenji", "amara", "lucas", "ingrid", "tomas",
    "leila", "viktor", "sofia", "dmitri", "hana", "pablo", "greta", "omar",
    "alice", "ravi", "nora", "felix",
]
_LAST_NAMES = [
    "keller", "okafor", "tanaka", "lindgren", "moreau", "castillo", "novak",
    "fischer", "haddad", "petrov", "silva", "johansson", "mbeki", "rossi",
    "dubois", "yamada", "kovacs", "oconnor", "weiss", "fontaine",
]
# Common words planted as denotations of unrelated entities.
_SONG_TRAPS = ["intro", "outro", "demo", "cover", "remix", "bridge", "chorus", "verse", "refrain", "medley"]
_ALBUM_TRAPS = ["war", "journey", "end", "night", "dream", "storm", "summer", "silence", "return", "escape"]

SONG_CLASS = "class_song"
ALBUM_CLASS = "class_album"
PERSON_CLASS = "class_person"


@dataclass
class SynthWorld:
    facts: list[Fact]
    denotations: dict[str, set[str]]
    signatures: dict[str, RelationSignature]
    url_map: dict[str, str]
    corpus: dict[str, list[ParsedSentence]]
    truth: dict[tuple[str, str], frozenset]
    brown_paths: dict[str, str] = field(default_factory=dict)

    def kb(self) -> KnowledgeBase:
        return KnowledgeBase(self.facts, self.denotations, self.signatures, self.url_map)

    def clusters(self) -> BrownClusters:
        return BrownClusters(self.brown_paths)


def _word_bits(word: str, length: int = 8) -> str:
    digest = blake2b(word.encode("utf-8"), digest_size=4).digest()
    value = int.from_bytes(digest, "little")
    return format(value & ((1 << length) - 1), f"0{length}b")


def _title(word: str) -> str:
    return word[0].upper() + word[1:]


def _sent(doc_url: str, sent_id: str, rows: list[tuple[str, str, str, str, int]]) -> ParsedSentence:
    tokens = tuple(
        Token(i + 1, form, lemma, upos, head, deprel)
        for i, (form, lemma, upos, deprel, head) in enumerate(rows)
    )
    return ParsedSentence(tokens, doc_url, sent_id)


def _tp1(item: tuple[str, str], artist: tuple[str, str], url: str, sid: str) -> ParsedSentence:
    # "{Item} is a song by {Artist} ."
    (i1, i2), (a1, a2) = item, artist
    return _sent(url, sid, [
        (_title(i1), i1, "PROPN", "compound", 2),
        (_title(i2), i2, "PROPN", "nsubj", 5),
        ("is", "be", "AUX", "cop", 5),
        ("a", "a", "DET", "det", 5),
        ("song", "song", "NOUN", "root", 0),
        ("by", "by", "ADP", "prep", 5),
        (_title(a1), a1, "PROPN", "compound", 8),
        (_title(a2), a2, "PROPN", "pobj", 6),
        (".", ".", "PUNCT", "punct", 5),
    ])


def _tp2(item: tuple[str, str], artist: tuple[str, str], url: str, sid: str) -> ParsedSentence:
    # "Reviewers praised {Item} , a song written by {Artist} ."
    (i1, i2), (a1, a2) = item, artist
    return _sent(url, sid, [
        ("Reviewers", "reviewer", "NOUN", "nsubj", 2),
        ("praised", "praise", "VERB", "root", 0),
        (_title(i1), i1, "PROPN", "compound", 4),
        (_title(i2), i2, "PROPN", "dobj", 2),
        (",", ",", "PUNCT", "punct", 4),
        ("a", "a", "DET", "det", 7),
        ("song", "song", "NOUN", "appos", 4),
        ("written", "write", "VERB", "acl", 7),
        ("by", "by", "ADP", "prep", 8),
        (_title(a1), a1, "PROPN", "compound", 11),
        (_title(a2), a2, "PROPN", "pobj", 9),
        (".", ".", "PUNCT", "punct", 2),
    ])


def _trap_song(word: str, url: str, sid: str) -> ParsedSentence:
    # "The {word} of the song was praised by critics ."
    return _sent(url, sid, [
        ("The", "the", "DET", "det", 2),
        (word, word, "NOUN", "nsubjpass", 7),
        ("of", "of", "ADP", "prep", 2),
        ("the", "the", "DET", "det", 5),
        ("song", "song", "NOUN", "pobj", 3),
        ("was", "be", "AUX", "auxpass", 7),
        ("praised", "praise", "VERB", "root", 0),
        ("by", "by", "ADP", "agent", 7),
        ("critics", "critic", "NOUN", "pobj", 8),
        (".", ".", "PUNCT", "punct", 7),
    ])


def _trap_album(word: str, url: str, sid: str) -> ParsedSentence:
    # "Critics said the {word} overshadowed the album ."
    return _sent(url, sid, [
        ("Critics", "critic", "NOUN", "nsubj", 2),
        ("said", "say", "VERB", "root", 0),
        ("the", "the", "DET", "det", 4),
        (word, word, "NOUN", "nsubj", 5),
        ("overshadowed", "overshadow", "VERB", "ccomp", 2),
        ("the", "the", "DET", "det", 7),
        ("album", "album", "NOUN", "dobj", 5),
        (".", ".", "PUNCT", "punct", 2),
    ])


def build_noise_world(n_pages: int = 250, seed: int = 7) -> SynthWorld:
    """A corpus of ``n_pages`` song pages, four sentences each: two that
    express the page's KB facts and two traps built around planted
    ambiguous words."""
    rng = random.Random(seed)
    item_names = rng.sample([(a, n) for a in _ADJECTIVES for n in _NOUNS], n_pages)
    artist_names = rng.sample([(f, l) for f in _FIRST_NAMES for l in _LAST_NAMES], n_pages)

    facts: list[Fact] = []
    denotations: dict[str, set[str]] = {
        SONG_CLASS: {"song"},
        ALBUM_CLASS: {"album"},
    }
    signatures = {
        INSTANCE_OF: RelationSignature(INSTANCE_OF, "*", "*"),
        AUTHOR_OF: RelationSignature(AUTHOR_OF, "*", PERSON_CLASS),
    }
    for word in _SONG_TRAPS:
        entity = f"trap_{word}"
        denotations[entity] = {word}
        facts.append(Fact(entity, INSTANCE_OF, SONG_CLASS))
    for word in _ALBUM_TRAPS:
        entity = f"trap_{word}"
        denotations[entity] = {word}
        facts.append(Fact(entity, INSTANCE_OF, ALBUM_CLASS))

    url_map: dict[str, str] = {}
    corpus: dict[str, list[ParsedSentence]] = {}
    truth: dict[tuple[str, str], frozenset] = {}

    for i in range(n_pages):
        item_id = f"item_{i:03d}"
        artist_id = f"artist_{i:03d}"
        item = item_names[i]
        artist = artist_names[i]
        url = f"https://example.org/wiki/{item[0]}_{item[1]}"

        denotations[item_id] = {f"{_title(item[0])} {_title(item[1])}"}
        denotations[artist_id] = {f"{_title(artist[0])} {_title(artist[1])}"}
        facts.append(Fact(item_id, INSTANCE_OF, SONG_CLASS))
        facts.append(Fact(item_id, AUTHOR_OF, artist_id))
        facts.append(Fact(artist_id, INSTANCE_OF, PERSON_CLASS))
        url_map[url] = item_id

        expressed = frozenset({(item_id, INSTANCE_OF, SONG_CLASS), (item_id, AUTHOR_OF, artist_id)})
        sentences = [
            _tp1(item, artist, url, "s1"),
            _tp2(item, artist, url, "s2"),
            _trap_song(rng.choice(_SONG_TRAPS), url, "s3"),
            _trap_album(rng.choice(_ALBUM_TRAPS), url, "s4"),
        ]
        corpus[url] = sentences
        truth[(url, "s1")] = expressed
        truth[(url, "s2")] = expressed
        truth[(url, "s3")] = frozenset()
        truth[(url, "s4")] = frozenset()

    lemmas = {t.lemma for doc in corpus.values() for s in doc for t in s.tokens}
    brown_paths = {lemma: _word_bits(lemma) for lemma in sorted(lemmas)}
    return SynthWorld(facts, denotations, signatures, url_map, corpus, truth, brown_paths)


def write_world(world: SynthWorld, directory: str | Path) -> None:
    """Write the world in the pipeline's on-disk formats (plus the truth
    file used only by the audit)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    with open(directory / "triples.tsv", "w", encoding="utf-8") as fh:
        fh.write("# subject\trelation\tobject\n")
        for f in sorted(world.facts, key=lambda f: (f.subject, f.relation, f.object)):
            fh.write(f"{f.subject}\t{f.relation}\t{f.object}\n")

    with open(directory / "denotations.tsv", "w", encoding="utf-8") as fh:
        for entity in sorted(world.denotations):
            for surface in sorted(world.denotations[entity]):
                fh.write(f"{entity}\t{surface}\n")

    with open(directory / "signatures.tsv", "w", encoding="utf-8") as fh:
        for rel in sorted(world.signatures):
            sig = world.signatures[rel]
            fh.write(f"{rel}\t{sig.left_class}\t{sig.right_class}\t{1 if sig.is_literal else 0}\n")

    with open(directory / "urlmap.tsv", "w", encoding="utf-8") as fh:
        for url in sorted(world.url_map):
            fh.write(f"{url}\t{world.url_map[url]}\n")

    write_corpus(world.corpus, directory / "corpus.conllu")

    with open(directory / "truth.jsonl", "w", encoding="utf-8") as fh:
        for (url, sid) in sorted(world.truth):
            facts = sorted(world.truth[(url, sid)])
            fh.write(json.dumps({"doc_url": url, "sent_id": sid, "facts": [list(f) for f in facts]}) + "\n")

    with open(directory / "brown.tsv", "w", encoding="utf-8") as fh:
        for word in sorted(world.brown_paths):
            fh.write(f"{world.brown_paths[word]}\t{word}\t100\n")


def read_truth(path: str | Path) -> dict[tuple[str, str], frozenset]:
    truth: dict[tuple[str, str], frozenset] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            truth[(d["doc_url"], d["sent_id"])] = frozenset(tuple(f) for f in d["facts"])
    return truth


_SIGNAL_PATH = ("X/0000/PROPN/nsubj/>", "locate/0110/VERB/root", "in/1101/ADP/prep/<", "Y/0000/PROPN/pobj/<")
_NOISE_PATHS = [
    ("X/0000/PROPN/nsubj/>", "visit/0100/VERB/root", "Y/0000/PROPN/dobj/<"),
    ("X/0000/PROPN/nsubj/>", "mention/1100/VERB/root", "near/1001/ADP/prep/<", "Y/0000/PROPN/pobj/<"),
    ("X/0000/PROPN/dobj", "Y/0000/PROPN/appos/<"),
    ("X/0000/PROPN/nsubj/>", "follow/0010/VERB/root", "after/1011/ADP/prep/<", "Y/0000/PROPN/pobj/<"),
]
_FILLER = ["the/0001/DET/det/>", "also/0111/ADV/advmod/>", "old/0011/ADJ/amod/<", "famous/0011/ADJ/amod/<"]


def make_signal_examples(n: int = 5000, seed: int = 11, positive_rate: float = 0.4) -> list[FeatureExample]:
    """Examples whose label is exactly "the support path is the signal
    pattern". Entity tokens are unique per example so models must learn
    the path, not the entities."""
    rng = random.Random(seed)
    examples = []
    for i in range(n):
        positive = rng.random() < positive_rate
        path = list(_SIGNAL_PATH) if positive else list(rng.choice(_NOISE_PATHS))
        features = [f"Entity_{i}a/{_word_bits(f'x{i}', 4)}"]
        if rng.random() < 0.5:
            features.append(rng.choice(_FILLER))
        features.extend(path)
        if rng.random() < 0.3:
            features.append(rng.choice(_FILLER))
        features.append(f"Entity_{i}b/{_word_bits(f'y{i}', 4)}")
        examples.append(
            FeatureExample(features=features, label=int(positive), x=f"e{i}a", y=f"e{i}b", relation="located_in")
        )
    return examples

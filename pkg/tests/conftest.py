from pathlib import Path

import pytest

from relex.conllu import ParsedSentence, Token
from relex.features import BrownClusters
from relex.kb_store import load_kb

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def kb_small():
    kb, report = load_kb(
        str(DATA / "kb_small" / "triples.tsv"),
        str(DATA / "kb_small" / "denotations.tsv"),
        str(DATA / "kb_small" / "signatures.tsv"),
        str(DATA / "kb_small" / "urlmap.tsv"),
    )
    return kb


@pytest.fixture(scope="session")
def golden_clusters():
    return BrownClusters.load(str(DATA / "brown_golden.tsv"))


def make_sentence(rows, doc_url="https://example.org/doc", sent_id="s1") -> ParsedSentence:
    """rows: (form, lemma, upos, deprel, head) tuples, 1-based heads."""
    tokens = tuple(
        Token(i + 1, form, lemma, upos, head, deprel)
        for i, (form, lemma, upos, deprel, head) in enumerate(rows)
    )
    return ParsedSentence(tokens, doc_url, sent_id)


def fisher_sentence_1(doc_url="https://example.org/wiki/Carrie_Fisher") -> ParsedSentence:
    """Hand-built parse of the first example sentence; the tree is
    consistent with the documented feature rendering."""
    return make_sentence(
        [
            ("In", "in", "ADP", "prep", 5),
            ("1977", "1977", "NUM", "pobj", 1),
            (",", ",", "PUNCT", "punct", 5),
            ("Fisher", "fisher", "NOUN", "nsubj", 5),
            ("starred", "star", "VERB", "ROOT", 0),
            ("in", "in", "ADP", "prep", 5),
            ("George", "george", "PROPN", "compound", 8),
            ("Lucas", "lucas", "PROPN", "poss", 10),
            ("'", "'", "PART", "case", 8),
            ("film", "film", "NOUN", "pobj", 6),
            ("Star", "star", "NOUN", "appos", 10),
            ("Wars", "wars", "NOUN", "compound", 11),
        ],
        doc_url=doc_url,
        sent_id="cf1",
    )


def fisher_sentence_2(doc_url="https://example.org/wiki/Carrie_Fisher") -> ParsedSentence:
    # The APD tag on tokens 4 and 8 reproduces the source listing verbatim.
    return make_sentence(
        [
            ("Fisher", "fisher", "NOUN", "nsubj", 2),
            ("became", "become", "VERB", "ROOT", 0),
            ("known", "know", "VERB", "acomp", 2),
            ("for", "for", "APD", "prep", 3),
            ("playing", "play", "VERB", "pcomp", 4),
            ("Princess", "princess", "PROPN", "compound", 7),
            ("Leia", "leia", "PROPN", "dobj", 5),
            ("in", "in", "APD", "prep", 5),
            ("the", "the", "DET", "det", 10),
            ("Star", "star", "NOUN", "pobj", 8),
            ("Wars", "wars", "NOUN", "compound", 10),
            ("film", "film", "NOUN", "compound", 10),
            ("series", "series", "NOUN", "compound", 10),
        ],
        doc_url=doc_url,
        sent_id="cf2",
    )

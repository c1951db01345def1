import random

from relex_preprocess.engine import (
    lemmatize,
    parse_sentence,
    parse_text,
    split_sentences,
    tokenize,
)


def _tree_ok(rows):
    n = len(rows)
    roots = sum(1 for r in rows if r.head == 0)
    if roots != 1:
        return False
    for i in range(n):
        seen = {i}
        node = i
        while rows[node].head != 0:
            node = rows[node].head - 1
            if node in seen or not 0 <= node < n:
                return False
            seen.add(node)
    return True


def test_tokenize():
    assert tokenize("Forget Her is a song.") == ["Forget", "Her", "is", "a", "song", "."]
    assert tokenize("don't stop") == ["don't", "stop"]
    assert tokenize("(1977)") == ["(", "1977", ")"]


def test_sentence_split():
    text = "First one. Second one! Third?\n\nFourth after a break."
    assert split_sentences(text) == ["First one.", "Second one!", "Third?", "Fourth after a break."]


def test_split_does_not_break_inside_lowercase():
    assert split_sentences("approx. value is fine.") == ["approx. value is fine."]


def test_lemmas():
    assert lemmatize("was", "AUX") == "be"
    assert lemmatize("songs", "NOUN") == "song"
    assert lemmatize("praised", "VERB") == "praise"
    assert lemmatize("written", "VERB") == "write"
    assert lemmatize("Critics", "NOUN") == "critic"
    assert lemmatize("glass", "NOUN") == "glass"  # no -ss stripping


def test_copular_sentence_structure():
    rows = parse_sentence("Forget Her is a song by Jeff Buckley.")
    assert _tree_ok(rows)
    root = next(r for r in rows if r.head == 0)
    assert root.form == "song"
    by = next(r for r in rows if r.form == "by")
    assert by.deprel == "prep" and rows[by.head - 1].form == "song"
    buckley = next(r for r in rows if r.form == "Buckley")
    assert buckley.deprel == "pobj" and rows[buckley.head - 1].form == "by"


def test_verbal_sentence_structure():
    rows = parse_sentence("Critics praised the song.")
    assert _tree_ok(rows)
    root = next(r for r in rows if r.head == 0)
    assert root.form == "praised"
    subject = next(r for r in rows if r.form == "Critics")
    assert subject.deprel == "nsubj"


def test_empty_and_whitespace():
    assert parse_text("") == []
    assert parse_text("   \n\n\t ") == []


def test_every_sentence_gets_one_root_fuzz():
    """Arbitrary text must still produce structurally valid trees."""
    rng = random.Random(5)
    words = [
        "the", "a", "song", "album", "by", "in", "was", "is", "praised", "and",
        "Maria", "Keller", "1977", ",", ".", "!", "very", "famous", "который",
        "--", "(", ")", "it", "they", "recorded", "never", "q", "x1",
    ]
    for _ in range(300):
        text = " ".join(rng.choice(words) for _ in range(rng.randint(1, 30)))
        for rows in parse_text(text):
            assert _tree_ok(rows), text

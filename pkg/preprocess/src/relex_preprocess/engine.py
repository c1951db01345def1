"""Self-contained rule-based tokenizer, tagger, and dependency engine.

The downstream pipeline is format-contracted, not parser-contracted: it
needs contiguous token ids, one root per sentence, and plausible
lemma/UPOS/deprel columns. This engine guarantees the structural part by
construction (with a repair pass) and approximates the linguistic part
with closed-class lexicons and suffix heuristics. Swap in a trained
parser by implementing the same ``parse_text`` signature.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

ENGINE_NAME = "builtin-rule-ud"
ENGINE_VERSION = "1.0"

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:'[A-Za-z]+)?|[^\sA-Za-z0-9]")
_SENT_SPLIT_RE = re.compile(r"(?<=[.!?])\s+(?=[A-Z\"'(])")

_DET = {"the", "a", "an", "this", "that", "these", "those", "each", "every", "some", "any", "no"}
_ADP = {
    "in", "on", "at", "by", "of", "for", "with", "from", "to", "about", "into",
    "over", "under", "after", "before", "between", "during", "through", "near",
}
_AUX = {
    "is", "are", "was", "were", "be", "been", "being", "am",
    "has", "have", "had", "having", "do", "does", "did",
    "will", "would", "can", "could", "should", "may", "might", "must",
}
_PRON = {
    "he", "she", "it", "they", "we", "you", "i", "him", "her", "them", "us", "me",
    "his", "their", "its", "our", "your", "who", "which",
}
_CCONJ = {"and", "or", "but", "nor"}
_SCONJ = {"because", "although", "while", "if", "when", "that", "since"}
_ADV = {"also", "very", "never", "always", "often", "later", "early", "well", "not"}
_VERB_STEMS = {
    "praise", "record", "release", "write", "sing", "play", "perform", "produce",
    "feature", "include", "say", "make", "become", "overshadow", "star", "know",
    "direct", "compose", "found", "win", "receive", "describe", "call", "name",
    "follow", "base", "cover",
}
_IRREGULAR_LEMMAS = {
    "is": "be", "are": "be", "was": "be", "were": "be", "am": "be", "been": "be", "being": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do",
    "said": "say", "wrote": "write", "written": "write", "sang": "sing", "sung": "sing",
    "made": "make", "went": "go", "gave": "give", "took": "take", "knew": "know",
    "known": "know", "became": "become", "won": "win", "found": "find", "founded": "found",
    "men": "man", "women": "woman", "people": "person", "children": "child",
}


@dataclass(frozen=True)
class Row:
    form: str
    lemma: str
    upos: str
    head: int
    deprel: str


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def split_sentences(text: str) -> list[str]:
    parts = []
    for block in re.split(r"\n\s*\n", text):
        block = " ".join(block.split())
        if not block:
            continue
        parts.extend(s for s in _SENT_SPLIT_RE.split(block) if s.strip())
    return parts


def _tag_token(form: str, position: int) -> str:
    low = form.lower()
    if not any(c.isalnum() for c in form):
        return "PUNCT"
    if form.replace(",", "").replace(".", "").isdigit():
        return "NUM"
    if low in _DET:
        return "DET"
    if low in _AUX:
        return "AUX"
    if low in _ADP:
        return "ADP"
    if low in _PRON:
        return "PRON"
    if low in _CCONJ:
        return "CCONJ"
    if low in _SCONJ:
        return "SCONJ"
    if low in _ADV or (low.endswith("ly") and len(low) > 3):
        return "ADV"
    if low in _VERB_STEMS or _IRREGULAR_LEMMAS.get(low) in _VERB_STEMS | {"be", "have", "do", "say", "go"}:
        return "VERB"
    if low.endswith(("ed", "ing")) and len(low) > 4 and _verb_stem(low) in _VERB_STEMS:
        return "VERB"
    if position > 0 and form[:1].isupper():
        return "PROPN"
    return "NOUN"


def _verb_stem(low: str) -> str:
    for suffix in ("ing", "ed"):
        if low.endswith(suffix):
            stem = low[: -len(suffix)]
            if len(stem) > 2 and stem[-1] == stem[-2]:  # stopped -> stop
                stem = stem[:-1]
            if stem + "e" in _VERB_STEMS:  # praised -> praise
                return stem + "e"
            return stem
    return low


def lemmatize(form: str, upos: str) -> str:
    low = form.lower()
    if upos in ("PUNCT", "NUM"):
        return low
    if low in _IRREGULAR_LEMMAS:
        return _IRREGULAR_LEMMAS[low]
    if upos == "VERB":
        stem = _verb_stem(low)
        if stem != low:
            return stem
        if low.endswith("s") and not low.endswith("ss") and len(low) > 3:
            return low[:-1]
        return low
    if upos in ("NOUN", "PROPN") and low.endswith("s") and not low.endswith("ss") and len(low) > 3:
        return low[:-1]
    return low


def _noun_run_end(upos: list[str], i: int) -> int:
    j = i
    while j + 1 < len(upos) and upos[j + 1] in ("NOUN", "PROPN"):
        j += 1
    return j


def _choose_root(upos: list[str]) -> tuple[int, bool]:
    """Returns (root index 0-based, copular?). Prefer a finite verb; in a
    verbless copular clause the predicate noun run after the auxiliary
    heads the sentence."""
    for i, tag in enumerate(upos):
        if tag == "VERB":
            return i, False
    for i, tag in enumerate(upos):
        if tag == "AUX":
            for j in range(i + 1, len(upos)):
                if upos[j] in ("NOUN", "PROPN"):
                    return _noun_run_end(upos, j), True
            return i, False
    for i, tag in enumerate(upos):
        if tag in ("NOUN", "PROPN", "PRON"):
            return _noun_run_end(upos, i), False
    return 0, False


def _assign_heads(upos: list[str]) -> tuple[list[int], list[str]]:
    """1-based heads + deprels forming a rooted tree. Local attachment
    rules first, then a repair pass that reroutes anything out of range
    or cyclic to the root."""
    n = len(upos)
    root, copular = _choose_root(upos)
    heads = [0] * n
    deprels = ["dep"] * n
    deprels[root] = "root"

    def attach(i, head, deprel):
        if i != root:
            heads[i] = head + 1
            deprels[i] = deprel

    last_predicate = root
    i = 0
    subject_seen = False
    while i < n:
        tag = upos[i]
        if i == root:
            subject_seen = True
            i += 1
            continue
        if tag == "PUNCT":
            attach(i, root, "punct")
        elif tag in ("NOUN", "PROPN", "PRON"):
            end = _noun_run_end(upos, i)
            for k in range(i, end):
                attach(k, end, "compound")
            if end != root:
                prev = i - 1
                while prev >= 0 and upos[prev] in ("DET", "ADV"):
                    prev -= 1
                if prev >= 0 and upos[prev] == "ADP":
                    attach(end, prev, "pobj")
                elif not subject_seen and end < root:
                    attach(end, root, "nsubj")
                    subject_seen = True
                else:
                    attach(end, last_predicate, "dobj" if upos[last_predicate] == "VERB" else "appos")
            i = end + 1
            continue
        elif tag == "DET":
            j = i + 1
            while j < n and upos[j] in ("ADV", "DET"):
                j += 1
            if j < n and upos[j] in ("NOUN", "PROPN"):
                attach(i, _noun_run_end(upos, j), "det")
            else:
                attach(i, root, "det")
        elif tag == "ADP":
            attach(i, last_predicate, "prep")
        elif tag == "AUX":
            nxt = next((j for j in range(i + 1, n) if upos[j] == "VERB"), None)
            if copular and nxt is None:
                attach(i, root, "cop")
            elif nxt is not None:
                attach(i, nxt, "aux")
            else:
                attach(i, root, "aux")
        elif tag == "VERB":
            attach(i, root, "conj")
            last_predicate = i
        elif tag in ("CCONJ", "SCONJ"):
            attach(i, root, "cc")
        else:
            attach(i, root, "dep")
        if i == root:
            subject_seen = True
        i += 1

    _repair(heads, deprels, root)
    return [h for h in heads], deprels


def _repair(heads: list[int], deprels: list[str], root: int) -> None:
    n = len(heads)
    for i in range(n):
        if i == root:
            heads[i] = 0
            deprels[i] = "root"
        elif heads[i] == 0 or not 1 <= heads[i] <= n:
            heads[i] = root + 1
    for i in range(n):
        seen = {i}
        node = i
        while heads[node] != 0:
            node = heads[node] - 1
            if node in seen:  # cycle: cut it at the starting token
                heads[i] = root + 1
                if i == root:
                    heads[i] = 0
                break
            seen.add(node)


def parse_sentence(sentence: str) -> list[Row]:
    forms = tokenize(sentence)
    if not forms:
        return []
    upos = [_tag_token(form, i) for i, form in enumerate(forms)]
    heads, deprels = _assign_heads(upos)
    return [
        Row(form, lemmatize(form, tag), tag, head, deprel)
        for form, tag, head, deprel in zip(forms, upos, heads, deprels)
    ]


def parse_text(text: str) -> list[list[Row]]:
    return [rows for s in split_sentences(text) if (rows := parse_sentence(s))]

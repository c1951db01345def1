"""CoNLL-U corpus reading.

Only the columns the pipeline consumes are kept: FORM, LEMMA, UPOS,
HEAD, DEPREL. Documents are delimited by ``# newdoc id = <url>`` and
sentences by ``# sent_id = ...``. Multiword-token ranges (``1-2``) and
empty nodes (``1.1``) are skipped; the basic tree uses integer ids only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from relex.errors import DataError

logger = logging.getLogger(__name__)

NEWDOC_PREFIX = "# newdoc id = "
SENTID_PREFIX = "# sent_id = "


@dataclass(frozen=True)
class Token:
    index: int  # 1-based
    form: str
    lemma: str
    upos: str
    head: int  # 0 = root
    deprel: str


@dataclass(frozen=True)
class ParsedSentence:
    tokens: tuple[Token, ...]
    doc_url: str
    sent_id: str

    def __len__(self) -> int:
        return len(self.tokens)

    def token(self, index: int) -> Token:
        return self.tokens[index - 1]

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]


def _finish_sentence(rows, doc_url, sent_id, path, lineno) -> ParsedSentence:
    tokens = []
    root_count = 0
    for pos, (ln, cols) in enumerate(rows, start=1):
        idx = int(cols[0])
        if idx != pos:
            raise DataError(f"token ids not contiguous (saw {idx}, expected {pos})", path=path, line=ln)
        head = int(cols[6])
        if head < 0 or head > len(rows):
            raise DataError(f"head {head} out of range", path=path, line=ln)
        if head == 0:
            root_count += 1
        tokens.append(Token(idx, cols[1], cols[2], cols[3], head, cols[7]))
    if root_count != 1:
        raise DataError(
            f"sentence {sent_id!r} has {root_count} roots (need exactly 1)", path=path, line=lineno
        )
    return ParsedSentence(tuple(tokens), doc_url, sent_id)


def read_conllu(path: str | Path) -> list[ParsedSentence]:
    """Parse one file, which may contain several ``newdoc`` blocks."""
    path = str(path)
    sentences: list[ParsedSentence] = []
    doc_url: str | None = None
    sent_id: str | None = None
    auto_sent = 0
    rows: list[tuple[int, list[str]]] = []

    def flush(lineno: int):
        nonlocal rows, sent_id, auto_sent
        if not rows:
            sent_id = None
            return
        if doc_url is None:
            raise DataError("token rows before any '# newdoc id' line", path=path, line=rows[0][0])
        sid = sent_id
        if sid is None:
            auto_sent += 1
            sid = f"s{auto_sent}"
        sentences.append(_finish_sentence(rows, doc_url, sid, path, lineno))
        rows = []
        sent_id = None

    with open(path, encoding="utf-8") as fh:
        lineno = 0
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                flush(lineno)
                continue
            if line.startswith(NEWDOC_PREFIX):
                flush(lineno)
                doc_url = line[len(NEWDOC_PREFIX):].strip()
                auto_sent = 0
                continue
            if line.startswith(SENTID_PREFIX):
                sent_id = line[len(SENTID_PREFIX):].strip()
                continue
            if line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise DataError(f"expected 10 columns, got {len(cols)}", path=path, line=lineno)
            if "-" in cols[0] or "." in cols[0]:
                continue  # multiword-token range / empty node
            rows.append((lineno, cols))
        flush(lineno + 1)
    return sentences


def read_corpus(directory: str | Path) -> dict[str, list[ParsedSentence]]:
    """Read every ``*.conllu`` file under ``directory`` (sorted) and
    return sentences grouped by document URL."""
    corpus: dict[str, list[ParsedSentence]] = {}
    paths = sorted(Path(directory).glob("*.conllu"))
    if not paths:
        raise DataError(f"no .conllu files found in {directory}", path=str(directory))
    for p in paths:
        for sentence in read_conllu(p):
            corpus.setdefault(sentence.doc_url, []).append(sentence)
    logger.info("read %d documents from %s", len(corpus), directory)
    return corpus


def sentence_index(corpus: dict[str, list[ParsedSentence]]) -> dict[tuple[str, str], ParsedSentence]:
    return {(s.doc_url, s.sent_id): s for doc in corpus.values() for s in doc}


def sentence_to_conllu(sentence: ParsedSentence) -> str:
    """Render one sentence block (without the newdoc header)."""
    lines = [f"{SENTID_PREFIX}{sentence.sent_id}".rstrip()]
    lines.append("# text = " + " ".join(sentence.forms))
    for t in sentence.tokens:
        lines.append(
            "\t".join(
                (str(t.index), t.form, t.lemma, t.upos, "_", "_", str(t.head), t.deprel, "_", "_")
            )
        )
    return "\n".join(lines) + "\n"


def write_corpus(corpus: dict[str, list[ParsedSentence]], path: str | Path) -> None:
    """Write documents into a single CoNLL-U file, sorted by URL."""
    with open(path, "w", encoding="utf-8") as fh:
        for url in sorted(corpus):
            fh.write(f"{NEWDOC_PREFIX}{url}\n")
            for sentence in corpus[url]:
                fh.write(sentence_to_conllu(sentence))
                fh.write("\n")

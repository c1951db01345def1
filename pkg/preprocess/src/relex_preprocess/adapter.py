"""Raw page files to CoNLL-U documents.

Input: ``<name>.txt`` with ``# url = ...`` on the first line and plain
text after it. Output: one ``<name>.conllu`` per page in the downstream
pipeline's corpus format. Pages whose URL is missing from the KB url map
(when one is supplied) are warned about and skipped, as are pages the
engine fails on; nothing is dropped silently.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from relex_preprocess import engine

logger = logging.getLogger(__name__)

LOCKFILE_NAME = "parser.lock"


@dataclass
class RawPage:
    url: str
    text: str


@dataclass
class ConversionSummary:
    written: int = 0
    skipped_unmatched: int = 0
    skipped_failed: int = 0
    empty: int = 0
    problems: list = field(default_factory=list)


def read_raw_page(path: Path) -> RawPage:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# url = "):
            raise ValueError(f"{path}: first line must be '# url = ...'")
        return RawPage(url=first[len("# url = "):].strip(), text=fh.read())


def load_url_map(path: str | Path) -> dict[str, str]:
    urls: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) == 2:
                urls[cols[0]] = cols[1]
    return urls


def check_engine_lock(lock_path: str | Path) -> None:
    """The golden tests downstream are only stable if the parser stays
    pinned; refuse to run against a different engine version."""
    expected = f"{engine.ENGINE_NAME}=={engine.ENGINE_VERSION}"
    pinned = Path(lock_path).read_text(encoding="utf-8").strip()
    if pinned != expected:
        raise RuntimeError(f"parser lock mismatch: lockfile has {pinned!r}, engine is {expected!r}")


def write_lockfile(lock_path: str | Path) -> None:
    Path(lock_path).write_text(f"{engine.ENGINE_NAME}=={engine.ENGINE_VERSION}\n", encoding="utf-8")


def page_to_conllu(page: RawPage) -> str:
    lines = [f"# newdoc id = {page.url}"]
    for index, rows in enumerate(engine.parse_text(page.text), start=1):
        lines.append(f"# sent_id = s{index}")
        lines.append("# text = " + " ".join(r.form for r in rows))
        for i, r in enumerate(rows, start=1):
            lines.append(
                "\t".join((str(i), r.form, r.lemma, r.upos, "_", "_", str(r.head), r.deprel, "_", "_"))
            )
        lines.append("")
    return "\n".join(lines) + "\n"


def validate_structure(conllu_text: str) -> list[str]:
    """Structural CoNLL-U checks: contiguous integer ids from 1, heads in
    range, exactly one root per sentence."""
    problems = []
    sent_rows: list[list[str]] = []
    location = "?"

    def check():
        if not sent_rows:
            return
        n = len(sent_rows)
        roots = 0
        for expected, cols in enumerate(sent_rows, start=1):
            if int(cols[0]) != expected:
                problems.append(f"{location}: ids not contiguous at {cols[0]}")
            head = int(cols[6])
            if not 0 <= head <= n:
                problems.append(f"{location}: head {head} out of range")
            roots += head == 0
        if roots != 1:
            problems.append(f"{location}: {roots} roots")
        sent_rows.clear()

    for line in conllu_text.splitlines():
        if not line.strip():
            check()
        elif line.startswith("# sent_id = "):
            location = line[len("# sent_id = "):]
        elif not line.startswith("#"):
            cols = line.split("\t")
            if len(cols) != 10:
                problems.append(f"{location}: {len(cols)} columns")
            else:
                sent_rows.append(cols)
    check()
    return problems


def parse_pages(
    input_dir: str | Path,
    output_dir: str | Path,
    url_map: dict[str, str] | None = None,
) -> ConversionSummary:
    input_dir, output_dir = Path(input_dir), Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    summary = ConversionSummary()

    for path in sorted(input_dir.glob("*.txt")):
        try:
            page = read_raw_page(path)
        except (ValueError, OSError) as exc:
            logger.warning("skipping %s: %s", path.name, exc)
            summary.skipped_failed += 1
            summary.problems.append(str(exc))
            continue
        if url_map is not None and page.url not in url_map:
            logger.warning("skipping %s: url %s not in KB url map", path.name, page.url)
            summary.skipped_unmatched += 1
            continue
        try:
            conllu = page_to_conllu(page)
        except Exception as exc:  # engine failure must not kill the batch
            logger.warning("parser failed on %s: %s", path.name, exc)
            summary.skipped_failed += 1
            summary.problems.append(f"{path.name}: {exc}")
            continue
        structural = validate_structure(conllu)
        if structural:
            logger.warning("skipping %s: %s", path.name, "; ".join(structural))
            summary.skipped_failed += 1
            summary.problems.extend(structural)
            continue
        if "# sent_id" not in conllu:
            logger.warning("%s: page has no sentences", path.name)
            summary.empty += 1
        out = output_dir / (path.stem + ".conllu")
        tmp = out.with_suffix(".conllu.tmp")
        tmp.write_text(conllu, encoding="utf-8")
        tmp.replace(out)
        summary.written += 1

    logger.info(
        "converted %d pages (%d unmatched, %d failed, %d empty)",
        summary.written,
        summary.skipped_unmatched,
        summary.skipped_failed,
        summary.empty,
    )
    return summary

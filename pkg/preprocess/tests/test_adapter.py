import logging

import pytest

from relex_preprocess.adapter import (
    check_engine_lock,
    parse_pages,
    read_raw_page,
    validate_structure,
    write_lockfile,
)


def _write_page(directory, name, url, text):
    (directory / f"{name}.txt").write_text(f"# url = {url}\n{text}", encoding="utf-8")


def test_read_raw_page(tmp_path):
    _write_page(tmp_path, "p1", "https://x/p1", "Some text.")
    page = read_raw_page(tmp_path / "p1.txt")
    assert page.url == "https://x/p1"
    assert page.text == "Some text."


def test_read_raw_page_requires_url_header(tmp_path):
    (tmp_path / "bad.txt").write_text("no header here\n")
    with pytest.raises(ValueError):
        read_raw_page(tmp_path / "bad.txt")


def test_single_sentence_page(tmp_path):
    _write_page(tmp_path, "p1", "https://x/p1", "Critics praised the song.")
    summary = parse_pages(tmp_path, tmp_path / "out")
    assert summary.written == 1
    text = (tmp_path / "out" / "p1.conllu").read_text()
    assert text.startswith("# newdoc id = https://x/p1\n")
    assert text.count("# sent_id") == 1
    assert sum(1 for line in text.splitlines() if line.split("\t")[6:7] == ["0"]) == 1
    assert validate_structure(text) == []


def test_empty_text_page(tmp_path, caplog):
    _write_page(tmp_path, "void", "https://x/void", "")
    with caplog.at_level(logging.WARNING):
        summary = parse_pages(tmp_path, tmp_path / "out")
    assert summary.written == 1
    assert summary.empty == 1
    out = (tmp_path / "out" / "void.conllu").read_text()
    assert out == "# newdoc id = https://x/void\n"


def test_unmatched_urls_skipped_with_url_map(tmp_path):
    _write_page(tmp_path, "known", "https://x/known", "A song.")
    _write_page(tmp_path, "unknown", "https://x/unknown", "A song.")
    summary = parse_pages(tmp_path, tmp_path / "out", url_map={"https://x/known": "e1"})
    assert summary.written == 1
    assert summary.skipped_unmatched == 1
    assert not (tmp_path / "out" / "unknown.conllu").exists()


def test_malformed_page_counted_not_fatal(tmp_path):
    (tmp_path / "bad.txt").write_text("missing header\n")
    _write_page(tmp_path, "good", "https://x/good", "Fine text.")
    summary = parse_pages(tmp_path, tmp_path / "out")
    assert summary.written == 1
    assert summary.skipped_failed == 1
    assert summary.problems


def test_multi_sentence_document(tmp_path):
    _write_page(
        tmp_path, "p", "https://x/p",
        "Moonlit Anthem is a song by Maria Keller. Critics praised the song.",
    )
    summary = parse_pages(tmp_path, tmp_path / "out")
    assert summary.written == 1
    text = (tmp_path / "out" / "p.conllu").read_text()
    assert text.count("# sent_id") == 2
    assert validate_structure(text) == []


def test_validate_structure_catches_problems():
    bad = (
        "# newdoc id = u\n"
        "# sent_id = s1\n"
        "1\tA\ta\tX\t_\t_\t0\troot\t_\t_\n"
        "3\tB\tb\tX\t_\t_\t9\tdep\t_\t_\n"
        "\n"
    )
    problems = validate_structure(bad)
    assert any("contiguous" in p for p in problems)
    assert any("out of range" in p for p in problems)


def test_lockfile_round_trip(tmp_path):
    lock = tmp_path / "parser.lock"
    write_lockfile(lock)
    check_engine_lock(lock)  # no error
    lock.write_text("someother-engine==9.9\n")
    with pytest.raises(RuntimeError):
        check_engine_lock(lock)


def test_repo_lockfile_matches_engine():
    from pathlib import Path

    lock = Path(__file__).parent.parent / "parser.lock"
    check_engine_lock(lock)


def test_cli(tmp_path, capsys):
    from relex_preprocess.cli import main

    _write_page(tmp_path, "p1", "https://x/p1", "A quiet song.")
    out_dir = tmp_path / "out"
    code = main(["--in", str(tmp_path), "--out", str(out_dir)])
    assert code == 0
    assert (out_dir / "p1.conllu").exists()
    assert "1 documents written" in capsys.readouterr().out

import pytest

from relex.conllu import read_conllu, read_corpus, sentence_index, write_corpus
from relex.errors import DataError


def test_read_fixture(data_dir):
    sentences = read_conllu(data_dir / "corpus_small" / "forget_her.conllu")
    assert len(sentences) == 1
    s = sentences[0]
    assert s.doc_url == "https://example.org/wiki/Forget_Her"
    assert s.sent_id == "s1"
    assert s.forms == ["Forget", "Her", "is", "a", "song", "by", "Jeff", "Buckley", "."]
    assert s.token(5).head == 0
    assert s.token(2).deprel == "nsubj"


def test_read_corpus_groups_by_doc(data_dir):
    corpus = read_corpus(data_dir / "corpus_small")
    assert set(corpus) == {"https://example.org/wiki/Forget_Her"}
    idx = sentence_index(corpus)
    assert ("https://example.org/wiki/Forget_Her", "s1") in idx


def test_missing_dir(tmp_path):
    with pytest.raises(DataError):
        read_corpus(tmp_path)


def _doc(body: str) -> str:
    return "# newdoc id = https://x/d\n# sent_id = s1\n" + body


def test_non_contiguous_ids_rejected(tmp_path):
    p = tmp_path / "bad.conllu"
    p.write_text(_doc("1\tA\ta\tX\t_\t_\t0\troot\t_\t_\n3\tB\tb\tX\t_\t_\t1\tdep\t_\t_\n\n"))
    with pytest.raises(DataError):
        read_conllu(p)


def test_two_roots_rejected(tmp_path):
    p = tmp_path / "bad.conllu"
    p.write_text(
        _doc("1\tA\ta\tX\t_\t_\t0\troot\t_\t_\n2\tB\tb\tX\t_\t_\t0\troot\t_\t_\n\n")
    )
    with pytest.raises(DataError):
        read_conllu(p)


def test_head_out_of_range_rejected(tmp_path):
    p = tmp_path / "bad.conllu"
    p.write_text(_doc("1\tA\ta\tX\t_\t_\t9\tdep\t_\t_\n\n"))
    with pytest.raises(DataError):
        read_conllu(p)


def test_tokens_before_newdoc_rejected(tmp_path):
    p = tmp_path / "bad.conllu"
    p.write_text("1\tA\ta\tX\t_\t_\t0\troot\t_\t_\n\n")
    with pytest.raises(DataError):
        read_conllu(p)


def test_multiword_ranges_and_empty_nodes_skipped(tmp_path):
    p = tmp_path / "mwt.conllu"
    p.write_text(
        _doc(
            "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
            "1\tde\tde\tADP\t_\t_\t2\tcase\t_\t_\n"
            "2\tel\tel\tDET\t_\t_\t0\troot\t_\t_\n"
            "2.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n\n"
        )
    )
    sentences = read_conllu(p)
    assert [t.form for t in sentences[0].tokens] == ["de", "el"]


def test_write_read_round_trip(tmp_path, data_dir):
    corpus = read_corpus(data_dir / "corpus_small")
    out = tmp_path / "out.conllu"
    write_corpus(corpus, out)
    again = read_corpus(tmp_path)
    assert again == corpus


def test_missing_sent_id_synthesized(tmp_path):
    p = tmp_path / "nosid.conllu"
    p.write_text(
        "# newdoc id = https://x/d\n"
        "1\tA\ta\tX\t_\t_\t0\troot\t_\t_\n\n"
        "1\tB\tb\tX\t_\t_\t0\troot\t_\t_\n\n"
    )
    sentences = read_conllu(p)
    assert [s.sent_id for s in sentences] == ["s1", "s2"]

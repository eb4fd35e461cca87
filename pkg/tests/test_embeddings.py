import numpy as np
import pytest
from hypothesis import given, strategies as st

from mhnurf.embeddings import (PAD_ID, UNK_ID, UNK_TOKEN, EmbeddingError, EmbeddingTable,
                               decode_facet, encode_facet, load_embeddings, save_embeddings)
from mhnurf.ingest import FacetDocument


def write(tmp_path, text):
    path = tmp_path / "emb.txt"
    path.write_text(text)
    return path


class TestLoad:
    def test_basic(self, tmp_path):
        table = load_embeddings(write(tmp_path, "a 1.0 0.0\nb 0.0 1.0"), 2)
        assert len(table) == 2
        assert table.lookup("a").tolist() == [1.0, 0.0]

    def test_absent_token_is_zero(self, tmp_path):
        table = load_embeddings(write(tmp_path, "a 1.0 0.0\nb 0.0 1.0"), 2)
        assert table.lookup("zzz").tolist() == [0.0, 0.0]

    def test_wrong_width_names_line(self, tmp_path):
        with pytest.raises(EmbeddingError, match=":2:"):
            load_embeddings(write(tmp_path, "a 1 0\nb 1 2 3\n"), 2)

    def test_non_numeric_names_line(self, tmp_path):
        with pytest.raises(EmbeddingError, match=":1:"):
            load_embeddings(write(tmp_path, "a 1 x\n"), 2)

    def test_first_occurrence_wins(self, tmp_path):
        table = load_embeddings(write(tmp_path, "a 1 1\n\na 2 2\n"), 2)
        assert len(table) == 1 and table.lookup("a").tolist() == [1.0, 1.0]

    def test_round_trip(self, tmp_path, tiny_table):
        save_embeddings(tiny_table, tmp_path / "t.txt")
        back = load_embeddings(tmp_path / "t.txt", 3)
        assert back.vocab == tiny_table.vocab
        np.testing.assert_array_equal(back.matrix, tiny_table.matrix)


def test_vectors_map_sentinels_to_zero(tiny_table):
    out = tiny_table.vectors(np.array([[0, PAD_ID, UNK_ID]]))
    np.testing.assert_array_equal(out[0, 0], tiny_table.lookup("error"))
    assert not out[0, 1:].any()


class TestEncode:
    def test_empty(self, tiny_table):
        enc = encode_facet(FacetDocument("content"), tiny_table, (3, 4))
        assert enc.ids.shape == (3, 4)
        assert not enc.token_mask.any() and not enc.sentence_mask.any()

    def test_single_sentence(self, tiny_table):
        enc = encode_facet(FacetDocument.of("content", [["error", "high"]]), tiny_table, (2, 4))
        assert enc.sentence_mask.tolist() == [True, False]
        assert enc.token_mask[0].tolist() == [True, True, False, False]
        assert enc.ids[0, :2].tolist() == [tiny_table.index("error"), tiny_table.index("high")]

    def test_truncation(self, tiny_table):
        doc = FacetDocument.of("content", [["error"], ["high"], ["slow"], ["runtime"], ["x"]])
        enc = encode_facet(doc, tiny_table, (3, 2))
        assert enc.sentence_mask.tolist() == [True, True, True]
        assert decode_facet(enc, tiny_table) == [["error"], ["high"], ["slow"]]

    def test_oov_stays_a_real_position(self, tiny_table):
        enc = encode_facet(FacetDocument.of("code", [["error", "zzz"]]), tiny_table, (1, 3))
        assert enc.token_mask[0].tolist() == [True, True, False]
        assert enc.ids[0, 1] == UNK_ID
        assert decode_facet(enc, tiny_table) == [["error", UNK_TOKEN]]

    @given(st.lists(st.lists(st.sampled_from(["error", "high", "slow", "q"]), min_size=1, max_size=6),
                    max_size=6),
           st.integers(1, 4), st.integers(1, 4))
    def test_masks_match_truncated_document(self, sents, max_s, max_t):
        table = EmbeddingTable.from_dict({"error": [1.0], "high": [2.0], "slow": [3.0]}, 1)
        enc = encode_facet(FacetDocument.of("content", sents), table, (max_s, max_t))
        kept = [[t if t in table else UNK_TOKEN for t in s[:max_t]] for s in sents[:max_s]]
        assert decode_facet(enc, table) == kept
        assert enc.sentence_mask.sum() == len(kept)
        assert (enc.ids[~enc.token_mask] == PAD_ID).all()
        assert not enc.token_mask[~enc.sentence_mask].any()


def test_table_validation():
    with pytest.raises(EmbeddingError):
        EmbeddingTable.from_dict({"a": [1.0, 2.0]}, 3)


def test_whitespace_tokens_cannot_be_saved(tmp_path):
    table = EmbeddingTable.from_dict({"awaiting response": [1.0]}, 1)
    with pytest.raises(EmbeddingError, match="awaiting response"):
        save_embeddings(table, tmp_path / "e.txt")

import numpy as np
import pytest

from catembed.corpus import NodeId, NodeKind, build_vocabulary
from catembed.embeddings import (
    EmbeddingIndex,
    init_embeddings,
    load_binary,
    load_embeddings,
    load_text,
    save_binary,
    save_text,
)
from catembed.errors import CorpusError, FormatError


@pytest.fixture
def small_setup():
    vocab = build_vocabulary(["alpha\tcat_a\tbeta", "beta\tcat_a,cat_b\talpha alpha"])
    table = init_embeddings(vocab.n_entities, vocab.n_categories, 5, seed=3)
    table.ent_in[0, 0] = 1.25e-7  # exercise scientific notation in the text format
    return vocab, table


class TestTextFormat:
    def test_round_trip(self, small_setup, tmp_path):
        vocab, table = small_setup
        path = tmp_path / "emb.txt"
        save_text(table, vocab, path)
        lines = path.read_text().splitlines()
        n_rows, dim = (int(x) for x in lines[0].split())
        assert n_rows == vocab.n_entities + vocab.n_categories
        assert dim == 5
        index = load_text(path)
        assert index.ent_labels == vocab.entity_labels()
        assert index.cat_labels == vocab.category_labels()
        # 6 significant digits survive the round trip at matching precision
        assert np.allclose(index.ent_vecs, table.ent_in, rtol=1e-5, atol=1e-12)

    def test_prefixes_present(self, small_setup, tmp_path):
        vocab, table = small_setup
        path = tmp_path / "emb.txt"
        save_text(table, vocab, path)
        body = path.read_text().splitlines()[1:]
        assert sum(line.startswith("e:") for line in body) == vocab.n_entities
        assert sum(line.startswith("c:") for line in body) == vocab.n_categories

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("not a header\n")
        with pytest.raises(FormatError):
            load_text(path)

    def test_missing_prefix_rejected(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("1 2\nalpha 0.5 0.5\n")
        with pytest.raises(FormatError):
            load_text(path)

    def test_row_count_mismatch_rejected(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("2 2\ne:alpha 0.5 0.5\n")
        with pytest.raises(FormatError):
            load_text(path)


class TestBinaryFormat:
    def test_round_trip_exact(self, small_setup, tmp_path):
        vocab, table = small_setup
        path = tmp_path / "emb.bin"
        save_binary(table, vocab, path)
        index = load_binary(path)
        assert index.ent_labels == vocab.entity_labels()
        assert np.array_equal(index.ent_vecs, table.ent_in)  # raw float64: exact
        assert np.array_equal(index.cat_vecs, table.cat_in)

    def test_same_header_line_as_text(self, small_setup, tmp_path):
        vocab, table = small_setup
        tpath, bpath = tmp_path / "emb.txt", tmp_path / "emb.bin"
        save_text(table, vocab, tpath)
        save_binary(table, vocab, bpath)
        assert bpath.read_bytes().split(b"\n", 1)[0] == tpath.read_bytes().split(b"\n", 1)[0]

    def test_truncated_rejected(self, small_setup, tmp_path):
        vocab, table = small_setup
        path = tmp_path / "emb.bin"
        save_binary(table, vocab, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(FormatError):
            load_binary(path)


class TestSniffing:
    def test_detects_both(self, small_setup, tmp_path):
        vocab, table = small_setup
        tpath, bpath = tmp_path / "a.txt", tmp_path / "a.bin"
        save_text(table, vocab, tpath)
        save_binary(table, vocab, bpath)
        assert np.allclose(load_embeddings(tpath).ent_vecs, table.ent_in, rtol=1e-5)
        assert np.array_equal(load_embeddings(bpath).ent_vecs, table.ent_in)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusError):
            load_embeddings(tmp_path / "nope.txt")


class TestEmbeddingIndex:
    def test_vector_lookup_by_node(self, small_setup):
        vocab, table = small_setup
        index = EmbeddingIndex.from_table(table, vocab)
        node = NodeId(NodeKind.CATEGORY, 1)
        assert np.array_equal(index.vector(node), table.cat_in[1])
        assert index.label(node) == vocab.category_label(1)

    def test_match_is_normalized(self, small_setup):
        vocab, table = small_setup
        index = EmbeddingIndex.from_table(table, vocab)
        assert index.match_entity("ALPHA") == vocab.entity_id("alpha")
        assert index.match_category("Cat A") == vocab.category_id("cat_a")

    def test_index_save_round_trip(self, small_setup, tmp_path):
        vocab, table = small_setup
        index = EmbeddingIndex.from_table(table, vocab)
        path = tmp_path / "again.bin"
        index.save_binary(path)
        again = load_binary(path)
        assert np.array_equal(again.ent_vecs, index.ent_vecs)
        assert again.cat_labels == index.cat_labels


class TestTableInvariants:
    def test_assert_finite_catches_nan(self):
        table = init_embeddings(3, 2, 4, seed=0)
        table.cat_in[1, 2] = np.nan
        with pytest.raises(CorpusError):
            table.assert_finite()

    def test_sizes_must_be_positive(self):
        with pytest.raises(CorpusError):
            init_embeddings(0, 1, 4, seed=0)

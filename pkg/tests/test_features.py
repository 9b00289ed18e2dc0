import random

import numpy as np
import pytest

from ddimine.corpus import TokenizedAbstract
from ddimine.errors import ValidationError
from ddimine.features import (
    EmbeddingTable,
    FeatureMatrix,
    build_count_matrix,
    build_embedding_matrix,
    build_vocab,
    count_vector,
    default_stopwords,
    embed_abstract,
    embed_sample,
    load_matrix,
    load_stopwords,
    load_vocab,
    save_matrix,
    save_vocab,
    undersample,
)
from ddimine.labeling import InteractionSample
from helpers import dense_matrix


def toka(aid, tokens, mentions=()):
    return TokenizedAbstract(aid, tuple(tokens), frozenset(mentions))


def sample_with(ids, c="c1", o="o1", label=0):
    return InteractionSample(c, o, label, None, frozenset(ids))


class TestBuildVocab:
    def test_tie_rule(self):
        # frequencies a:2 b:2 c:1; ties lexicographic -> ["a", "b"]
        abstracts = [toka("1", ["a", "a", "b"]), toka("2", ["b", "c"])]
        vocab = build_vocab(abstracts, top_k=2)
        assert vocab.words == [("a", 2), ("b", 2)]
        assert vocab.index == {"a": 0, "b": 1}

    def test_top_k_zero(self):
        vocab = build_vocab([toka("1", ["a"])], top_k=0)
        assert len(vocab) == 0

    def test_unlimited(self):
        abstracts = [toka("1", ["z", "y", "y"])]
        vocab = build_vocab(abstracts, top_k=None)
        assert vocab.words == [("y", 2), ("z", 1)]

    def test_empty_corpus(self):
        assert len(build_vocab([], top_k=5)) == 0

    def test_negative_top_k_rejected(self):
        with pytest.raises(ValidationError):
            build_vocab([], top_k=-1)

    def test_roundtrip(self, tmp_path):
        vocab = build_vocab([toka("1", ["b", "a", "b"])])
        save_vocab(vocab, tmp_path / "v.tsv")
        loaded = load_vocab(tmp_path / "v.tsv")
        assert loaded.words == vocab.words
        assert loaded.index == vocab.index


class TestCountVector:
    def test_empty_abstract_set_zero_vector(self):
        vocab = build_vocab([toka("1", ["dose"])])
        vec = count_vector(sample_with([]), {}, vocab)
        assert vec.entries == {} and vec.dims == 1

    def test_direct_count(self):
        abstracts = {"a1": toka("a1", ["dose", "dose", "response"])}
        vocab = build_vocab(abstracts.values())
        vec = count_vector(sample_with(["a1"]), abstracts, vocab)
        assert vec.entries == {vocab.index["dose"]: 2, vocab.index["response"]: 1}

    def test_out_of_vocab_ignored(self):
        abstracts = {"a1": toka("a1", ["dose", "rare"])}
        vocab = build_vocab([toka("t", ["dose"])])
        vec = count_vector(sample_with(["a1"]), abstracts, vocab)
        assert vec.entries == {0: 1}

    def test_dangling_abstract_id(self):
        vocab = build_vocab([toka("1", ["dose"])])
        with pytest.raises(ValidationError, match="unknown abstract"):
            count_vector(sample_with(["ghost"]), {}, vocab)

    def test_additivity(self):
        rng = random.Random(7)
        words = [f"w{i}" for i in range(30)]
        for _ in range(25):
            abstracts = {
                aid: toka(aid, [rng.choice(words) for _ in range(rng.randint(0, 40))])
                for aid in ("a1", "a2")
            }
            vocab = build_vocab(list(abstracts.values()), top_k=20)
            both = count_vector(sample_with(["a1", "a2"]), abstracts, vocab)
            first = count_vector(sample_with(["a1"]), abstracts, vocab)
            second = count_vector(sample_with(["a2"]), abstracts, vocab)
            merged = dict(first.entries)
            for col, val in second.entries.items():
                merged[col] = merged.get(col, 0) + val
            assert both.entries == merged
            # values are nonnegative integers; L1 norm = in-vocab occurrences
            assert all(v == int(v) and v > 0 for v in both.entries.values())
            in_vocab = sum(
                1
                for aid in ("a1", "a2")
                for t in abstracts[aid].tokens
                if t in vocab.index
            )
            assert sum(both.entries.values()) == in_vocab


class TestEmbeddings:
    def table(self):
        return EmbeddingTable({"x": np.array([1.0, 0.0]), "y": np.array([0.0, 2.0])})

    def test_load_and_width_validation(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("x 1.0 0.0\ny 0.0 2.0\n")
        table = EmbeddingTable.load(path)
        assert table.dim == 2
        path.write_text("x 1.0 0.0\ny 0.0\n")
        with pytest.raises(ValidationError):
            EmbeddingTable.load(path)

    def test_stopword_only_abstract(self):
        vec, misses = embed_abstract(toka("1", ["the", "and"]), self.table(), {"the", "and"})
        assert np.array_equal(vec, np.zeros(2))
        assert misses == 0

    def test_tf_weighted_sum(self):
        vec, misses = embed_abstract(toka("1", ["x", "x", "y"]), self.table(), set())
        assert np.array_equal(vec, np.array([2.0, 2.0]))
        assert misses == 0

    def test_misses_counted_distinct(self):
        vec, misses = embed_abstract(toka("1", ["x", "gone", "gone", "also"]), self.table(), set())
        assert misses == 2
        assert np.array_equal(vec, np.array([1.0, 0.0]))

    def test_token_order_invariance(self):
        rng = random.Random(3)
        tokens = ["x", "y", "x", "miss", "y", "y"]
        base, base_misses = embed_abstract(toka("1", tokens), self.table(), set())
        for _ in range(10):
            shuffled = tokens[:]
            rng.shuffle(shuffled)
            vec, misses = embed_abstract(toka("1", shuffled), self.table(), set())
            assert np.array_equal(vec, base) and misses == base_misses

    def test_sample_equals_brute_force_token_accumulation(self):
        rng = random.Random(5)
        table = EmbeddingTable(
            {f"t{i}": np.array([rng.gauss(0, 1) for _ in range(4)]) for i in range(12)}
        )
        stop = {"t0"}
        vocab_tokens = [f"t{i}" for i in range(15)]  # t12..t14 miss
        abstracts = {
            aid: toka(aid, [rng.choice(vocab_tokens) for _ in range(30)]) for aid in ("a1", "a2", "a3")
        }
        s = sample_with(["a1", "a2", "a3"])
        got, misses = embed_sample(s, abstracts, table, stop)

        # oracle: accumulate tf per abstract separately, then sum term by term
        expected = np.zeros(4)
        expected_misses = 0
        for aid in s.abstract_ids:
            tf = {}
            for t in abstracts[aid].tokens:
                if t not in stop:
                    tf[t] = tf.get(t, 0) + 1
            for t, count in tf.items():
                if t in table.vectors:
                    expected += count * table.vectors[t]
                else:
                    expected_misses += 1
        assert np.allclose(got, expected, atol=1e-12)
        assert misses == expected_misses

    def test_empty_sample_zero(self):
        vec, misses = embed_sample(sample_with([]), {}, self.table(), set())
        assert np.array_equal(vec, np.zeros(2)) and misses == 0

    def test_dangling_id(self):
        with pytest.raises(ValidationError):
            embed_sample(sample_with(["ghost"]), {}, self.table(), set())


class TestMatrixBuilders:
    def test_count_matrix_rows_in_sample_order(self):
        abstracts = {"a1": toka("a1", ["dose", "dose"]), "a2": toka("a2", ["response"])}
        vocab = build_vocab(list(abstracts.values()))
        samples = [
            sample_with(["a1"], c="c1", o="o1", label=1),
            sample_with(["a2"], c="c1", o="o2", label=0),
            sample_with([], c="c1", o="o3", label=0),
        ]
        m = build_count_matrix(samples, abstracts, vocab)
        assert m.keys == ["c1|o1", "c1|o2", "c1|o3"]
        assert m.X.toarray().tolist() == [[2.0, 0.0], [0.0, 1.0], [0.0, 0.0]]
        assert m.y.tolist() == [1, 0, 0]

    def test_drop_empty(self):
        abstracts = {"a1": toka("a1", ["dose"])}
        vocab = build_vocab(list(abstracts.values()))
        samples = [sample_with(["a1"]), sample_with([], o="o2")]
        m = build_count_matrix(samples, abstracts, vocab, drop_empty=True)
        assert m.n_rows == 1

    def test_jobs_parallel_identical(self):
        rng = random.Random(9)
        words = [f"w{i}" for i in range(50)]
        abstracts = {
            f"a{i}": toka(f"a{i}", [rng.choice(words) for _ in range(30)]) for i in range(20)
        }
        vocab = build_vocab(list(abstracts.values()))
        samples = [
            sample_with(rng.sample(sorted(abstracts), rng.randint(0, 5)), o=f"o{i}")
            for i in range(30)
        ]
        seq = build_count_matrix(samples, abstracts, vocab, jobs=1)
        par = build_count_matrix(samples, abstracts, vocab, jobs=4)
        assert (seq.X != par.X).nnz == 0
        assert seq.keys == par.keys

    def test_embedding_matrix(self):
        table = EmbeddingTable({"x": np.array([1.0, 0.0]), "y": np.array([0.0, 1.0])})
        abstracts = {"a1": toka("a1", ["x", "y", "gone"])}
        samples = [sample_with(["a1"], label=1)]
        m, misses = build_embedding_matrix(samples, abstracts, table, set())
        assert m.X.tolist() == [[1.0, 1.0]]
        assert misses == 1


class TestUndersample:
    def test_balances_and_keeps_minority(self):
        m = dense_matrix(np.arange(8).reshape(4, 2), [1, 0, 0, 0])
        out = undersample(m, seed=3)
        assert out.y.tolist().count(1) == out.y.tolist().count(0) == 1
        assert "s0000" in out.keys  # the single positive always survives

    def test_already_balanced_unchanged(self):
        m = dense_matrix(np.arange(8).reshape(4, 2), [1, 0, 1, 0])
        out = undersample(m, seed=1)
        assert out.keys == m.keys
        assert np.array_equal(out.X, m.X)

    def test_single_class_rejected(self):
        m = dense_matrix(np.arange(4).reshape(2, 2), [1, 1])
        with pytest.raises(ValidationError):
            undersample(m, seed=0)

    def test_deterministic_and_rows_bit_exact(self):
        rng = random.Random(13)
        for trial in range(20):
            n = rng.randint(3, 40)
            X = np.array([[rng.gauss(0, 1) for _ in range(3)] for _ in range(n)])
            y = [1] * rng.randint(1, n - 1)
            y += [0] * (n - len(y))
            rng.shuffle(y)
            m = dense_matrix(X, y)
            a = undersample(m, seed=trial)
            b = undersample(m, seed=trial)
            assert a.keys == b.keys
            assert np.array_equal(a.X, b.X)
            n_pos = sum(a.y == 1)
            assert n_pos == sum(a.y == 0) == min(sum(m.y), len(m.y) - sum(m.y))
            for key, row in zip(a.keys, a.X):
                orig = m.keys.index(key)
                assert np.array_equal(row, m.X[orig])
            # original order preserved among survivors
            assert [m.keys.index(k) for k in a.keys] == sorted(m.keys.index(k) for k in a.keys)


class TestMatrixPersistence:
    def test_sparse_roundtrip(self, tmp_path):
        abstracts = {"a1": toka("a1", ["dose", "dose", "response"])}
        vocab = build_vocab(list(abstracts.values()))
        m = build_count_matrix([sample_with(["a1"], label=1), sample_with([], o="o2")], abstracts, vocab)
        save_matrix(m, tmp_path / "m.txt", {"config_digest": "abc"})
        loaded, header = load_matrix(tmp_path / "m.txt")
        assert header["config_digest"] == "abc"
        assert loaded.keys == m.keys
        assert loaded.kind == "counts"
        assert (loaded.X != m.X).nnz == 0
        assert np.array_equal(loaded.y, m.y)

    def test_dense_roundtrip(self, tmp_path):
        m = dense_matrix([[0.125, -3.5], [1e-9, 2.0]], [1, 0], kind="embeddings")
        save_matrix(m, tmp_path / "m.txt")
        loaded, _ = load_matrix(tmp_path / "m.txt")
        assert np.array_equal(loaded.X, m.X)
        assert loaded.kind == "embeddings"


def test_stopword_files(tmp_path):
    words = default_stopwords()
    assert "the" in words and "and" in words
    assert all(w == w.lower() for w in words)
    path = tmp_path / "stop.txt"
    path.write_text("The\nof\n\n# comment\n")
    assert load_stopwords(path) == {"the", "of"}

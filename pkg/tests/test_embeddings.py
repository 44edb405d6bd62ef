import logging

import numpy as np
import pytest

from xlalign.embeddings import (
    EmbeddingFormatError,
    EmbeddingMatrix,
    NormState,
    Vocabulary,
    center,
    center_then_normalize,
    l2_normalize,
    load_text_embeddings,
    save_text_embeddings,
)
from xlalign.baselines import MappingMatrix

from conftest import write_vectors


def test_load_basic(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("2 3\ncat 1 0 0\ndog 0 1 0\n")
    E = load_text_embeddings(p)
    assert E.vocab.words == ("cat", "dog")
    assert E.vectors.shape == (2, 3)
    assert E.norm_state is NormState.RAW
    np.testing.assert_array_equal(E.vectors, [[1, 0, 0], [0, 1, 0]])


def test_load_max_vocab(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("2 3\ncat 1 0 0\ndog 0 1 0\n")
    E = load_text_embeddings(p, max_vocab=1)
    assert E.vocab.words == ("cat",)


def test_duplicates_skipped(tmp_path, caplog):
    p = tmp_path / "v.txt"
    p.write_text("3 2\ncat 1 0\ncat 5 5\ndog 0 1\n")
    with caplog.at_level(logging.WARNING):
        E = load_text_embeddings(p)
    assert E.vocab.words == ("cat", "dog")
    np.testing.assert_array_equal(E.vectors[0], [1, 0])
    assert "duplicate" in caplog.text
    assert len(set(E.vocab.words)) == len(E.vocab)


def test_duplicates_do_not_count_toward_max_vocab(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("4 2\ncat 1 0\ncat 5 5\ndog 0 1\nemu 1 1\n")
    E = load_text_embeddings(p, max_vocab=2)
    assert E.vocab.words == ("cat", "dog")


def test_trailing_space_rows(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("1 2\ncat 0.5 0.25 \n")
    assert load_text_embeddings(p).vectors.tolist() == [[0.5, 0.25]]


@pytest.mark.parametrize(
    "content",
    [
        "garbage\ncat 1 0\n",
        "2 x\ncat 1 0\n",
        "1 3\ncat 1 0\n",
        "2 2\ncat 1 0\ndog 1 0 3\n",
        "0 2\n",
        "1 2\ncat 1 zz\n",
    ],
)
def test_load_errors(tmp_path, content):
    p = tmp_path / "v.txt"
    p.write_text(content)
    with pytest.raises(EmbeddingFormatError):
        load_text_embeddings(p)


def test_load_is_deterministic(tmp_path, rng):
    p = write_vectors(tmp_path / "v.txt", [f"w{i}" for i in range(20)], rng.standard_normal((20, 5)))
    a, b = load_text_embeddings(p), load_text_embeddings(p)
    assert a.vectors.tobytes() == b.vectors.tobytes()
    assert a.vocab == b.vocab


def test_vocabulary_bijection():
    v = Vocabulary(["a", "b", "c"])
    assert [v.index(w) for w in v] == [0, 1, 2]
    with pytest.raises(ValueError):
        Vocabulary(["a", "a"])


def test_vectors_are_read_only():
    E = EmbeddingMatrix.from_arrays(["a"], [[1.0, 2.0]])
    with pytest.raises(ValueError):
        E.vectors[0, 0] = 3.0


def test_l2_normalize_examples():
    E = EmbeddingMatrix.from_arrays(["a", "b"], [[3.0, 4.0], [0.6, 0.8]])
    N = l2_normalize(E)
    np.testing.assert_allclose(N.vectors[0], [0.6, 0.8], atol=1e-15)
    np.testing.assert_allclose(N.vectors[1], [0.6, 0.8], atol=1e-12)
    assert N.norm_state is NormState.L2_NORMALIZED


def test_l2_normalize_random(rng):
    E = EmbeddingMatrix.from_arrays([str(i) for i in range(100)], rng.standard_normal((100, 16)) * 7)
    norms = np.sqrt((l2_normalize(E).vectors ** 2).sum(axis=1))
    assert np.all(np.abs(norms - 1) <= 1e-6)


def test_zero_rows_flagged():
    E = EmbeddingMatrix.from_arrays(["a", "b"], [[0.0, 0.0], [1.0, 1.0]])
    N = l2_normalize(E)
    assert N.zero_rows == {0}
    np.testing.assert_array_equal(N.vectors[0], [0, 0])
    assert list(N.valid_rows()) == [1]


def test_normalize_requires_raw():
    N = l2_normalize(EmbeddingMatrix.from_arrays(["a"], [[1.0, 1.0]]))
    with pytest.raises(ValueError):
        l2_normalize(N)
    with pytest.raises(ValueError):
        center_then_normalize(N)


def test_center_then_normalize_examples():
    E = EmbeddingMatrix.from_arrays(["a", "b"], [[1.0, 0.0], [-1.0, 0.0]])
    np.testing.assert_allclose(center_then_normalize(E).vectors, [[1, 0], [-1, 0]])
    E = EmbeddingMatrix.from_arrays(["a", "b"], [[2.0, 0.0], [0.0, 0.0]])
    C = center_then_normalize(E)
    np.testing.assert_allclose(C.vectors, [[1, 0], [-1, 0]])
    assert C.norm_state is NormState.CENTERED_L2_NORMALIZED


def test_centered_intermediate_has_zero_mean(rng):
    V = rng.standard_normal((300, 12)) * 3 + 5
    means = center(V).mean(axis=0)
    assert np.all(np.abs(means) <= 1e-10 * np.abs(V).max(axis=0))


def test_save_load_roundtrip(tmp_path, rng):
    E = EmbeddingMatrix.from_arrays(["é", "b", "c"], rng.standard_normal((3, 4)))
    p = tmp_path / "out.txt"
    save_text_embeddings(E, p, precision=6)
    L = load_text_embeddings(p)
    assert L.vocab.words == E.vocab.words
    assert np.abs(L.vectors - E.vectors).max() < 1e-5


def test_save_mapped_roundtrip(tmp_path, rng):
    X = rng.standard_normal((10, 4))
    W = MappingMatrix(rng.standard_normal((4, 4)))
    E = EmbeddingMatrix.from_arrays([f"w{i}" for i in range(10)], W.apply(X))
    p = tmp_path / "mapped.txt"
    save_text_embeddings(E, p)
    assert np.abs(load_text_embeddings(p).vectors - X @ W.w.T).max() < 1e-5


def test_save_refuses_empty(tmp_path):
    E = EmbeddingMatrix(Vocabulary([]), np.zeros((0, 3)))
    p = tmp_path / "empty.txt"
    with pytest.raises(ValueError):
        save_text_embeddings(E, p)
    assert not p.exists()

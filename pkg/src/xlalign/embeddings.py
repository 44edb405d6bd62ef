"""Loading, normalizing and saving word vectors in the text vector format.

The format is the usual fastText/word2vec text layout: a header line
``N d`` followed by one line per word, ``word v1 ... vd``.
"""

from __future__ import annotations

import enum
import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ZERO_NORM_TOL = 1e-12


class EmbeddingFormatError(ValueError):
    """Raised when a vector file does not follow the text vector format."""


class NormState(str, enum.Enum):
    RAW = "raw"
    L2_NORMALIZED = "l2_normalized"
    CENTERED_L2_NORMALIZED = "centered_l2_normalized"


class Vocabulary:
    """Ordered, duplicate-free list of words with a reverse index."""

    __slots__ = ("_words", "_index")

    def __init__(self, words: Iterable[str]):
        self._words = tuple(words)
        self._index = {w: i for i, w in enumerate(self._words)}
        if len(self._index) != len(self._words):
            raise ValueError("vocabulary words must be unique")

    @property
    def words(self) -> tuple[str, ...]:
        return self._words

    def index(self, word: str) -> int:
        return self._index[word]

    def get(self, word: str, default=None):
        return self._index.get(word, default)

    def __contains__(self, word) -> bool:
        return word in self._index

    def __len__(self) -> int:
        return len(self._words)

    def __getitem__(self, i: int) -> str:
        return self._words[i]

    def __iter__(self):
        return iter(self._words)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._words == other._words

    def __hash__(self) -> int:
        return hash(self._words)

    def __repr__(self) -> str:
        return f"Vocabulary(n={len(self)})"


@dataclass(frozen=True)
class EmbeddingMatrix:
    """A vocabulary and its ``N x d`` matrix of word vectors.

    The vector array is made read-only on construction so that instances can
    be shared between workers.
    """

    vocab: Vocabulary
    vectors: np.ndarray
    norm_state: NormState = NormState.RAW
    zero_rows: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64, copy=True)
        if vectors.ndim != 2:
            raise ValueError(f"vectors must be 2-D, got shape {vectors.shape}")
        if vectors.shape[0] != len(self.vocab):
            raise ValueError(
                f"{vectors.shape[0]} vectors for a vocabulary of {len(self.vocab)} words"
            )
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "norm_state", NormState(self.norm_state))
        object.__setattr__(self, "zero_rows", frozenset(int(i) for i in self.zero_rows))

    @classmethod
    def from_arrays(cls, words: Sequence[str], vectors, **kwargs) -> "EmbeddingMatrix":
        return cls(Vocabulary(words), vectors, **kwargs)

    @property
    def n_words(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.n_words

    def valid_rows(self) -> np.ndarray:
        """Indices of rows that are not flagged as zero vectors."""
        mask = np.ones(self.n_words, dtype=bool)
        if self.zero_rows:
            mask[sorted(self.zero_rows)] = False
        return np.flatnonzero(mask)

    def head(self, n: int) -> "EmbeddingMatrix":
        """The first ``n`` words (the most frequent ones in sorted files)."""
        n = min(n, self.n_words)
        return EmbeddingMatrix(
            Vocabulary(self.vocab.words[:n]),
            self.vectors[:n],
            self.norm_state,
            frozenset(i for i in self.zero_rows if i < n),
        )


def load_text_embeddings(path: str | os.PathLike, max_vocab: int | None = None) -> EmbeddingMatrix:
    """Read word vectors from a text vector file.

    Parameters
    ----------
    path : path-like
        File starting with a ``N d`` header.
    max_vocab : int, optional
        Keep at most this many distinct words, in file order.

    Returns
    -------
    EmbeddingMatrix
        Raw (unnormalized) vectors.
    """
    if max_vocab is not None and max_vocab < 1:
        raise ValueError("max_vocab must be positive")
    words: list[str] = []
    seen: set[str] = set()
    rows: list[np.ndarray] = []
    with open(path, encoding="utf-8", newline="\n") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise EmbeddingFormatError(f"{path}: malformed header {header!r}")
        try:
            n_header, dim = int(header[0]), int(header[1])
        except ValueError:
            raise EmbeddingFormatError(f"{path}: malformed header {header!r}") from None
        if n_header < 0 or dim < 1:
            raise EmbeddingFormatError(f"{path}: malformed header {header!r}")
        limit = n_header if max_vocab is None else min(n_header, max_vocab)
        for lineno, line in enumerate(f, start=2):
            if len(words) >= limit:
                break
            parts = line.rstrip().split(" ")
            if not parts[0]:
                continue
            if len(parts) != dim + 1:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}"
                )
            word = parts[0]
            if word in seen:
                logger.warning("%s:%d: duplicate word %r skipped", path, lineno, word)
                continue
            try:
                rows.append(np.array(parts[1:], dtype=np.float64))
            except ValueError:
                raise EmbeddingFormatError(f"{path}:{lineno}: non-numeric value") from None
            seen.add(word)
            words.append(word)
    if not words:
        raise EmbeddingFormatError(f"{path}: empty vocabulary")
    return EmbeddingMatrix(Vocabulary(words), np.vstack(rows))


def _normalized_rows(vectors: np.ndarray) -> tuple[np.ndarray, frozenset]:
    norms = np.linalg.norm(vectors, axis=1)
    zero = norms < ZERO_NORM_TOL
    out = np.zeros_like(vectors)
    out[~zero] = vectors[~zero] / norms[~zero, None]
    return out, frozenset(np.flatnonzero(zero).tolist())


def _require_raw(E: EmbeddingMatrix) -> None:
    if E.norm_state is not NormState.RAW:
        raise ValueError(f"expected raw vectors, got {E.norm_state.value}")


def l2_normalize(E: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale each row to unit Euclidean norm.

    Rows whose norm is below 1e-12 are set to zero and recorded in
    ``zero_rows``.
    """
    _require_raw(E)
    vectors, zero_rows = _normalized_rows(E.vectors)
    if zero_rows:
        logger.warning("%d zero-norm rows flagged", len(zero_rows))
    return EmbeddingMatrix(E.vocab, vectors, NormState.L2_NORMALIZED, zero_rows)


def center(vectors: np.ndarray) -> np.ndarray:
    return vectors - vectors.mean(axis=0, keepdims=True)


def center_then_normalize(E: EmbeddingMatrix) -> EmbeddingMatrix:
    """Subtract the mean vector, then l2-normalize every row."""
    _require_raw(E)
    vectors, zero_rows = _normalized_rows(center(E.vectors))
    return EmbeddingMatrix(E.vocab, vectors, NormState.CENTERED_L2_NORMALIZED, zero_rows)


def save_text_embeddings(E: EmbeddingMatrix, path: str | os.PathLike, precision: int = 6) -> None:
    """Write ``E`` in the text vector format with ``precision`` decimals."""
    if E.n_words == 0:
        raise ValueError("refusing to write an empty embedding matrix")
    fmt = f"%.{precision}f"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{E.n_words} {E.dim}\n")
        for word, row in zip(E.vocab, E.vectors):
            f.write(word)
            f.write(" ")
            f.write(" ".join(fmt % v for v in row))
            f.write("\n")

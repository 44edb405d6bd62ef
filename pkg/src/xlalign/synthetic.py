"""Synthetic bilingual embedding pairs with a known alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingMatrix, NormState, Vocabulary
from .lexicon import BilingualLexicon


@dataclass(frozen=True)
class SyntheticPair:
    X: EmbeddingMatrix
    Y: EmbeddingMatrix
    Q: np.ndarray
    lexicon: BilingualLexicon  # word i <-> word i, for every word

    def split(self, n_train: int, n_test: int) -> tuple[BilingualLexicon, BilingualLexicon]:
        """Seed pairs on the first ``n_train`` words, test pairs on the next ``n_test``."""
        pairs = self.lexicon.pairs
        if n_train + n_test > len(pairs):
            raise ValueError("not enough words")
        return (BilingualLexicon(pairs[:n_train]),
                BilingualLexicon(pairs[n_train:n_train + n_test]))


def unit_rows(A: np.ndarray) -> np.ndarray:
    return A / np.linalg.norm(A, axis=1, keepdims=True)


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def planted_rotation(n_words: int, d: int, noise: float = 0.0, seed: int = 0) -> SyntheticPair:
    """Unit Gaussian source vectors and targets ``y_i = normalize(Q x_i + noise * g_i)``."""
    rng = np.random.default_rng(seed)
    X = unit_rows(rng.standard_normal((n_words, d)))
    Q = random_orthogonal(d, rng)
    Y = X @ Q.T
    if noise:
        Y = unit_rows(Y + noise * rng.standard_normal(Y.shape))
    return SyntheticPair(
        EmbeddingMatrix(Vocabulary(f"s{i}" for i in range(n_words)), X, NormState.L2_NORMALIZED),
        EmbeddingMatrix(Vocabulary(f"t{i}" for i in range(n_words)), Y, NormState.L2_NORMALIZED),
        Q,
        BilingualLexicon(tuple((i, i) for i in range(n_words))),
    )


def hub_fixture(n_words: int = 2000, d: int = 32, shared: float = 1.0, noise: float = 0.15,
                seed: int = 0) -> SyntheticPair:
    """Planted-rotation pair whose target space holds one extra hub word.

    Source vectors share a common direction ``u`` with weight ``shared``; the
    hub is the target ``Q u`` (last target row, word ``"hub"``), which sits
    close to many mapped sources and attracts plain nearest-neighbor search.
    """
    rng = np.random.default_rng(seed)
    u = unit_rows(rng.standard_normal((1, d)))[0]
    X = unit_rows(unit_rows(rng.standard_normal((n_words, d))) + shared * u)
    Q = random_orthogonal(d, rng)
    Y = unit_rows(X @ Q.T + noise * rng.standard_normal((n_words, d)))
    Y = np.vstack([Y, (Q @ u)[None]])
    return SyntheticPair(
        EmbeddingMatrix(Vocabulary(f"s{i}" for i in range(n_words)), X, NormState.L2_NORMALIZED),
        EmbeddingMatrix(Vocabulary([f"t{i}" for i in range(n_words)] + ["hub"]), Y,
                        NormState.L2_NORMALIZED),
        Q,
        BilingualLexicon(tuple((i, i) for i in range(n_words))),
    )

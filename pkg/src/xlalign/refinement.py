"""Iterative refinement: grow the lexicon from CSLS translations, refit Procrustes."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .baselines import MappingMatrix, procrustes_fit
from .embeddings import EmbeddingMatrix
from .lexicon import BilingualLexicon
from .retrieval import csls_scores_argmax, map_queries

logger = logging.getLogger(__name__)


class PairingRule(str, enum.Enum):
    BEST_INFERRED = "best_inferred"
    MUTUAL_CSLS = "mutual_csls"


@dataclass(frozen=True)
class RefinementConfig:
    rounds: int = 1
    candidate_pool_size: int = 10_000
    pairing_rule: PairingRule = PairingRule.MUTUAL_CSLS
    criterion_k: int = 10

    def __post_init__(self):
        object.__setattr__(self, "pairing_rule", PairingRule(self.pairing_rule))
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.candidate_pool_size < 0:
            raise ValueError("candidate_pool_size must be nonnegative")
        if self.criterion_k < 1:
            raise ValueError("criterion_k must be at least 1")


def _candidates(E, size):
    if isinstance(E, EmbeddingMatrix):
        rows = E.valid_rows()
        return rows[rows < size], E.vectors
    vectors = np.atleast_2d(np.asarray(E, dtype=np.float64))
    return np.arange(min(size, vectors.shape[0])), vectors


def induce_pairs(W, X, Y, config: RefinementConfig) -> list[tuple[int, int]]:
    """CSLS translations between the most frequent source and target words."""
    size = config.candidate_pool_size
    if size == 0:
        return []
    src_rows, Xv = _candidates(X, size)
    tgt_rows, Yv = _candidates(Y, size)
    k = config.criterion_k
    mapped = map_queries(W, Xv[src_rows])
    targets = Yv[tgt_rows]
    forward, _ = csls_scores_argmax(mapped, targets, mapped, k)
    pairs = [(int(src_rows[i]), int(tgt_rows[j])) for i, j in enumerate(forward)]
    if config.pairing_rule is PairingRule.MUTUAL_CSLS:
        # CSLS is symmetric, so the backward pass swaps the two sides
        backward, _ = csls_scores_argmax(targets, mapped, targets, k)
        pairs = [(int(src_rows[i]), int(tgt_rows[j]))
                 for i, j in enumerate(forward) if backward[j] == i]
    return pairs


def refine(W0: MappingMatrix, X, Y, seed_lex: BilingualLexicon,
           config: RefinementConfig | None = None) -> tuple[MappingMatrix, list[int]]:
    """Alternate lexicon augmentation and Procrustes refitting.

    Each round translates the ``candidate_pool_size`` most frequent source
    words with CSLS, keeps the pairs allowed by ``pairing_rule``, adds them to
    the seed pairs and refits. Returns the final map and the lexicon size
    after every round.
    """
    config = config or RefinementConfig()
    n_src = X.n_words if isinstance(X, EmbeddingMatrix) else len(X)
    n_tgt = Y.n_words if isinstance(Y, EmbeddingMatrix) else len(Y)
    if config.candidate_pool_size > min(n_src, n_tgt):
        raise ValueError(
            f"candidate pool of {config.candidate_pool_size} exceeds the vocabularies"
        )
    if seed_lex.n < 1:
        raise ValueError("refinement needs a nonempty seed lexicon")
    Xv = getattr(X, "vectors", X)
    Yv = getattr(Y, "vectors", Y)
    W = W0
    sizes = []
    for rnd in range(config.rounds):
        pairs = dict.fromkeys(seed_lex.pairs)
        pairs.update(dict.fromkeys(induce_pairs(W, X, Y, config)))
        lex = BilingualLexicon(tuple(pairs))
        assert set(seed_lex.pairs) <= set(lex.pairs)
        W = procrustes_fit(Xv[lex.src], Yv[lex.tgt])
        sizes.append(lex.n)
        logger.info("refinement round %d: %d pairs", rnd + 1, lex.n)
    return W, sizes

"""Bilingual dictionaries resolved against a pair of vocabularies."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .embeddings import Vocabulary

logger = logging.getLogger(__name__)


class LexiconError(ValueError):
    """Raised when a lexicon ends up empty or cannot be split."""


@dataclass(frozen=True)
class BilingualLexicon:
    """Ordered (source index, target index) pairs.

    ``pairs`` keeps duplicates and file order; ``eval_map`` groups every
    distinct source index with the set of its translations.
    """

    pairs: tuple[tuple[int, int], ...]
    coverage: float = 1.0
    skipped: int = 0
    eval_map: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pairs = tuple((int(s), int(t)) for s, t in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        eval_map: dict[int, set[int]] = {}
        for s, t in pairs:
            eval_map.setdefault(s, set()).add(t)
        object.__setattr__(self, "eval_map", {s: frozenset(ts) for s, ts in eval_map.items()})

    @property
    def n(self) -> int:
        return len(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def src(self) -> np.ndarray:
        return np.array([s for s, _ in self.pairs], dtype=np.int64)

    @property
    def tgt(self) -> np.ndarray:
        return np.array([t for _, t in self.pairs], dtype=np.int64)

    def sources(self) -> list[int]:
        """Distinct source indices in order of first appearance."""
        return list(self.eval_map)

    def head(self, size: int) -> "BilingualLexicon":
        """The first ``size`` pairs, in file order."""
        if size > self.n:
            raise LexiconError(f"requested {size} pairs, only {self.n} available")
        if size < 1:
            raise LexiconError("lexicon prefix must contain at least one pair")
        return BilingualLexicon(self.pairs[:size], self.coverage, self.skipped)

    def check_bounds(self, n_src: int, n_tgt: int) -> None:
        for s, t in self.pairs:
            if not (0 <= s < n_src and 0 <= t < n_tgt):
                raise LexiconError(f"pair ({s}, {t}) outside vocabulary bounds")


def from_word_pairs(
    word_pairs: Iterable[tuple[str, str]], src_vocab: Vocabulary, tgt_vocab: Vocabulary
) -> BilingualLexicon:
    pairs = []
    total = 0
    for s, t in word_pairs:
        total += 1
        i, j = src_vocab.get(s), tgt_vocab.get(t)
        if i is not None and j is not None:
            pairs.append((i, j))
    if not pairs:
        raise LexiconError("no lexicon pair found in both vocabularies")
    return BilingualLexicon(tuple(pairs), len(pairs) / total, total - len(pairs))


def load_lexicon(path: str | os.PathLike, src_vocab: Vocabulary, tgt_vocab: Vocabulary) -> BilingualLexicon:
    """Read a ``src_word tgt_word`` dictionary file.

    Pairs with an out-of-vocabulary word are dropped and reported through
    ``coverage`` and ``skipped``; malformed lines are skipped with a warning.
    """
    word_pairs = []
    n_lines = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            n_lines += 1
            if len(parts) != 2:
                logger.warning("%s:%d: expected 2 tokens, got %d; skipped", path, lineno, len(parts))
                continue
            word_pairs.append((parts[0], parts[1]))
    pairs = [
        (src_vocab.get(s), tgt_vocab.get(t))
        for s, t in word_pairs
    ]
    pairs = [(i, j) for i, j in pairs if i is not None and j is not None]
    if not pairs:
        raise LexiconError(f"{path}: no pair resolved against the vocabularies")
    lex = BilingualLexicon(tuple(pairs), len(pairs) / n_lines, n_lines - len(pairs))
    logger.info("%s: %d pairs, coverage %.3f", path, lex.n, lex.coverage)
    return lex


def split_validation(
    lex: BilingualLexicon, fraction: float = 0.1, seed: int = 0
) -> tuple[BilingualLexicon, BilingualLexicon]:
    """Hold out a fraction of the distinct source words.

    All translations of a source word stay on the same side. Pair order is
    preserved within each side.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    if lex.n < 2:
        raise LexiconError("need at least two pairs to split")
    sources = lex.sources()
    n_valid = math.floor(fraction * len(sources) + 0.5)
    if n_valid < 1 or n_valid > len(sources) - 1:
        raise LexiconError(
            f"fraction {fraction} of {len(sources)} source words leaves an empty side"
        )
    order = np.random.default_rng(seed).permutation(len(sources))
    valid_src = {sources[i] for i in order[:n_valid]}
    train = tuple(p for p in lex.pairs if p[0] not in valid_src)
    valid = tuple(p for p in lex.pairs if p[0] in valid_src)
    return (
        BilingualLexicon(train, lex.coverage, lex.skipped),
        BilingualLexicon(valid, lex.coverage, lex.skipped),
    )


def filter_exact_matches(
    lex: BilingualLexicon, src_vocab: Vocabulary, tgt_vocab: Vocabulary
) -> BilingualLexicon:
    """Drop pairs whose source and target words are the same string."""
    kept = tuple((s, t) for s, t in lex.pairs if src_vocab[s] != tgt_vocab[t])
    if not kept:
        raise LexiconError("every pair is an exact string match")
    return BilingualLexicon(kept, lex.coverage, lex.skipped)

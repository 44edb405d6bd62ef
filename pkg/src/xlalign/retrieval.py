"""Exact batched retrieval: top-k dot products, NN and CSLS translation.

All kernels work on candidate blocks and query chunks. Selection is exact and
ties always go to the lowest candidate index, so the results do not depend on
the block size or on the number of worker threads.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .baselines import ConstraintDomain, MappingMatrix
from .embeddings import EmbeddingMatrix

THREADS_ENV = "XLALIGN_THREADS"
_TARGET_BLOCK_ELEMENTS = 1 << 22
_QUERY_CHUNK = 1024


class Criterion(str, enum.Enum):
    NN = "nn"
    CSLS = "csls"


@dataclass(frozen=True)
class NeighborCache:
    """Mean similarity of each point to its ``k`` nearest pool rows."""

    r_values: np.ndarray
    k: int
    pool_size: int

    def __len__(self) -> int:
        return len(self.r_values)


@dataclass(frozen=True)
class TranslationResult:
    """Predicted target row per query.

    ``scores`` are similarity-sense criterion values: the dot product for
    ``nn`` and ``2 cos - r_Y - r_X`` (the negated CSLS loss) for ``csls``.
    """

    indices: np.ndarray
    scores: np.ndarray
    criterion: str
    query_indices: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.indices)

    def as_dict(self) -> dict[int, int]:
        if self.query_indices is None:
            raise ValueError("translation has no query indices")
        return dict(zip(self.query_indices.tolist(), self.indices.tolist()))


def default_workers() -> int:
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def _topk_positions(scores: np.ndarray, k: int) -> np.ndarray:
    """Column positions of the k largest entries of each row.

    Ties at the boundary go to the leftmost columns. Positions come back in
    ascending order.
    """
    m, b = scores.shape
    if k == b:
        return np.broadcast_to(np.arange(b), (m, b))
    kth = np.partition(scores, b - k, axis=1)[:, b - k]
    gt = scores > kth[:, None]
    eq = scores == kth[:, None]
    mask = gt | eq
    need = k - gt.sum(axis=1)
    tied = np.flatnonzero(eq.sum(axis=1) > need)
    if tied.size:
        # more boundary ties than free slots: keep the leftmost ones
        eq_t = eq[tied]
        mask[tied] = gt[tied] | (eq_t & (np.cumsum(eq_t, axis=1) <= need[tied, None]))
    return np.nonzero(mask)[1].reshape(m, k)


def _topk_chunk(Q, C, k, excluded, bias, scale, block_size):
    m, p = Q.shape[0], C.shape[0]
    best_idx = np.empty((m, 0), dtype=np.int64)
    best_val = np.empty((m, 0), dtype=np.result_type(Q, C))
    for start in range(0, p, block_size):
        stop = min(p, start + block_size)
        s = Q @ C[start:stop].T
        if scale != 1:
            s *= scale
        if bias is not None:
            s -= bias[start:stop]
        if excluded is not None:
            s[:, excluded[start:stop]] = -np.inf
        vals = np.concatenate([best_val, s], axis=1)
        idx = np.concatenate(
            [best_idx, np.broadcast_to(np.arange(start, stop), (m, stop - start))], axis=1
        )
        pos = _topk_positions(vals, min(k, vals.shape[1]))
        best_val = np.take_along_axis(vals, pos, axis=1)
        best_idx = np.take_along_axis(idx, pos, axis=1)
    # best_idx is index-ascending, so a stable sort puts lower indices first on ties
    order = np.argsort(-best_val, axis=1, kind="stable")
    return np.take_along_axis(best_idx, order, axis=1), np.take_along_axis(best_val, order, axis=1)


def _topk(Q, C, k, *, exclude=None, bias=None, scale=1.0, block_size=None, workers=None,
          dtype=np.float64):
    Q = np.atleast_2d(np.asarray(Q, dtype=dtype))
    C = np.atleast_2d(np.asarray(C, dtype=dtype))
    m, p = Q.shape[0], C.shape[0]
    excluded = None
    n_excluded = 0
    if exclude is not None and len(exclude):
        excluded = np.zeros(p, dtype=bool)
        excluded[np.fromiter(exclude, dtype=np.int64)] = True
        n_excluded = int(excluded.sum())
    if not 1 <= k <= p - n_excluded:
        raise ValueError(f"k={k} out of range for {p - n_excluded} candidates")
    if bias is not None:
        bias = np.asarray(bias, dtype=dtype)
    chunk = min(_QUERY_CHUNK, max(m, 1))
    if block_size is None:
        block_size = max(k, _TARGET_BLOCK_ELEMENTS // chunk)
    if block_size < 1:
        raise ValueError("block_size must be positive")
    workers = default_workers() if workers is None else workers
    starts = range(0, m, chunk)

    def run(start):
        return _topk_chunk(Q[start:start + chunk], C, k, excluded, bias, scale, block_size)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    if not parts:
        return np.empty((0, k), dtype=np.int64), np.empty((0, k), dtype=dtype)
    return np.vstack([i for i, _ in parts]), np.vstack([v for _, v in parts])


def top_k_dots(Q, C, k: int, exclude=None, block_size: int | None = None,
               workers: int | None = None, dtype=np.float64):
    """Exact top-``k`` candidates by dot product for every query row.

    Parameters
    ----------
    Q : (m, d) array_like
        Queries.
    C : (p, d) array_like
        Candidates.
    k : int
        Number of neighbors, ``1 <= k <= p - len(exclude)``.
    exclude : iterable of int, optional
        Candidate rows that may never be returned.
    block_size : int, optional
        Number of candidates scored at once. Does not change the result.
    workers : int, optional
        Threads used over query chunks. Defaults to ``$XLALIGN_THREADS`` or 1.

    Returns
    -------
    indices : (m, k) int ndarray
    dots : (m, k) ndarray
        Sorted by decreasing dot product, ties by increasing index.
    """
    return _topk(Q, C, k, exclude=exclude, block_size=block_size, workers=workers, dtype=dtype)


def mean_knn_similarity(points, pool, k: int, exclude=None, block_size=None, workers=None,
                        dtype=np.float64) -> NeighborCache:
    """Mean of the ``k`` largest cosines between each point and the pool rows."""
    _, vals = _topk(points, pool, k, exclude=exclude, block_size=block_size,
                    workers=workers, dtype=dtype)
    pool_size = np.atleast_2d(pool).shape[0] - (len(exclude) if exclude is not None else 0)
    return NeighborCache(vals.mean(axis=1), k, pool_size)


def normalize_rows(A: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    return np.divide(A, norms, out=np.zeros_like(A), where=norms > 0)


def map_queries(W, X) -> np.ndarray:
    """Apply ``W`` to the rows of ``X``; renormalize unless ``W`` is orthogonal."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if isinstance(W, MappingMatrix):
        mapped = W.apply(X)
        if W.constraint is ConstraintDomain.ORTHOGONAL:
            return mapped
        return normalize_rows(mapped)
    if W is None:
        return X
    return normalize_rows(X @ np.asarray(W, dtype=np.float64).T)


def _vectors(E):
    if isinstance(E, EmbeddingMatrix):
        return E.vectors, E.zero_rows
    return np.atleast_2d(np.asarray(E, dtype=np.float64)), frozenset()


def nn_translate(W, X_q, Y, *, query_indices=None, block_size=None, workers=None,
                 dtype=np.float64) -> TranslationResult:
    """Nearest-neighbor translation: ``argmax_j <W x_i, y_j>``.

    For unit-norm vectors this is the Euclidean nearest neighbor of ``W x_i``.
    Rows of ``Y`` flagged as zero vectors are never returned.
    """
    Yv, zero_rows = _vectors(Y)
    queries = map_queries(W, X_q)
    if Yv.shape[0] - len(zero_rows) < 1:
        raise ValueError("empty candidate set")
    idx, vals = _topk(queries, Yv, 1, exclude=zero_rows, block_size=block_size,
                      workers=workers, dtype=dtype)
    return TranslationResult(idx[:, 0], vals[:, 0], Criterion.NN,
                             None if query_indices is None else np.asarray(query_indices))


def csls_scores_argmax(queries, candidates, query_pool, k, *, cand_exclude=None,
                       pool_exclude=None, block_size=None, workers=None, dtype=np.float64):
    """CSLS retrieval on already mapped, unit-norm vectors.

    Returns ``(indices, scores)`` with ``scores = 2 cos - r_Y(q) - r_X(c)``
    where ``r_Y`` averages over the candidates and ``r_X`` over
    ``query_pool``.
    """
    r_y = mean_knn_similarity(queries, candidates, k, exclude=cand_exclude,
                              block_size=block_size, workers=workers, dtype=dtype)
    r_x = mean_knn_similarity(candidates, query_pool, k, exclude=pool_exclude,
                              block_size=block_size, workers=workers, dtype=dtype)
    idx, vals = _topk(queries, candidates, 1, exclude=cand_exclude, bias=r_x.r_values,
                      scale=2.0, block_size=block_size, workers=workers, dtype=dtype)
    return idx[:, 0], vals[:, 0] - r_y.r_values


def csls_translate(W, X_q, Y, X_pool, k: int = 10, *, query_indices=None, block_size=None,
                   workers=None, dtype=np.float64) -> TranslationResult:
    """CSLS translation of the mapped queries ``W x_i`` into ``Y``.

    ``r_Y`` is computed against all (non-flagged) rows of ``Y`` and ``r_X``
    of each candidate against the mapped source pool ``{W x : x in X_pool}``.
    """
    Yv, y_zero = _vectors(Y)
    Pv, p_zero = _vectors(X_pool)
    if Yv.shape[0] - len(y_zero) < 1 or Pv.shape[0] - len(p_zero) < 1:
        raise ValueError("empty pool")
    queries = map_queries(W, X_q)
    mapped_pool = map_queries(W, Pv)
    idx, scores = csls_scores_argmax(
        queries, Yv, mapped_pool, k, cand_exclude=y_zero, pool_exclude=p_zero,
        block_size=block_size, workers=workers, dtype=dtype,
    )
    return TranslationResult(idx, scores, Criterion.CSLS,
                             None if query_indices is None else np.asarray(query_indices))


def translate(criterion: str, W, X_q, Y, X_pool=None, k: int = 10, **kwargs) -> TranslationResult:
    criterion = Criterion(criterion)
    if criterion is Criterion.NN:
        return nn_translate(W, X_q, Y, **kwargs)
    if criterion is Criterion.CSLS:
        if X_pool is None:
            raise ValueError("csls needs a source pool")
        return csls_translate(W, X_q, Y, X_pool, k, **kwargs)
    raise ValueError(f"unknown criterion {criterion!r}")


def _cosines(v: np.ndarray, pool: np.ndarray) -> np.ndarray:
    return (pool @ v) / (np.linalg.norm(pool, axis=1) * np.linalg.norm(v))


def _mean_top_cos(v, pool, k):
    c = _cosines(v, pool)
    if not 1 <= k <= len(c):
        raise ValueError(f"k={k} out of range for a pool of {len(c)}")
    return np.sort(c)[::-1][:k].sum() / k


def csls_loss(x, y, Y_pool, X_pool, k: int) -> float:
    """CSLS dissimilarity between ``x`` and ``y`` (lower means closer).

    ``-2 cos(x, y)`` plus the mean cosine of ``x`` to its ``k`` nearest rows
    of ``Y_pool`` and of ``y`` to its ``k`` nearest rows of ``X_pool``.
    Swapping ``(x, Y_pool)`` with ``(y, X_pool)`` gives the same value
    bit for bit.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    Y_pool = np.atleast_2d(np.asarray(Y_pool, dtype=np.float64))
    X_pool = np.atleast_2d(np.asarray(X_pool, dtype=np.float64))
    cos_xy = (x @ y) / (np.linalg.norm(x) * np.linalg.norm(y))
    penalty = _mean_top_cos(x, Y_pool, k) + _mean_top_cos(y, X_pool, k)
    return float(penalty - 2 * cos_xy)

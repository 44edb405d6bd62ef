"""Relaxed CSLS (RCSLS) training by projected subgradient descent.

The loss for a seed pair ``(x_i, y_i)`` is

    -2 x_i^T W^T y_i
    + 1/k * sum of the k largest  x_i^T W^T y_j  over the target pool
    + 1/k * sum of the k largest  x_j^T W^T y_i  over the source pool

Each top-k sum is a maximum over k-subsets of linear functions of ``W``, so
the objective is convex and piecewise linear. The logSumExp variant replaces
each top-k average by ``log sum exp`` of the same k dot products.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from .baselines import ConstraintDomain, MappingMatrix, procrustes_fit
from .embeddings import EmbeddingMatrix
from .lexicon import BilingualLexicon, LexiconError
from .retrieval import top_k_dots

logger = logging.getLogger(__name__)

UNIT_NORM_TOL = 1e-6


class LossVariant(str, enum.Enum):
    LINEAR = "linear"
    LOG_SUM_EXP = "log_sum_exp"


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for RCSLS training and grid search.

    ``learning_rates`` and ``epochs_grid`` are searched by
    :func:`grid_search`; a single :func:`train_rcsls` run uses the first
    entry of each unless told otherwise. ``pool_size`` caps the extended
    neighbor pools to the most frequent words.
    """

    learning_rates: tuple[float, ...] = (1.0, 10.0, 25.0, 50.0)
    epochs_grid: tuple[int, ...] = (10, 20)
    k: int = 10
    constraint: ConstraintDomain = ConstraintDomain.UNCONSTRAINED
    extended_normalization: bool = True
    pool_size: int | None = None
    batch_size: int | None = None
    l2_reg: float = 0.0
    loss_variant: LossVariant = LossVariant.LINEAR
    seed: int = 0
    lr_halving: bool = True

    def __post_init__(self):
        object.__setattr__(self, "learning_rates", tuple(float(v) for v in self.learning_rates))
        object.__setattr__(self, "epochs_grid", tuple(int(v) for v in self.epochs_grid))
        object.__setattr__(self, "constraint", ConstraintDomain(self.constraint))
        object.__setattr__(self, "loss_variant", LossVariant(self.loss_variant))
        if not self.learning_rates or not self.epochs_grid:
            raise ValueError("learning-rate and epoch grids must be nonempty")
        if any(lr < 0 for lr in self.learning_rates):
            raise ValueError("learning rates must be nonnegative")
        if any(e < 1 for e in self.epochs_grid):
            raise ValueError("epoch counts must be positive")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.constraint is ConstraintDomain.ORTHOGONAL:
            raise ValueError("RCSLS supports the spectral_ball and unconstrained domains")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.pool_size is not None and self.pool_size < 1:
            raise ValueError("pool_size must be positive")
        if self.l2_reg < 0:
            raise ValueError("l2_reg must be nonnegative")

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["constraint"] = self.constraint.value
        d["loss_variant"] = self.loss_variant.value
        d["learning_rates"] = list(self.learning_rates)
        d["epochs_grid"] = list(self.epochs_grid)
        return d


@dataclass(frozen=True)
class NeighborPools:
    """Rows searched for the two neighbor-penalty terms.

    ``target_pool`` supplies the neighbors of mapped sources and
    ``source_pool`` (unmapped; mapped on the fly) the neighbors of targets.
    """

    target_pool: np.ndarray
    source_pool: np.ndarray

    @property
    def sizes(self) -> tuple[int, int]:
        return self.target_pool.shape[0], self.source_pool.shape[0]

    @classmethod
    def from_seeds(cls, X_n, Y_n) -> "NeighborPools":
        return cls(np.asarray(Y_n, dtype=np.float64), np.asarray(X_n, dtype=np.float64))

    @classmethod
    def build(cls, X, Y, lexicon: BilingualLexicon, extended: bool,
              pool_size: int | None = None) -> "NeighborPools":
        """Seed-only pools (distinct lexicon words) or full-vocabulary pools."""
        if extended:
            return cls(_pool_rows(Y, pool_size), _pool_rows(X, pool_size))
        Xv, Yv = _as_array(X), _as_array(Y)
        src = np.unique(lexicon.src)
        tgt = np.unique(lexicon.tgt)
        return cls(Yv[tgt], Xv[src])


@dataclass
class TrainTrace:
    objectives: list[float] = field(default_factory=list)
    best_objectives: list[float] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)
    spectral_norms: list[float] = field(default_factory=list)
    initial_objective: float = float("nan")
    projections: int = 0
    steps: int = 0
    batch_mode: str = "full"
    wall_time: float = 0.0

    @property
    def epochs(self) -> int:
        return len(self.objectives)

    @property
    def best_objective(self) -> float:
        if self.best_objectives:
            return self.best_objectives[-1]
        return self.initial_objective


def _as_array(E) -> np.ndarray:
    if isinstance(E, EmbeddingMatrix):
        return E.vectors
    return np.atleast_2d(np.asarray(E, dtype=np.float64))


def _pool_rows(E, pool_size):
    if isinstance(E, EmbeddingMatrix):
        rows = E.valid_rows()
        vectors = E.vectors
    else:
        vectors = _as_array(E)
        rows = np.flatnonzero(np.linalg.norm(vectors, axis=1) > 0)
    if pool_size is not None:
        rows = rows[rows < pool_size]
    return vectors[rows]


def _check_unit_rows(A: np.ndarray, name: str) -> None:
    err = np.abs(np.linalg.norm(A, axis=1) - 1).max(initial=0.0)
    if err > UNIT_NORM_TOL:
        raise ValueError(f"{name} rows must be unit-norm (max deviation {err:.3g})")


def _penalty(dots: np.ndarray, variant: LossVariant) -> tuple[np.ndarray, np.ndarray]:
    """Per-row penalty over the k active dots and its weights on them."""
    if variant is LossVariant.LINEAR:
        k = dots.shape[1]
        return dots.sum(axis=1) / k, np.full_like(dots, 1.0 / k)
    return logsumexp(dots, axis=1), softmax(dots, axis=1)


def _neighbors(W, X_n, Y_n, pools: NeighborPools, k: int):
    if k > min(pools.sizes):
        raise ValueError(f"k={k} exceeds the pool sizes {pools.sizes}")
    idx_y, _ = top_k_dots(X_n @ W.T, pools.target_pool, k)
    idx_x, _ = top_k_dots(Y_n, pools.source_pool @ W.T, k)
    return idx_y, idx_x


def _value_and_grad(W, X_n, Y_n, pools, k, variant, l2_reg=0.0, neighbors=None, grad=True):
    W = np.asarray(W, dtype=np.float64)
    X_n = np.atleast_2d(X_n)
    Y_n = np.atleast_2d(Y_n)
    n = X_n.shape[0]
    if n < 1:
        raise LexiconError("empty training lexicon")
    idx_y, idx_x = _neighbors(W, X_n, Y_n, pools, k) if neighbors is None else neighbors
    mapped = X_n @ W.T
    near_y = pools.target_pool[idx_y]              # (n, k, d) targets near W x_i
    near_x = pools.source_pool[idx_x]              # (n, k, d) sources whose W x_j is near y_i
    dots_y = np.einsum("nd,nkd->nk", mapped, near_y)
    dots_x = np.einsum("nd,nkd->nk", Y_n, near_x @ W.T)
    pen_y, w_y = _penalty(dots_y, variant)
    pen_x, w_x = _penalty(dots_x, variant)
    attract = np.einsum("nd,nd->n", mapped, Y_n)
    value = float(np.mean(-2 * attract + pen_y + pen_x))
    if l2_reg:
        value += l2_reg * float(np.sum(W * W))
    if not grad:
        return value, None
    y_bar = np.einsum("nk,nkd->nd", w_y, near_y)
    x_bar = np.einsum("nk,nkd->nd", w_x, near_x)
    G = (-2 * Y_n.T @ X_n + y_bar.T @ X_n + Y_n.T @ x_bar) / n
    if l2_reg:
        G += 2 * l2_reg * W
    return value, G


def rcsls_objective(W, X_n, Y_n, pools: NeighborPools, k: int = 10,
                    variant=LossVariant.LINEAR, l2_reg: float = 0.0) -> float:
    """Mean RCSLS loss of ``W`` over the seed pairs ``(X_n[i], Y_n[i])``.

    Neighbors are the rows with the largest dot products, searched in
    ``pools`` at the given ``W``.
    """
    W = W.w if isinstance(W, MappingMatrix) else W
    return _value_and_grad(W, X_n, Y_n, pools, k, LossVariant(variant), l2_reg, grad=False)[0]


def rcsls_subgradient(W, X_n, Y_n, pools: NeighborPools, k: int = 10,
                      variant=LossVariant.LINEAR, l2_reg: float = 0.0) -> np.ndarray:
    """A subgradient of :func:`rcsls_objective` with respect to ``W``.

    The active linear piece of each top-k term is taken at the current
    neighbors; for logSumExp the neighbor terms are softmax-weighted.
    """
    W = W.w if isinstance(W, MappingMatrix) else W
    return _value_and_grad(W, X_n, Y_n, pools, k, LossVariant(variant), l2_reg)[1]


def neighbor_sums(W, X_n, Y_n, pools: NeighborPools, k: int = 10):
    """Unscaled top-k sums of the two neighbor-penalty terms, one per seed pair.

    Returns ``(sum_y, sum_x)`` where ``sum_y[i]`` adds the ``k`` largest
    ``x_i^T W^T y_j`` over the target pool and ``sum_x[i]`` the ``k`` largest
    ``x_j^T W^T y_i`` over the source pool. Sums are correctly rounded.
    """
    W = W.w if isinstance(W, MappingMatrix) else np.asarray(W, dtype=np.float64)
    X_n, Y_n = np.atleast_2d(X_n), np.atleast_2d(Y_n)
    _, dots_y = top_k_dots(X_n @ W.T, pools.target_pool, k)
    _, dots_x = top_k_dots(Y_n, pools.source_pool @ W.T, k)
    return (np.array([math.fsum(r) for r in dots_y]),
            np.array([math.fsum(r) for r in dots_x]))


def _project(M: np.ndarray) -> tuple[np.ndarray, float]:
    u, s, vt = np.linalg.svd(M)
    s = np.minimum(s, 1.0)
    return (u * s) @ vt, float(s[0])


def project_spectral(M) -> np.ndarray:
    """Euclidean projection onto the unit ball of the spectral norm.

    Singular values above one are clipped to one.
    """
    return _project(np.asarray(M, dtype=np.float64))[0]


def _train(X_n, Y_n, pools, config: TrainConfig, lr: float, checkpoints: Sequence[int]):
    _check_unit_rows(X_n, "source seed")
    _check_unit_rows(Y_n, "target seed")
    _check_unit_rows(pools.target_pool, "target pool")
    _check_unit_rows(pools.source_pool, "source pool")
    if config.k > min(pools.sizes):
        raise ValueError(f"k={config.k} exceeds the pool sizes {pools.sizes}")
    n = X_n.shape[0]
    if config.batch_size is not None and config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds the {n} training pairs")
    spectral = config.constraint is ConstraintDomain.SPECTRAL_BALL
    tag = ConstraintDomain.SPECTRAL_BALL if spectral else ConstraintDomain.UNCONSTRAINED
    rng = np.random.default_rng(config.seed)
    variant = config.loss_variant

    def value_and_grad(W, batch=None):
        if batch is None:
            return _value_and_grad(W, X_n, Y_n, pools, config.k, variant, config.l2_reg)
        return _value_and_grad(W, X_n[batch], Y_n[batch], pools, config.k, variant, config.l2_reg)

    t0 = time.perf_counter()
    W = procrustes_fit(X_n, Y_n).w.copy()
    trace = TrainTrace(batch_mode="full" if config.batch_size is None else f"minibatch:{config.batch_size}")
    # in full-batch mode the end-of-epoch evaluation also yields the next step's subgradient
    best_f, G = value_and_grad(W)
    trace.initial_objective = best_f
    best_W, best_G = W, G
    results = {}
    for epoch in range(1, max(checkpoints) + 1):
        if config.batch_size is None:
            batches = [None]
        else:
            perm = rng.permutation(n)
            batches = [perm[i:i + config.batch_size] for i in range(0, n, config.batch_size)]
        for batch in batches:
            if batch is not None:
                _, G = value_and_grad(W, batch)
            W = W - lr * G
            trace.steps += 1
            if spectral:
                W, sigma = _project(W)
                trace.projections += 1
                trace.spectral_norms.append(sigma)
        f, G = value_and_grad(W)
        trace.objectives.append(f)
        if f < best_f:
            best_W, best_f, best_G = W, f, G
        elif config.lr_halving:
            lr /= 2
            W, G = best_W, best_G
        trace.best_objectives.append(best_f)
        trace.learning_rates.append(lr)
        logger.debug("epoch %d: objective %.6f (best %.6f, lr %g)", epoch, f, best_f, lr)
        if epoch in checkpoints:
            snapshot = dataclasses.replace(
                trace,
                objectives=list(trace.objectives),
                best_objectives=list(trace.best_objectives),
                learning_rates=list(trace.learning_rates),
                spectral_norms=list(trace.spectral_norms),
                wall_time=time.perf_counter() - t0,
            )
            results[epoch] = (MappingMatrix(best_W, tag), snapshot)
    return results


def seed_matrices(X, Y, lexicon: BilingualLexicon) -> tuple[np.ndarray, np.ndarray]:
    if lexicon.n < 1:
        raise LexiconError("empty training lexicon")
    return _as_array(X)[lexicon.src], _as_array(Y)[lexicon.tgt]


def train_rcsls(X, Y, lexicon: BilingualLexicon, pools: NeighborPools | None = None,
                config: TrainConfig | None = None, *, lr: float | None = None,
                epochs: int | None = None) -> tuple[MappingMatrix, TrainTrace]:
    """Fit ``W`` by projected subgradient descent on the RCSLS objective.

    Parameters
    ----------
    X, Y : EmbeddingMatrix or (N, d) arrays
        Unit-norm source and target vectors.
    lexicon : BilingualLexicon
        Seed pairs, resolved against ``X`` and ``Y``.
    pools : NeighborPools, optional
        Built from ``config`` when omitted.
    config : TrainConfig, optional
    lr, epochs : optional
        Override the first entries of the config grids.

    Returns
    -------
    mapping : MappingMatrix
        Iterate with the lowest full objective. Training starts at the
        Procrustes solution of the seed pairs.
    trace : TrainTrace
    """
    config = config or TrainConfig()
    lr = config.learning_rates[0] if lr is None else float(lr)
    epochs = config.epochs_grid[0] if epochs is None else int(epochs)
    if lr < 0 or epochs < 1:
        raise ValueError("need lr >= 0 and epochs >= 1")
    X_n, Y_n = seed_matrices(X, Y, lexicon)
    if pools is None:
        pools = NeighborPools.build(X, Y, lexicon, config.extended_normalization, config.pool_size)
    return _train(X_n, Y_n, pools, config, lr, [epochs])[epochs]


def grid_search(X, Y, train_lex: BilingualLexicon, valid_lex: BilingualLexicon,
                config: TrainConfig | None = None, pools: NeighborPools | None = None):
    """Train over the lr x epochs grid and keep the best CSLS P@1 on ``valid_lex``.

    Ties go to the lower learning rate, then to fewer epochs. Returns the
    winning config (with single-point grids) and its mapping.
    """
    from .evaluation import evaluate_mapping

    config = config or TrainConfig()
    X_n, Y_n = seed_matrices(X, Y, train_lex)
    if pools is None:
        pools = NeighborPools.build(X, Y, train_lex, config.extended_normalization, config.pool_size)
    epochs = sorted(set(config.epochs_grid))
    best = None
    for lr in sorted(set(config.learning_rates)):
        runs = _train(X_n, Y_n, pools, config, lr, epochs)
        for ep in epochs:
            mapping, _ = runs[ep]
            acc = evaluate_mapping(mapping, X, Y, valid_lex, "csls", config.k).accuracy
            logger.info("lr=%g epochs=%d: valid P@1 %.4f", lr, ep, acc)
            if best is None or acc > best[0]:
                best = (acc, lr, ep, mapping)
    _, lr, ep, mapping = best
    return dataclasses.replace(config, learning_rates=(lr,), epochs_grid=(ep,)), mapping

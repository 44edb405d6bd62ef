"""Closed-form alignment baselines and the mapping-matrix container."""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass

import numpy as np

ORTHOGONALITY_TOL = 1e-6
SPECTRAL_TOL = 1e-6


class ConstraintDomain(str, enum.Enum):
    ORTHOGONAL = "orthogonal"
    SPECTRAL_BALL = "spectral_ball"
    UNCONSTRAINED = "unconstrained"


@dataclass(frozen=True)
class MappingMatrix:
    """A ``d x d`` linear map ``W`` sending source vectors ``x`` to ``W x``.

    The constraint tag is checked on construction.
    """

    w: np.ndarray
    constraint: ConstraintDomain = ConstraintDomain.UNCONSTRAINED

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"mapping must be square, got shape {w.shape}")
        w.setflags(write=False)
        constraint = ConstraintDomain(self.constraint)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "constraint", constraint)
        if constraint is ConstraintDomain.ORTHOGONAL:
            err = np.abs(w.T @ w - np.eye(w.shape[0])).max()
            if err > ORTHOGONALITY_TOL:
                raise ValueError(f"mapping tagged orthogonal but |W^T W - I|_max = {err:.3g}")
        elif constraint is ConstraintDomain.SPECTRAL_BALL:
            sigma = np.linalg.norm(w, 2)
            if sigma > 1 + SPECTRAL_TOL:
                raise ValueError(f"mapping tagged spectral_ball but sigma_max = {sigma:.6g}")

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    @classmethod
    def identity(cls, d: int) -> "MappingMatrix":
        return cls(np.eye(d), ConstraintDomain.ORTHOGONAL)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Map the rows of ``X``: returns ``X W^T``."""
        return np.asarray(X) @ self.w.T

    def save(self, path: str | os.PathLike) -> None:
        """Write ``d`` then ``d`` rows of ``d`` floats at 17 significant digits."""
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"{self.dim}\n")
            for row in self.w:
                f.write(" ".join(f"{v:.17g}" for v in row))
                f.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike, constraint=None) -> "MappingMatrix":
        with open(path, encoding="utf-8") as f:
            lines = [line.split() for line in f if line.strip()]
        if not lines or len(lines[0]) != 1:
            raise ValueError(f"{path}: missing dimension header")
        d = int(lines[0][0])
        rows = lines[1:]
        if len(rows) != d or any(len(r) != d for r in rows):
            raise ValueError(f"{path}: expected {d} rows of {d} values")
        w = np.array(rows, dtype=np.float64)
        if constraint is None:
            constraint = infer_constraint(w)
        return cls(w, constraint)


def infer_constraint(w: np.ndarray) -> ConstraintDomain:
    """Tightest constraint domain that ``w`` satisfies."""
    if np.abs(w.T @ w - np.eye(w.shape[0])).max() <= ORTHOGONALITY_TOL:
        return ConstraintDomain.ORTHOGONAL
    if np.linalg.norm(w, 2) <= 1 + SPECTRAL_TOL:
        return ConstraintDomain.SPECTRAL_BALL
    return ConstraintDomain.UNCONSTRAINED


def _check_pairs(X, Y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or X.shape != Y.shape:
        raise ValueError(f"X and Y must be 2-D with equal shapes, got {X.shape} and {Y.shape}")
    if X.shape[0] < 1:
        raise ValueError("need at least one pair")
    return X, Y


def least_squares_fit(X, Y) -> MappingMatrix:
    """Unconstrained least-squares map minimizing ``mean ||W x_i - y_i||^2``.

    Solved through the normal equations ``(X^T X) W^T = X^T Y``; a
    pseudo-inverse is used when ``X^T X`` is rank deficient.
    """
    X, Y = _check_pairs(X, Y)
    gram = X.T @ X
    rhs = X.T @ Y
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        wt = np.linalg.pinv(gram) @ rhs
    else:
        wt = np.linalg.solve(gram, rhs)
    return MappingMatrix(wt.T, ConstraintDomain.UNCONSTRAINED)


def procrustes_fit(X, Y) -> MappingMatrix:
    """Orthogonal map ``W = U V^T`` where ``U D V^T`` is the SVD of ``Y^T X``."""
    X, Y = _check_pairs(X, Y)
    u, _, vt = np.linalg.svd(Y.T @ X)
    return MappingMatrix(u @ vt, ConstraintDomain.ORTHOGONAL)


def square_loss(w, X, Y) -> float:
    """``mean_i ||W x_i - y_i||^2``."""
    w = w.w if isinstance(w, MappingMatrix) else np.asarray(w)
    r = np.asarray(X) @ w.T - np.asarray(Y)
    return float(np.mean(np.sum(r * r, axis=1)))

"""Precision@1 evaluation, ablation sweeps and report formatting."""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .baselines import MappingMatrix, procrustes_fit
from .lexicon import BilingualLexicon, LexiconError
from .retrieval import Criterion, TranslationResult, translate

ORACLE_MAX_N = 20


@dataclass
class EvalReport:
    """Accuracy of one mapping under one retrieval criterion."""

    accuracy: float
    n_evaluated: int
    n_correct: int
    criterion: str
    k: int | None = None
    method: str = ""
    label: str = ""
    skipped_oov: int = 0
    config: dict = field(default_factory=dict)
    series: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "method": self.method,
            "criterion": self.criterion,
            "k": self.k,
            "accuracy": self.accuracy,
            "n_evaluated": self.n_evaluated,
            "n_correct": self.n_correct,
            "skipped_oov": self.skipped_oov,
            "config": self.config,
            "series": self.series,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def precision_at_1(predictions: TranslationResult, eval_lex: BilingualLexicon,
                   skipped_oov: int | None = None) -> EvalReport:
    """Fraction of distinct source words whose prediction is a listed translation."""
    if not eval_lex.eval_map:
        raise LexiconError("nothing to evaluate")
    predicted = predictions.as_dict()
    missing = [s for s in eval_lex.eval_map if s not in predicted]
    if missing:
        raise ValueError(f"{len(missing)} source words have no prediction")
    correct = sum(predicted[s] in ts for s, ts in eval_lex.eval_map.items())
    n = len(eval_lex.eval_map)
    return EvalReport(
        accuracy=correct / n,
        n_evaluated=n,
        n_correct=correct,
        criterion=Criterion(predictions.criterion).value,
        skipped_oov=eval_lex.skipped if skipped_oov is None else skipped_oov,
    )


def _vectors(E):
    return getattr(E, "vectors", E)


def evaluate_mapping(W, X, Y, eval_lex: BilingualLexicon, criterion="csls", k: int = 10,
                     X_pool=None, method: str = "", label: str = "", **kwargs) -> EvalReport:
    """Translate every source word of ``eval_lex`` and score it.

    Candidates are all (non-flagged) rows of ``Y``; the CSLS source pool
    defaults to all rows of ``X``.
    """
    queries = np.array(eval_lex.sources(), dtype=np.int64)
    result = translate(
        criterion, W, _vectors(X)[queries], Y, X if X_pool is None else X_pool, k,
        query_indices=queries, **kwargs,
    )
    report = precision_at_1(result, eval_lex)
    report.k = k if Criterion(criterion) is Criterion.CSLS else None
    report.method = method
    report.label = label
    return report


def _fit(method: str, X, Y, lex: BilingualLexicon, config):
    if method == "procrustes":
        return procrustes_fit(_vectors(X)[lex.src], _vectors(Y)[lex.tgt])
    if method == "rcsls":
        from .rcsls import TrainConfig, train_rcsls

        return train_rcsls(X, Y, lex, config=config or TrainConfig())[0]
    raise ValueError(f"unknown method {method!r}")


def lexicon_size_sweep(sizes: Sequence[int], method: str, X, Y, train_lex: BilingualLexicon,
                       test_lex: BilingualLexicon, config=None, criterion="csls",
                       k: int = 10, label: str = "") -> list[EvalReport]:
    """Train on growing prefixes of ``train_lex`` and evaluate each model."""
    sizes = [int(s) for s in sizes]
    if sizes != sorted(sizes):
        raise ValueError("sizes must be sorted ascending")
    if sizes and sizes[-1] > train_lex.n:
        raise LexiconError(f"size {sizes[-1]} exceeds the {train_lex.n} training pairs")
    reports = []
    for size in sizes:
        W = _fit(method, X, Y, train_lex.head(size), config)
        r = evaluate_mapping(W, X, Y, test_lex, criterion, k, method=method, label=label)
        r.config = {"lexicon_size": size}
        reports.append(r)
    return reports


def knn_sweep(ks: Sequence[int], X, Y, train_lex: BilingualLexicon, test_lex: BilingualLexicon,
              config=None, label: str = "") -> list[EvalReport]:
    """CSLS accuracy of Procrustes and RCSLS as the neighbor count varies.

    Procrustes only sees ``k`` through the retrieval criterion; RCSLS is
    retrained with the same ``k`` in its loss.
    """
    from .rcsls import TrainConfig

    config = config or TrainConfig()
    proc = _fit("procrustes", X, Y, train_lex, None)
    reports = []
    for k in ks:
        r = evaluate_mapping(proc, X, Y, test_lex, "csls", k, method="procrustes", label=label)
        r.config = {"k": k}
        reports.append(r)
        W = _fit("rcsls", X, Y, train_lex, dataclasses.replace(config, k=k))
        r = evaluate_mapping(W, X, Y, test_lex, "csls", k, method="rcsls", label=label)
        r.config = {"k": k}
        reports.append(r)
    return reports


def criterion_comparison(X, Y, test_lex: BilingualLexicon, mappings: Mapping[str, MappingMatrix],
                         k: int = 10, label: str = "") -> tuple[list[EvalReport], dict[str, float]]:
    """Evaluate each mapping under NN and CSLS; gaps are ``NN - CSLS``."""
    reports = []
    gaps = {}
    for method, W in mappings.items():
        nn = evaluate_mapping(W, X, Y, test_lex, "nn", k, method=method, label=label)
        csls = evaluate_mapping(W, X, Y, test_lex, "csls", k, method=method, label=label)
        reports += [nn, csls]
        gaps[method] = nn.accuracy - csls.accuracy
    return reports, gaps


def average_accuracy(reports: Sequence[EvalReport]) -> dict[str, float]:
    """Mean accuracy over reports, unweighted and weighted by test size."""
    if not reports:
        raise ValueError("no reports")
    total = sum(r.n_evaluated for r in reports)
    return {
        "macro": float(np.mean([r.accuracy for r in reports])),
        "weighted": sum(r.n_correct for r in reports) / total,
    }


def series(reports: Sequence[EvalReport], x_key: str) -> list[dict]:
    return [
        {"x": r.config[x_key], "method": r.method, "criterion": r.criterion,
         "k": r.k, "accuracy": r.accuracy, "n_evaluated": r.n_evaluated}
        for r in reports
    ]


def format_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text table: one row per method/criterion, one column per label, in %."""
    labels = list(dict.fromkeys(r.label or "-" for r in reports))
    rows: dict[str, dict[str, float]] = {}
    for r in reports:
        name = f"{r.method or 'map'} + {r.criterion.upper()}"
        rows.setdefault(name, {})[r.label or "-"] = r.accuracy
    width = max([len(n) for n in rows] + [6])
    lines = [" ".join([" " * width] + [f"{lab:>7}" for lab in labels])]
    for name, accs in rows.items():
        cells = [f"{100 * accs[lab]:7.1f}" if lab in accs else f"{'-':>7}" for lab in labels]
        lines.append(" ".join([name.ljust(width)] + cells))
    return "\n".join(lines)


def subset_max_oracle(dots: Sequence[float], k: int) -> float:
    """Largest sum over all size-``k`` subsets, by explicit enumeration."""
    dots = [float(v) for v in dots]
    n = len(dots)
    if n > ORACLE_MAX_N:
        raise ValueError(f"enumeration limited to n <= {ORACLE_MAX_N}")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    return max(math.fsum(dots[j] for j in S) for S in itertools.combinations(range(n), k))

"""Command-line entry point: ``xlalign {align,evaluate,refine}``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time

from . import __version__
from .baselines import MappingMatrix, least_squares_fit, procrustes_fit
from .embeddings import (
    EmbeddingMatrix,
    NormState,
    center_then_normalize,
    l2_normalize,
    load_text_embeddings,
    save_text_embeddings,
)
from .evaluation import (
    criterion_comparison,
    evaluate_mapping,
    format_table,
    knn_sweep,
    lexicon_size_sweep,
    series,
)
from .lexicon import filter_exact_matches, load_lexicon, split_validation
from .rcsls import TrainConfig, grid_search, train_rcsls
from .refinement import RefinementConfig, refine
from .retrieval import THREADS_ENV, map_queries

logger = logging.getLogger("xlalign")

_CONSTRAINTS = {"none": "unconstrained", "spectral": "spectral_ball"}
_LOSSES = {"linear": "linear", "logsumexp": "log_sum_exp"}
_PAIRINGS = {"best": "best_inferred", "mutual": "mutual_csls"}


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _add_embedding_args(p):
    p.add_argument("--src-emb", required=True, help="source vectors, text format")
    p.add_argument("--tgt-emb", required=True, help="target vectors, text format")
    p.add_argument("--max-vocab", type=int, default=200_000)
    p.add_argument("--center", action="store_true", help="center vectors before normalizing")


def _add_common_args(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker cap for retrieval (default ${THREADS_ENV} or 1)")
    p.add_argument("--manifest", default=None, help="manifest path (default: next to the output)")
    p.add_argument("--config", default=None, help="key=value file with default flag values")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_train_args(p):
    p.add_argument("--k", type=int, default=10, help="neighbors in the CSLS loss/criterion")
    p.add_argument("--constraint", choices=sorted(_CONSTRAINTS), default="none")
    p.add_argument("--lr", type=_floats, default=[1.0, 10.0, 25.0, 50.0],
                   help="learning rate(s), comma separated")
    p.add_argument("--epochs", type=_ints, default=[10, 20], help="epoch count(s), comma separated")
    p.add_argument("--extended-norm", action="store_true",
                   help="search neighbors over the whole vocabulary, not only the lexicon")
    p.add_argument("--pool-size", type=int, default=None,
                   help="cap extended neighbor pools to the most frequent words")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--l2-reg", type=float, default=0.0)
    p.add_argument("--loss", choices=sorted(_LOSSES), default="linear")
    p.add_argument("--valid-fraction", type=float, default=0.1,
                   help="source words held out for grid search")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xlalign", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="learn a mapping from a seed lexicon")
    _add_embedding_args(p)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--method", required=True, choices=["lsq", "procrustes", "rcsls"])
    _add_train_args(p)
    p.add_argument("--out-map", default="mapping.txt")
    p.add_argument("--out-aligned", default=None, help="write mapped, renormalized source vectors")
    _add_common_args(p)

    p = sub.add_parser("evaluate", help="word-translation precision@1")
    _add_embedding_args(p)
    p.add_argument("--map", required=True)
    p.add_argument("--eval-lexicon", required=True)
    p.add_argument("--criterion", choices=["nn", "csls"], default="csls")
    p.add_argument("--drop-exact-matches", action="store_true")
    p.add_argument("--sweep", choices=["none", "lexsize", "knn", "criterion"], default="none")
    p.add_argument("--ks", type=_ints, default=[1, 5, 10, 20, 50])
    p.add_argument("--sizes", type=_ints, default=None)
    p.add_argument("--method", choices=["procrustes", "rcsls"], default="procrustes",
                   help="method retrained by the lexicon-size sweep")
    p.add_argument("--train-lexicon", default=None, help="needed by the sweeps")
    p.add_argument("--label", default="")
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.add_argument("--out-report", default=None, help="default: stdout")
    _add_train_args(p)
    _add_common_args(p)

    p = sub.add_parser("refine", help="iterative lexicon refinement with Procrustes")
    _add_embedding_args(p)
    p.add_argument("--lexicon", required=True, help="seed lexicon")
    p.add_argument("--map", required=True, help="initial mapping")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--pool-size", type=int, default=None,
                   help="most frequent words used as candidates (default min(10000, vocab))")
    p.add_argument("--pairing", choices=sorted(_PAIRINGS), default="mutual")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out-map", default="refined_mapping.txt")
    _add_common_args(p)
    return parser


def read_config(path: str) -> list[str]:
    """Turn a ``key=value`` file into command-line tokens."""
    tokens = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            flag = "--" + key.replace("_", "-")
            if value.lower() in ("true", "yes", "on"):
                tokens.append(flag)
            elif value.lower() not in ("false", "no", "off"):
                tokens += [flag, value]
    return tokens


def _expand_config(argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return argv
    # config values come first so that explicit flags override them
    return argv[:1] + read_config(argv[i + 1]) + argv[1:]


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _load_pair(args) -> tuple[EmbeddingMatrix, EmbeddingMatrix]:
    prep = center_then_normalize if args.center else l2_normalize
    X = prep(load_text_embeddings(args.src_emb, args.max_vocab))
    Y = prep(load_text_embeddings(args.tgt_emb, args.max_vocab))
    if X.dim != Y.dim:
        raise ValueError(f"dimension mismatch: {X.dim} vs {Y.dim}")
    return X, Y


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rates=tuple(args.lr),
        epochs_grid=tuple(args.epochs),
        k=args.k,
        constraint=_CONSTRAINTS[args.constraint],
        extended_normalization=args.extended_norm,
        pool_size=args.pool_size,
        batch_size=args.batch_size,
        l2_reg=args.l2_reg,
        loss_variant=_LOSSES[args.loss],
        seed=args.seed,
    )


def _write_manifest(path, command, argv, args, inputs, timings, extra=None):
    manifest = {
        "command": command,
        "argv": argv,
        "config": {k: v for k, v in vars(args).items() if k not in ("func",)},
        "inputs": {name: {"path": os.path.abspath(p), "sha256": _digest(p)}
                   for name, p in inputs.items() if p},
        "seed": args.seed,
        "version": __version__,
        "timings": timings,
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return manifest


def cmd_align(args, argv) -> int:
    t0 = time.perf_counter()
    X, Y = _load_pair(args)
    lex = load_lexicon(args.lexicon, X.vocab, Y.vocab)
    t_load = time.perf_counter() - t0
    extra = {"lexicon": {"pairs": lex.n, "coverage": lex.coverage}}
    Xn, Yn = X.vectors[lex.src], Y.vectors[lex.tgt]
    if args.method == "lsq":
        W = least_squares_fit(Xn, Yn)
    elif args.method == "procrustes":
        W = procrustes_fit(Xn, Yn)
    else:
        config = _train_config(args)
        if len(config.learning_rates) * len(config.epochs_grid) > 1:
            train, valid = split_validation(lex, args.valid_fraction, args.seed)
            config, _ = grid_search(X, Y, train, valid, config)
            logger.info("selected lr=%g epochs=%d", config.learning_rates[0], config.epochs_grid[0])
        W, trace = train_rcsls(X, Y, lex, config=config)
        extra["train"] = {
            "config": config.as_dict(),
            "initial_objective": trace.initial_objective,
            "best_objective": trace.best_objective,
            "objectives": trace.objectives,
            "learning_rates": trace.learning_rates,
            "projections": trace.projections,
            "batch_mode": trace.batch_mode,
        }
    extra["constraint"] = W.constraint.value
    W.save(args.out_map)
    if args.out_aligned:
        aligned = EmbeddingMatrix(X.vocab, map_queries(MappingMatrix(W.w), X.vectors),
                                  NormState.L2_NORMALIZED, X.zero_rows)
        save_text_embeddings(aligned, args.out_aligned)
    timings = {"load": t_load, "total": time.perf_counter() - t0}
    _write_manifest(args.manifest or args.out_map + ".manifest.json", "align", argv, args,
                    {"src_emb": args.src_emb, "tgt_emb": args.tgt_emb, "lexicon": args.lexicon},
                    timings, extra)
    return 0


def cmd_evaluate(args, argv) -> int:
    t0 = time.perf_counter()
    X, Y = _load_pair(args)
    W = MappingMatrix.load(args.map)
    test = load_lexicon(args.eval_lexicon, X.vocab, Y.vocab)
    if args.drop_exact_matches:
        test = filter_exact_matches(test, X.vocab, Y.vocab)
    report = evaluate_mapping(W, X, Y, test, args.criterion, args.k, label=args.label,
                              method="map")
    report.skipped_oov = test.skipped
    report.config = {"map": args.map, "drop_exact_matches": args.drop_exact_matches}
    reports = [report]
    if args.sweep != "none":
        if args.sweep == "criterion":
            reports, gaps = criterion_comparison(X, Y, test, {"map": W}, args.k, args.label)
            report.series = [r.to_dict() for r in reports]
            report.config["nn_minus_csls"] = gaps
        else:
            if not args.train_lexicon:
                raise ValueError(f"--sweep {args.sweep} needs --train-lexicon")
            train = load_lexicon(args.train_lexicon, X.vocab, Y.vocab)
            config = _train_config(args)
            if args.sweep == "knn":
                reports = knn_sweep(args.ks, X, Y, train, test, config, args.label)
                report.series = series(reports, "k")
            else:
                sizes = args.sizes or [train.n]
                reports = lexicon_size_sweep(sizes, args.method, X, Y, train, test, config,
                                             args.criterion, args.k, args.label)
                report.series = series(reports, "lexicon_size")
    text = report.to_json(indent=2) if args.format == "json" else format_table(reports)
    if args.out_report:
        with open(args.out_report, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    manifest = args.manifest or (args.out_report + ".manifest.json" if args.out_report else None)
    if manifest:
        _write_manifest(manifest, "evaluate", argv, args,
                        {"src_emb": args.src_emb, "tgt_emb": args.tgt_emb, "map": args.map,
                         "eval_lexicon": args.eval_lexicon, "train_lexicon": args.train_lexicon},
                        {"total": time.perf_counter() - t0})
    return 0


def cmd_refine(args, argv) -> int:
    t0 = time.perf_counter()
    X, Y = _load_pair(args)
    lex = load_lexicon(args.lexicon, X.vocab, Y.vocab)
    W0 = MappingMatrix.load(args.map)
    pool = args.pool_size
    if pool is None:
        pool = min(10_000, X.n_words, Y.n_words)
    config = RefinementConfig(args.rounds, pool, _PAIRINGS[args.pairing], args.k)
    W, sizes = refine(W0, X, Y, lex, config)
    W.save(args.out_map)
    _write_manifest(args.manifest or args.out_map + ".manifest.json", "refine", argv, args,
                    {"src_emb": args.src_emb, "tgt_emb": args.tgt_emb, "lexicon": args.lexicon,
                     "map": args.map},
                    {"total": time.perf_counter() - t0},
                    {"rounds": len(sizes), "lexicon_sizes": sizes})
    return 0


_COMMANDS = {"align": cmd_align, "evaluate": cmd_evaluate, "refine": cmd_refine}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        expanded = _expand_config(argv)
    except (OSError, ValueError) as e:
        parser.error(str(e))
    args = parser.parse_args(expanded)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        os.environ[THREADS_ENV] = str(max(1, args.threads))
    try:
        return _COMMANDS[args.command](args, expanded)
    except (OSError, ValueError, KeyError) as e:
        print(f"xlalign {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

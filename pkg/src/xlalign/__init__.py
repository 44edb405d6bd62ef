"""Supervised alignment of word-embedding spaces with Procrustes and RCSLS."""

from .baselines import ConstraintDomain, MappingMatrix, least_squares_fit, procrustes_fit
from .embeddings import (
    EmbeddingMatrix,
    NormState,
    Vocabulary,
    center_then_normalize,
    l2_normalize,
    load_text_embeddings,
    save_text_embeddings,
)
from .evaluation import EvalReport, evaluate_mapping, precision_at_1
from .lexicon import BilingualLexicon, filter_exact_matches, load_lexicon, split_validation
from .rcsls import (
    LossVariant,
    NeighborPools,
    TrainConfig,
    grid_search,
    project_spectral,
    rcsls_objective,
    rcsls_subgradient,
    train_rcsls,
)
from .refinement import PairingRule, RefinementConfig, refine
from .retrieval import (
    TranslationResult,
    csls_loss,
    csls_translate,
    map_queries,
    mean_knn_similarity,
    nn_translate,
    top_k_dots,
)
from .synthetic import hub_fixture, planted_rotation

__version__ = "0.1.0"

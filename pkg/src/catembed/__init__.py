"""Entity and category embeddings over an annotated corpus and a category DAG.

Train with the flat (CE) or hierarchy-weighted (HCE) negative-sampling
objective, then evaluate by concept categorization (clustering purity,
nearest-neighbor classification) and semantic relatedness (Spearman's rho).
"""

from .corpus import (
    CategoryGraph,
    Corpus,
    Document,
    NodeId,
    NodeKind,
    Vocabulary,
    build_vocabulary,
    load_corpus,
    load_hierarchy,
    prune_to_dag,
)
from .embeddings import EmbeddingIndex, EmbeddingTable, init_embeddings, load_embeddings, save_text
from .errors import CatembedError
from .hierarchy import AncestorWeights, ancestors, avg_steps_down, category_weights, ce_weights
from .sampler import NoiseTable, build_noise_table, draw_negatives, generate_pairs
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "AncestorWeights",
    "CatembedError",
    "CategoryGraph",
    "Corpus",
    "Document",
    "EmbeddingIndex",
    "EmbeddingTable",
    "NodeId",
    "NodeKind",
    "NoiseTable",
    "TrainConfig",
    "Vocabulary",
    "__version__",
    "ancestors",
    "avg_steps_down",
    "build_noise_table",
    "build_vocabulary",
    "category_weights",
    "ce_weights",
    "draw_negatives",
    "generate_pairs",
    "init_embeddings",
    "load_corpus",
    "load_embeddings",
    "load_hierarchy",
    "prune_to_dag",
    "save_text",
    "train",
]

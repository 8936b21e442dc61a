"""Sinkhorn-balanced Gram matrices and kernel-PCA embeddings for SMILES."""

from .embeddings import (
    FeatureVector,
    KmerVocabulary,
    build_vocabulary,
    kmer_vector,
    morgan_fingerprint,
    weighted_kmer_vector,
)
from .evaluation import (
    EvalReport,
    LabeledDataset,
    SplitSpec,
    class_similarity_heatmap,
    classification_metrics,
    knn_classify,
    random_split,
    regression_metrics,
    ridge_regress,
    run_experiment,
)
from .gram import (
    BalancedKernel,
    GramPipelineConfig,
    build_gram,
    gaussian_distance_matrix,
    kernel_value_between,
    normalize_to_probability,
    sinkhorn_balance,
)
from .kpca import Embedding, KpcaModel, fit_kpca, transform
from .smiles import Atom, Bond, BondOrder, MolecularGraph, heavy_atom_count, parse_smiles

__version__ = "0.1.0"
